#include "fipe/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

#include "fipe/error.hpp"

namespace fipe {

const char* to_string(FeatureType type) {
  switch (type) {
    case FeatureType::Continuous:
      return "continuous";
    case FeatureType::Binary:
      return "binary";
    case FeatureType::Categorical:
      return "categorical";
  }
  return "?";
}

const char* to_string(ModelFormatErrc code) {
  switch (code) {
    case ModelFormatErrc::Syntax:
      return "syntax error";
    case ModelFormatErrc::SchemaViolation:
      return "schema violation";
    case ModelFormatErrc::NonMonotoneThresholds:
      return "non-monotone thresholds";
    case ModelFormatErrc::ScoreOutOfRange:
      return "score out of range";
    case ModelFormatErrc::DanglingNode:
      return "dangling node";
    case ModelFormatErrc::UnsupportedVersion:
      return "unsupported format version";
  }
  return "?";
}

std::size_t CellSignatureHash::operator()(
    const CellSignature& cell) const noexcept {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (int k : cell.index) {
    h ^= static_cast<std::size_t>(k) + 0x9e3779b97f4a7c15ULL + (h << 6) +
         (h >> 2);
  }
  return h;
}

// ---------------------------------------------------------------------------
// FeatureSchema

FeatureSchema::FeatureSchema(std::vector<FeatureSpec> features,
                             std::vector<std::vector<double>> thresholds)
    : features_(std::move(features)), thresholds_(std::move(thresholds)) {
  if (thresholds_.size() != features_.size()) {
    throw ModelFormatError(ModelFormatErrc::SchemaViolation,
                           "threshold lists do not match feature count");
  }
  for (std::size_t j = 0; j < features_.size(); ++j) {
    const auto& f = features_[j];
    const auto& t = thresholds_[j];
    if (f.type == FeatureType::Categorical && f.num_levels < 2) {
      throw ModelFormatError(ModelFormatErrc::SchemaViolation,
                             "categorical feature '" + f.name +
                                 "' needs at least 2 levels");
    }
    if (f.type != FeatureType::Continuous && !t.empty()) {
      throw ModelFormatError(ModelFormatErrc::SchemaViolation,
                             "feature '" + f.name +
                                 "' is not continuous but has thresholds");
    }
    for (std::size_t r = 0; r < t.size(); ++r) {
      if (!std::isfinite(t[r])) {
        throw ModelFormatError(ModelFormatErrc::NonMonotoneThresholds,
                               "non-finite threshold on feature '" + f.name +
                                   "'");
      }
      if (r > 0 && !(t[r - 1] < t[r])) {
        throw ModelFormatError(ModelFormatErrc::NonMonotoneThresholds,
                               "thresholds of feature '" + f.name +
                                   "' are not strictly increasing");
      }
    }
  }
}

int FeatureSchema::threshold_index(std::size_t j, double value) const {
  const auto& t = thresholds_[j];
  auto it = std::lower_bound(t.begin(), t.end(), value);
  if (it == t.end() || *it != value) return -1;
  return static_cast<int>(it - t.begin());
}

int FeatureSchema::cell_extent(std::size_t j) const {
  switch (features_[j].type) {
    case FeatureType::Continuous:
      return static_cast<int>(thresholds_[j].size()) + 1;
    case FeatureType::Binary:
      return 2;
    case FeatureType::Categorical:
      return features_[j].num_levels;
  }
  return 0;
}

std::size_t FeatureSchema::num_continuous() const {
  return std::count_if(features_.begin(), features_.end(), [](const auto& f) {
    return f.type == FeatureType::Continuous;
  });
}

std::size_t FeatureSchema::num_binary() const {
  return std::count_if(features_.begin(), features_.end(), [](const auto& f) {
    return f.type == FeatureType::Binary;
  });
}

std::size_t FeatureSchema::num_categorical() const {
  return std::count_if(features_.begin(), features_.end(), [](const auto& f) {
    return f.type == FeatureType::Categorical;
  });
}

void FeatureSchema::validate(const Point& x) const {
  if (x.size() != size()) {
    std::ostringstream os;
    os << "point has " << x.size() << " values, schema has " << size()
       << " features";
    throw InvalidInput(os.str());
  }
  for (std::size_t j = 0; j < size(); ++j) {
    const double v = x[j];
    switch (features_[j].type) {
      case FeatureType::Continuous:
        if (std::isnan(v)) {
          throw InvalidInput("NaN value for feature '" + features_[j].name +
                             "'");
        }
        break;
      case FeatureType::Binary:
        if (v != 0.0 && v != 1.0) {
          throw InvalidInput("binary feature '" + features_[j].name +
                             "' must be 0 or 1");
        }
        break;
      case FeatureType::Categorical:
        if (v < 0 || v >= features_[j].num_levels || v != std::floor(v)) {
          throw InvalidInput("categorical feature '" + features_[j].name +
                             "' has invalid level");
        }
        break;
    }
  }
}

void FeatureSchema::validate(const CellSignature& cell) const {
  if (cell.size() != size()) {
    throw InvalidInput("cell signature arity does not match schema");
  }
  for (std::size_t j = 0; j < size(); ++j) {
    if (cell.index[j] < 0 || cell.index[j] >= cell_extent(j)) {
      throw InvalidInput("cell index out of range for feature '" +
                         features_[j].name + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// Node / Tree

Node Node::leaf(int id, std::vector<double> scores) {
  Node n;
  n.id = id;
  n.is_leaf = true;
  n.scores = std::move(scores);
  return n;
}

Node Node::threshold_split(int id, int feature, double threshold, int left,
                           int right) {
  Node n;
  n.id = id;
  n.is_leaf = false;
  n.split = SplitKind::Threshold;
  n.feature = feature;
  n.threshold = threshold;
  n.left = left;
  n.right = right;
  return n;
}

Node Node::binary_split(int id, int feature, int left, int right) {
  Node n;
  n.id = id;
  n.is_leaf = false;
  n.split = SplitKind::Binary;
  n.feature = feature;
  n.left = left;
  n.right = right;
  return n;
}

Node Node::category_split(int id, int feature, int category, int left,
                          int right) {
  Node n;
  n.id = id;
  n.is_leaf = false;
  n.split = SplitKind::Category;
  n.feature = feature;
  n.category = category;
  n.left = left;
  n.right = right;
  return n;
}

bool Node::goes_left(double value) const {
  switch (split) {
    case SplitKind::Threshold:
      return value <= threshold;
    case SplitKind::Binary:
      return value == 0.0;
    case SplitKind::Category:
      return value != static_cast<double>(category);
  }
  return true;
}

Tree::Tree(std::vector<Node> nodes, int root)
    : nodes_(std::move(nodes)), root_(root) {
  const int n = static_cast<int>(nodes_.size());
  if (n == 0) {
    throw ModelFormatError(ModelFormatErrc::SchemaViolation, "empty tree");
  }
  if (root_ < 0 || root_ >= n) {
    throw ModelFormatError(ModelFormatErrc::DanglingNode,
                           "root does not reference a node");
  }
  std::vector<char> seen(n, 0);
  std::queue<int> queue;
  queue.push(root_);
  seen[root_] = 1;
  nodes_[root_].depth = 0;
  int internal = 0;
  int leaves = 0;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop();
    const Node& node = nodes_[v];
    max_depth_ = std::max(max_depth_, node.depth);
    if (node.is_leaf) {
      ++leaves;
      continue;
    }
    ++internal;
    for (int child : {node.left, node.right}) {
      if (child < 0 || child >= n) {
        throw ModelFormatError(
            ModelFormatErrc::DanglingNode,
            "node " + std::to_string(node.id) + " has a missing child");
      }
      if (seen[child]) {
        throw ModelFormatError(ModelFormatErrc::SchemaViolation,
                               "node " + std::to_string(nodes_[child].id) +
                                   " has more than one parent");
      }
      seen[child] = 1;
      nodes_[child].depth = node.depth + 1;
      queue.push(child);
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw ModelFormatError(ModelFormatErrc::SchemaViolation,
                           "tree has nodes unreachable from the root");
  }
  if (leaves != internal + 1) {
    throw InternalError("leaf count must be internal count + 1");
  }
}

std::size_t Tree::num_leaves() const {
  return std::count_if(nodes_.begin(), nodes_.end(),
                       [](const Node& n) { return n.is_leaf; });
}

int Tree::leaf_index(const Point& x) const {
  int v = root_;
  while (!nodes_[v].is_leaf) {
    const Node& node = nodes_[v];
    v = node.goes_left(x[node.feature]) ? node.left : node.right;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Ensemble

Ensemble::Ensemble(std::vector<FeatureSpec> features, std::vector<Tree> trees,
                   std::vector<double> weights, int num_classes)
    : trees_(std::move(trees)),
      weights_(std::move(weights)),
      num_classes_(num_classes) {
  using E = ModelFormatErrc;
  if (num_classes_ < 2) {
    throw ModelFormatError(E::SchemaViolation, "num_classes must be >= 2");
  }
  if (trees_.empty()) {
    throw ModelFormatError(E::SchemaViolation, "ensemble has no trees");
  }
  if (weights_.size() != trees_.size()) {
    throw ModelFormatError(E::SchemaViolation,
                           "weights and trees differ in length");
  }
  for (double a : weights_) {
    if (!std::isfinite(a) || a < 0) {
      throw ModelFormatError(E::SchemaViolation,
                             "weights must be finite and non-negative");
    }
  }
  if (std::none_of(weights_.begin(), weights_.end(),
                   [](double a) { return a > 0; })) {
    throw ModelFormatError(E::SchemaViolation,
                           "at least one weight must be positive");
  }

  const std::size_t p = features.size();
  std::vector<std::set<double>> split_values(p);
  for (std::size_t m = 0; m < trees_.size(); ++m) {
    for (const Node& node : trees_[m].nodes_) {
      const std::string where =
          "tree " + std::to_string(m) + " node " + std::to_string(node.id);
      if (node.is_leaf) {
        if (node.scores.size() != static_cast<std::size_t>(num_classes_)) {
          throw ModelFormatError(E::SchemaViolation,
                                 where + ": expected " +
                                     std::to_string(num_classes_) + " scores");
        }
        for (double s : node.scores) {
          if (!(s >= 0.0 && s <= 1.0)) {
            throw ModelFormatError(E::ScoreOutOfRange,
                                   where + ": leaf score outside [0, 1]");
          }
        }
        continue;
      }
      if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= p) {
        throw ModelFormatError(E::SchemaViolation,
                               where + ": feature index out of range");
      }
      const FeatureSpec& f = features[node.feature];
      switch (node.split) {
        case SplitKind::Threshold:
          if (f.type != FeatureType::Continuous) {
            throw ModelFormatError(E::SchemaViolation,
                                   where + ": threshold split on " +
                                       to_string(f.type) + " feature");
          }
          if (!std::isfinite(node.threshold)) {
            throw ModelFormatError(E::SchemaViolation,
                                   where + ": non-finite threshold");
          }
          split_values[node.feature].insert(node.threshold);
          break;
        case SplitKind::Binary:
          if (f.type != FeatureType::Binary) {
            throw ModelFormatError(E::SchemaViolation,
                                   where + ": binary split on " +
                                       to_string(f.type) + " feature");
          }
          break;
        case SplitKind::Category:
          if (f.type != FeatureType::Categorical) {
            throw ModelFormatError(E::SchemaViolation,
                                   where + ": category split on " +
                                       to_string(f.type) + " feature");
          }
          if (node.category < 0 || node.category >= f.num_levels) {
            throw ModelFormatError(E::SchemaViolation,
                                   where + ": category level out of range");
          }
          break;
      }
    }
  }

  std::vector<std::vector<double>> thresholds(p);
  for (std::size_t j = 0; j < p; ++j) {
    thresholds[j].assign(split_values[j].begin(), split_values[j].end());
  }
  schema_ = FeatureSchema(std::move(features), std::move(thresholds));

  for (Tree& tree : trees_) {
    for (Node& node : tree.nodes_) {
      if (!node.is_leaf && node.split == SplitKind::Threshold) {
        node.threshold_index =
            schema_.threshold_index(node.feature, node.threshold);
      }
    }
  }
}

Ensemble Ensemble::with_weights(std::vector<double> weights) const {
  return Ensemble(schema_.features(), trees_, std::move(weights),
                  num_classes_);
}

std::span<const double> Ensemble::tree_scores(std::size_t m,
                                              const Point& x) const {
  return trees_[m].node(trees_[m].leaf_index(x)).scores;
}

void Ensemble::check_weights(std::span<const double> weights) const {
  if (weights.size() != trees_.size()) {
    throw InvalidInput("weight vector has " + std::to_string(weights.size()) +
                       " entries, ensemble has " +
                       std::to_string(trees_.size()) + " trees");
  }
}

std::vector<double> Ensemble::predict_scores(std::span<const double> weights,
                                             const Point& x) const {
  check_weights(weights);
  schema_.validate(x);
  std::vector<double> scores(num_classes_, 0.0);
  for (std::size_t m = 0; m < trees_.size(); ++m) {
    if (weights[m] == 0.0) continue;
    auto h = tree_scores(m, x);
    for (int c = 0; c < num_classes_; ++c) scores[c] += weights[m] * h[c];
  }
  return scores;
}

int Ensemble::predict_class(std::span<const double> weights,
                            const Point& x) const {
  return argmax(predict_scores(weights, x));
}

int argmax(std::span<const double> scores) {
  int best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = static_cast<int>(c);
  }
  return best;
}

CellSignature cell_of(const FeatureSchema& schema, const Point& x) {
  schema.validate(x);
  CellSignature cell;
  cell.index.resize(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (schema.type(j) == FeatureType::Continuous) {
      auto t = schema.thresholds(j);
      // Number of thresholds strictly below x_j.
      cell.index[j] =
          static_cast<int>(std::lower_bound(t.begin(), t.end(), x[j]) -
                           t.begin());
    } else {
      cell.index[j] = static_cast<int>(x[j]);
    }
  }
  return cell;
}

Point cell_center(const FeatureSchema& schema, const CellSignature& cell) {
  schema.validate(cell);
  Point x;
  x.values.resize(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const int k = cell.index[j];
    if (schema.type(j) != FeatureType::Continuous) {
      x[j] = k;
      continue;
    }
    auto t = schema.thresholds(j);
    const int r = static_cast<int>(t.size());
    if (r == 0) {
      x[j] = 0.0;
    } else if (k == 0) {
      x[j] = t[0] - 1.0;
    } else if (k == r) {
      x[j] = t[r - 1] + 1.0;
    } else {
      x[j] = 0.5 * (t[k - 1] + t[k]);
    }
  }
  return x;
}

}  // namespace fipe
