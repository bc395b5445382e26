#include "fipe/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fipe/error.hpp"

namespace fipe {

int Dataset::num_classes() const {
  int c = 0;
  for (int y : labels) c = std::max(c, y + 1);
  return c;
}

void Dataset::validate() const {
  if (features.empty()) throw InvalidInput("dataset has no features");
  if (labeled() && labels.size() != rows.size()) {
    throw InvalidInput("dataset has " + std::to_string(rows.size()) +
                       " rows but " + std::to_string(labels.size()) + " labels");
  }
  std::vector<std::vector<double>> no_thresholds(features.size());
  const FeatureSchema schema(features, no_thresholds);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      schema.validate(rows[i]);
    } catch (const InvalidInput& e) {
      throw InvalidInput("row " + std::to_string(i) + ": " + e.what());
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) {
      throw InvalidInput("row " + std::to_string(i) + ": negative label");
    }
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t row, std::size_t col) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw InvalidInput("line " + std::to_string(row) + ", column " +
                       std::to_string(col + 1) + ": '" + s +
                       "' is not a finite number");
  }
  return v;
}

}  // namespace

Dataset read_csv(std::istream& in, const std::vector<FeatureSpec>* schema) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("CSV is empty");
  auto header = split_line(line);
  Dataset data;
  const bool has_label = !header.empty() && header.back() == "label";
  if (has_label) header.pop_back();
  if (header.empty()) throw InvalidInput("CSV has no feature columns");

  if (schema) {
    if (schema->size() != header.size()) {
      throw InvalidInput("CSV has " + std::to_string(header.size()) +
                         " feature columns, schema has " +
                         std::to_string(schema->size()));
    }
    for (std::size_t j = 0; j < header.size(); ++j) {
      if ((*schema)[j].name != header[j]) {
        throw InvalidInput("CSV column " + std::to_string(j + 1) + " is '" +
                           header[j] + "', schema expects '" +
                           (*schema)[j].name + "'");
      }
    }
    data.features = *schema;
  } else {
    for (const auto& name : header) data.features.push_back({name});
  }

  const std::size_t width = header.size() + (has_label ? 1 : 0);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_line(line);
    if (cells.size() != width) {
      throw InvalidInput("line " + std::to_string(lineno) + " has " +
                         std::to_string(cells.size()) + " fields, expected " +
                         std::to_string(width));
    }
    Point x;
    for (std::size_t j = 0; j < header.size(); ++j) {
      x.values.push_back(parse_number(cells[j], lineno, j));
    }
    data.rows.push_back(std::move(x));
    if (has_label) {
      const double y = parse_number(cells.back(), lineno, header.size());
      if (y != std::floor(y)) {
        throw InvalidInput("line " + std::to_string(lineno) +
                           ": label must be an integer");
      }
      data.labels.push_back(static_cast<int>(y));
    }
  }
  data.validate();
  return data;
}

Dataset load_csv(const std::filesystem::path& path,
                 const std::vector<FeatureSpec>* schema) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open data file " + path.string());
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const Dataset& data) {
  for (std::size_t j = 0; j < data.features.size(); ++j) {
    out << (j ? "," : "") << data.features[j].name;
  }
  if (data.labeled()) out << ",label";
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    for (std::size_t j = 0; j < data.rows[i].size(); ++j) {
      out << (j ? "," : "") << data.rows[i][j];
    }
    if (data.labeled()) out << ',' << data.labels[i];
    out << '\n';
  }
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write data file " + path.string());
  write_csv(out, data);
}

double samme_weight(double err, int num_classes) {
  err = std::clamp(err, 1e-10, 1.0 - 1e-10);
  return std::log((1.0 - err) / err) + std::log(num_classes - 1.0);
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;  // continuous only
  double impurity = 0.0;
};

double gini(std::span<const double> counts, double total) {
  if (total <= 0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += c * c;
  return total - s / total;  // weight-scaled impurity
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, std::span<const double> weights, int max_depth,
              int max_features, int num_classes, std::mt19937_64& rng)
      : data_(data), weights_(weights), max_depth_(max_depth),
        max_features_(max_features), num_classes_(num_classes), rng_(rng) {}

  Tree build() {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (weights_[i] > 0) rows.push_back(i);
    }
    const int root = grow(rows, 0);
    return Tree(std::move(nodes_), root);
  }

 private:
  std::vector<double> class_weights(const std::vector<std::size_t>& rows) const {
    std::vector<double> c(num_classes_, 0.0);
    for (std::size_t i : rows) c[data_.labels[i]] += weights_[i];
    return c;
  }

  int add_leaf(const std::vector<double>& counts) {
    std::vector<double> scores(num_classes_, 0.0);
    scores[argmax(counts)] = 1.0;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node::leaf(id, std::move(scores)));
    return id;
  }

  std::vector<int> candidate_features() {
    std::vector<int> f(data_.features.size());
    std::iota(f.begin(), f.end(), 0);
    if (max_features_ < static_cast<int>(f.size())) {
      std::shuffle(f.begin(), f.end(), rng_);
      f.resize(max_features_);
      std::sort(f.begin(), f.end());
    }
    return f;
  }

  void best_continuous(const std::vector<std::size_t>& rows, int j,
                       const std::vector<double>& total, Split& best) {
    std::vector<std::size_t> order = rows;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return data_.rows[a][j] < data_.rows[b][j];
    });
    double total_w = std::accumulate(total.begin(), total.end(), 0.0);
    std::vector<double> left(num_classes_, 0.0);
    std::vector<double> right = total;
    double left_w = 0.0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      const std::size_t i = order[k];
      left[data_.labels[i]] += weights_[i];
      right[data_.labels[i]] -= weights_[i];
      left_w += weights_[i];
      const double a = data_.rows[i][j];
      const double b = data_.rows[order[k + 1]][j];
      if (!(a < b)) continue;
      const double imp = gini(left, left_w) + gini(right, total_w - left_w);
      if (imp < best.impurity - 1e-12) {
        double t = 0.5 * (a + b);
        if (!(t < b)) t = a;
        best = {j, t, imp};
      }
    }
  }

  void best_binary(const std::vector<std::size_t>& rows, int j,
                   const std::vector<double>& total, Split& best) {
    std::vector<double> left(num_classes_, 0.0);
    double left_w = 0.0;
    for (std::size_t i : rows) {
      if (data_.rows[i][j] == 0.0) {
        left[data_.labels[i]] += weights_[i];
        left_w += weights_[i];
      }
    }
    const double total_w = std::accumulate(total.begin(), total.end(), 0.0);
    if (left_w <= 0 || left_w >= total_w) return;
    std::vector<double> right(num_classes_);
    for (int c = 0; c < num_classes_; ++c) right[c] = total[c] - left[c];
    const double imp = gini(left, left_w) + gini(right, total_w - left_w);
    if (imp < best.impurity - 1e-12) best = {j, 0.0, imp};
  }

  int grow(const std::vector<std::size_t>& rows, int depth) {
    const auto counts = class_weights(rows);
    const double total_w = std::accumulate(counts.begin(), counts.end(), 0.0);
    const double impurity = gini(counts, total_w);
    if (depth >= max_depth_ || impurity <= 1e-12 * total_w) {
      return add_leaf(counts);
    }
    Split best;
    best.impurity = impurity;
    for (int j : candidate_features()) {
      if (data_.features[j].type == FeatureType::Binary) {
        best_binary(rows, j, counts, best);
      } else {
        best_continuous(rows, j, counts, best);
      }
    }
    if (best.feature < 0) return add_leaf(counts);

    const bool binary = data_.features[best.feature].type == FeatureType::Binary;
    std::vector<std::size_t> left, right;
    for (std::size_t i : rows) {
      const double v = data_.rows[i][best.feature];
      const bool go_left = binary ? v == 0.0 : v <= best.threshold;
      (go_left ? left : right).push_back(i);
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node::leaf(id, {}));  // placeholder, replaced below
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[id] = binary ? Node::binary_split(id, best.feature, l, r)
                        : Node::threshold_split(id, best.feature, best.threshold, l, r);
    return id;
  }

  const Dataset& data_;
  std::span<const double> weights_;
  int max_depth_;
  int max_features_;
  int num_classes_;
  std::mt19937_64& rng_;
  std::vector<Node> nodes_;
};

int check_training_data(const Dataset& data, int num_trees, int max_depth) {
  if (num_trees < 1) throw InvalidInput("need at least one tree");
  if (max_depth < 1) throw InvalidInput("max_depth must be >= 1");
  if (!data.labeled() || data.rows.empty()) {
    throw InvalidInput("training needs a non-empty labeled dataset");
  }
  data.validate();
  for (const FeatureSpec& f : data.features) {
    if (f.type == FeatureType::Categorical) {
      throw InvalidInput("training does not support categorical feature '" +
                         f.name + "'");
    }
  }
  const int num_classes = data.num_classes();
  std::vector<bool> seen(num_classes, false);
  for (int y : data.labels) seen[y] = true;
  if (std::count(seen.begin(), seen.end(), true) < 2) {
    throw InvalidInput("training needs at least two classes present");
  }
  return num_classes;
}

}  // namespace

Tree grow_tree(const Dataset& data, std::span<const double> sample_weights,
               int max_depth, int max_features, int num_classes,
               std::mt19937_64& rng) {
  if (sample_weights.size() != data.size()) {
    throw InvalidInput("sample weight count does not match the dataset");
  }
  return TreeBuilder(data, sample_weights, max_depth, max_features, num_classes,
                     rng)
      .build();
}

std::vector<double> bootstrap_counts(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> counts(n, 0.0);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t k = 0; k < n; ++k) counts[pick(rng)] += 1.0;
  return counts;
}

Ensemble train_adaboost(const Dataset& data, int num_trees, int max_depth,
                        std::uint64_t seed) {
  const int num_classes = check_training_data(data, num_trees, max_depth);
  std::mt19937_64 rng(seed);
  const std::size_t n = data.size();
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  std::vector<Tree> trees;
  std::vector<double> alpha;
  const int all_features = static_cast<int>(data.features.size());
  for (int m = 0; m < num_trees; ++m) {
    Tree tree = grow_tree(data, w, max_depth, all_features, num_classes, rng);
    std::vector<bool> miss(n);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int leaf = tree.leaf_index(data.rows[i]);
      miss[i] = argmax(tree.node(leaf).scores) != data.labels[i];
      if (miss[i]) err += w[i];
    }
    const double a = std::max(0.0, samme_weight(err, num_classes));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (miss[i]) w[i] *= std::exp(a);
      sum += w[i];
    }
    for (double& v : w) v /= sum;
    trees.push_back(std::move(tree));
    alpha.push_back(a);
  }
  if (std::all_of(alpha.begin(), alpha.end(), [](double a) { return a == 0.0; })) {
    throw InvalidInput("no weak learner beats chance on this dataset");
  }
  return Ensemble(data.features, std::move(trees), std::move(alpha),
                  num_classes);
}

Ensemble train_random_forest(const Dataset& data, int num_trees, int max_depth,
                             std::uint64_t seed) {
  const int num_classes = check_training_data(data, num_trees, max_depth);
  std::mt19937_64 rng(seed);
  const int max_features = static_cast<int>(
      std::ceil(std::sqrt(static_cast<double>(data.features.size()))));
  std::vector<Tree> trees;
  for (int m = 0; m < num_trees; ++m) {
    const auto counts = bootstrap_counts(data.size(), rng);
    trees.push_back(
        grow_tree(data, counts, max_depth, max_features, num_classes, rng));
  }
  return Ensemble(data.features, std::move(trees),
                  std::vector<double>(num_trees, 1.0), num_classes);
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "blobs") return SyntheticKind::Blobs;
  if (name == "xor") return SyntheticKind::Xor;
  if (name == "separable") return SyntheticKind::Separable;
  throw InvalidInput("unknown synthetic dataset '" + name + "'");
}

Dataset make_synthetic(SyntheticKind kind, std::size_t n, std::uint64_t seed) {
  if (n < 4) throw InvalidInput("synthetic datasets need n >= 4");
  std::mt19937_64 rng(seed);
  Dataset data;
  data.features = {{"x0"}, {"x1"}};
  switch (kind) {
    case SyntheticKind::Blobs: {
      const double cx[3] = {0.0, 2.5, 1.25};
      const double cy[3] = {0.0, 0.0, 2.2};
      std::normal_distribution<double> noise(0.0, 0.8);
      for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % 3);
        const double x = cx[c] + noise(rng);
        const double y = cy[c] + noise(rng);
        data.rows.push_back(Point{x, y});
        data.labels.push_back(c);
      }
      break;
    }
    case SyntheticKind::Xor: {
      std::normal_distribution<double> noise(0.0, 0.15);
      for (std::size_t i = 0; i < n; ++i) {
        const int a = static_cast<int>(i % 2);
        const int b = static_cast<int>((i / 2) % 2);
        double x = a, y = b;
        if (i >= 4) {
          x += noise(rng);
          y += noise(rng);
        }
        data.rows.push_back(Point{x, y});
        data.labels.push_back(a ^ b);
      }
      break;
    }
    case SyntheticKind::Separable: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      while (data.rows.size() < n) {
        const double x = u(rng);
        const double y = u(rng);
        if (std::abs(x + y - 1.0) < 0.05) continue;
        data.rows.push_back(Point{x, y});
        data.labels.push_back(x + y > 1.0 ? 1 : 0);
      }
      break;
    }
  }
  return data;
}

}  // namespace fipe
