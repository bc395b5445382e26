#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fipe {

enum class FeatureType { Continuous, Binary, Categorical };

const char* to_string(FeatureType type);

// Name and kind of one input column. Thresholds are not part of the spec; a
// FeatureSchema derives them from the splits of an ensemble.
struct FeatureSpec {
  std::string name;
  FeatureType type = FeatureType::Continuous;
  int num_levels = 0;  // categorical only, >= 2

  bool operator==(const FeatureSpec&) const = default;
};

// One value per feature: a real for continuous features, 0/1 for binary ones
// and a level index in [0, num_levels) for categorical ones.
struct Point {
  std::vector<double> values;

  Point() = default;
  explicit Point(std::vector<double> v) : values(std::move(v)) {}
  Point(std::initializer_list<double> v) : values(v) {}

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t j) const { return values[j]; }
  double& operator[](std::size_t j) { return values[j]; }

  bool operator==(const Point&) const = default;
};

// Identifies one cell of the piecewise-constant partition induced by the
// ensemble: interval index k in [0, R_j] for a continuous feature (the value
// lies in (t_k, t_{k+1}] with t_0 = -inf and t_{R_j+1} = +inf), the bit for a
// binary feature and the level for a categorical one.
struct CellSignature {
  std::vector<int> index;

  std::size_t size() const { return index.size(); }
  auto operator<=>(const CellSignature&) const = default;
  bool operator==(const CellSignature&) const = default;
};

struct CellSignatureHash {
  std::size_t operator()(const CellSignature& cell) const noexcept;
};

class FeatureSchema {
 public:
  FeatureSchema() = default;

  // `thresholds[j]` must be empty for non-continuous features and strictly
  // increasing and finite for continuous ones.
  FeatureSchema(std::vector<FeatureSpec> features,
                std::vector<std::vector<double>> thresholds);

  std::size_t size() const { return features_.size(); }
  const FeatureSpec& feature(std::size_t j) const { return features_[j]; }
  const std::vector<FeatureSpec>& features() const { return features_; }
  FeatureType type(std::size_t j) const { return features_[j].type; }
  int num_levels(std::size_t j) const { return features_[j].num_levels; }

  std::span<const double> thresholds(std::size_t j) const {
    return thresholds_[j];
  }

  // Position of `value` in the threshold list of feature j, or -1.
  int threshold_index(std::size_t j, double value) const;

  // Number of distinct cell indices along feature j.
  int cell_extent(std::size_t j) const;

  std::size_t num_continuous() const;
  std::size_t num_binary() const;
  std::size_t num_categorical() const;

  // Throws InvalidInput when arity or a binary/categorical entry is invalid.
  void validate(const Point& x) const;
  void validate(const CellSignature& cell) const;

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<FeatureSpec> features_;
  std::vector<std::vector<double>> thresholds_;
};

enum class SplitKind { Threshold, Binary, Category };

struct Node {
  int id = 0;
  bool is_leaf = true;

  // Split nodes. Threshold: left iff x <= threshold. Binary: left iff x == 0.
  // Category: right iff x == category.
  SplitKind split = SplitKind::Threshold;
  int feature = -1;
  double threshold = 0.0;
  int threshold_index = -1;  // filled in by Ensemble
  int category = -1;
  int left = -1;  // positions in Tree::nodes()
  int right = -1;

  int depth = 0;  // filled in by Tree

  std::vector<double> scores;  // leaves only, one per class

  static Node leaf(int id, std::vector<double> scores);
  static Node threshold_split(int id, int feature, double threshold, int left,
                              int right);
  static Node binary_split(int id, int feature, int left, int right);
  static Node category_split(int id, int feature, int category, int left,
                             int right);

  bool goes_left(double value) const;
};

class Tree {
 public:
  Tree() = default;

  // Children are positions in `nodes`. Checks that every split has two
  // children, that the nodes form a tree rooted at `root` and computes depths.
  Tree(std::vector<Node> nodes, int root);

  int root() const { return root_; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  const std::vector<Node>& nodes() const { return nodes_; }
  int max_depth() const { return max_depth_; }
  std::size_t num_leaves() const;

  // Position of the leaf reached by x.
  int leaf_index(const Point& x) const;

 private:
  friend class Ensemble;

  std::vector<Node> nodes_;
  int root_ = 0;
  int max_depth_ = 0;
};

// Weighted additive ensemble of classification trees. Immutable after
// construction.
class Ensemble {
 public:
  // Derives the per-feature threshold lists from the union of the split
  // thresholds and validates every invariant. Throws ModelFormatError.
  Ensemble(std::vector<FeatureSpec> features, std::vector<Tree> trees,
           std::vector<double> weights, int num_classes);

  const FeatureSchema& schema() const { return schema_; }
  const std::vector<Tree>& trees() const { return trees_; }
  const Tree& tree(std::size_t m) const { return trees_[m]; }
  std::size_t size() const { return trees_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  int num_classes() const { return num_classes_; }

  // Same trees, new weights.
  Ensemble with_weights(std::vector<double> weights) const;

  // Score vector of tree m at x.
  std::span<const double> tree_scores(std::size_t m, const Point& x) const;

  std::vector<double> predict_scores(std::span<const double> weights,
                                     const Point& x) const;
  int predict_class(std::span<const double> weights, const Point& x) const;

  std::vector<double> predict_scores(const Point& x) const {
    return predict_scores(weights_, x);
  }
  int predict_class(const Point& x) const { return predict_class(weights_, x); }

 private:
  void check_weights(std::span<const double> weights) const;

  FeatureSchema schema_;
  std::vector<Tree> trees_;
  std::vector<double> weights_;
  int num_classes_ = 0;
};

// Index of the largest entry; ties go to the smallest index.
int argmax(std::span<const double> scores);

CellSignature cell_of(const FeatureSchema& schema, const Point& x);

// Representative point of a cell: interval midpoints, or one unit beyond the
// extreme threshold for unbounded intervals. cell_of(cell_center(c)) == c.
Point cell_center(const FeatureSchema& schema, const CellSignature& cell);

}  // namespace fipe
