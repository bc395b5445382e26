#pragma once

// Hand-built and randomly generated ensembles shared by the test suites.

#include <random>
#include <string>
#include <vector>

#include "fipe/ensemble.hpp"

namespace test {

inline std::vector<double> one_hot(int c, int num_classes) {
  std::vector<double> s(num_classes, 0.0);
  s[c] = 1.0;
  return s;
}

inline fipe::Tree stump(int feature, double threshold, int left_class,
                        int right_class, int num_classes) {
  using fipe::Node;
  return fipe::Tree({Node::threshold_split(0, feature, threshold, 1, 2),
                     Node::leaf(1, one_hot(left_class, num_classes)),
                     Node::leaf(2, one_hot(right_class, num_classes))},
                    0);
}

inline std::vector<fipe::FeatureSpec> continuous_features(int p) {
  std::vector<fipe::FeatureSpec> f;
  for (int j = 0; j < p; ++j) f.push_back({"x" + std::to_string(j)});
  return f;
}

// Three equal-weight stumps on one feature; the middle one alone reproduces
// the majority vote everywhere, the outer two are superfluous.
inline fipe::Ensemble three_stumps() {
  std::vector<fipe::Tree> trees = {stump(0, 0.3, 0, 1, 2), stump(0, 0.5, 0, 1, 2),
                                   stump(0, 0.7, 0, 1, 2)};
  return fipe::Ensemble(continuous_features(1), std::move(trees), {1, 1, 1}, 2);
}

// Random stump ensemble: thresholds drawn from a per-feature grid so trees
// share thresholds, hard-voting leaves and positive random weights.
inline fipe::Ensemble random_stumps(std::mt19937_64& rng, int num_trees,
                                    int num_features, int grid,
                                    int num_classes) {
  std::vector<fipe::Tree> trees;
  std::vector<double> weights;
  std::uniform_real_distribution<double> w(0.2, 2.0);
  for (int m = 0; m < num_trees; ++m) {
    const int j = static_cast<int>(rng() % num_features);
    const double t = static_cast<double>(1 + rng() % grid) / (grid + 1);
    const int a = static_cast<int>(rng() % num_classes);
    int b = static_cast<int>(rng() % num_classes);
    if (b == a) b = (a + 1) % num_classes;
    trees.push_back(stump(j, t, a, b, num_classes));
    weights.push_back(w(rng));
  }
  return fipe::Ensemble(continuous_features(num_features), std::move(trees),
                        std::move(weights), num_classes);
}

// Random depth-2 trees over continuous, binary and categorical features.
inline fipe::Ensemble random_mixed(std::mt19937_64& rng, int num_trees,
                                   int num_classes) {
  using fipe::FeatureType;
  using fipe::Node;
  std::vector<fipe::FeatureSpec> features = {
      {"a", FeatureType::Continuous},
      {"b", FeatureType::Continuous},
      {"flag", FeatureType::Binary},
      {"color", FeatureType::Categorical, 3}};
  auto split = [&](int id, int left, int right) {
    const int j = static_cast<int>(rng() % 4);
    if (j < 2) {
      return Node::threshold_split(id, j, 0.25 * (1 + rng() % 3), left, right);
    }
    if (j == 2) return Node::binary_split(id, j, left, right);
    return Node::category_split(id, j, static_cast<int>(rng() % 3), left, right);
  };
  auto leaf = [&](int id) {
    return Node::leaf(id, one_hot(static_cast<int>(rng() % num_classes),
                                  num_classes));
  };
  std::vector<fipe::Tree> trees;
  std::vector<double> weights;
  std::uniform_real_distribution<double> w(0.2, 2.0);
  for (int m = 0; m < num_trees; ++m) {
    std::vector<Node> nodes = {split(0, 1, 2), split(1, 3, 4), leaf(2),
                               leaf(3), leaf(4)};
    trees.emplace_back(std::move(nodes), 0);
    weights.push_back(w(rng));
  }
  return fipe::Ensemble(features, std::move(trees), std::move(weights),
                        num_classes);
}

inline fipe::Point random_point(std::mt19937_64& rng,
                                const fipe::FeatureSchema& schema) {
  fipe::Point x;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    switch (schema.type(j)) {
      case fipe::FeatureType::Continuous:
        x.values.push_back(std::uniform_real_distribution<double>(-0.5, 1.5)(rng));
        break;
      case fipe::FeatureType::Binary:
        x.values.push_back(static_cast<double>(rng() % 2));
        break;
      case fipe::FeatureType::Categorical:
        x.values.push_back(static_cast<double>(rng() % schema.num_levels(j)));
        break;
    }
  }
  return x;
}

}  // namespace test
