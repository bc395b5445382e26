#pragma once

// Small self-contained learners producing ensembles to prune, and the
// synthetic datasets they are trained on.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fipe/ensemble.hpp"

namespace fipe {

struct Dataset {
  std::vector<FeatureSpec> features;
  std::vector<Point> rows;
  std::vector<int> labels;  // empty when the file had no label column

  std::size_t size() const { return rows.size(); }
  bool labeled() const { return !labels.empty(); }
  int num_classes() const;  // max label + 1

  // Arity, value domains and non-negative labels. Throws InvalidInput.
  void validate() const;
};

// CSV with a header row. A final column named `label` holds integer classes.
// Without a schema every column is read as continuous; with one, the column
// count and names must match it.
Dataset read_csv(std::istream& in, const std::vector<FeatureSpec>* schema = nullptr);
Dataset load_csv(const std::filesystem::path& path,
                 const std::vector<FeatureSpec>* schema = nullptr);
void write_csv(std::ostream& out, const Dataset& data);
void save_csv(const Dataset& data, const std::filesystem::path& path);

// alpha = ln((1 - err) / err) + ln(C - 1) with err clamped to
// [1e-10, 1 - 1e-10].
double samme_weight(double err, int num_classes);

// Weighted Gini tree with midpoint thresholds. `max_features` features are
// drawn per node (all of them when >= p).
Tree grow_tree(const Dataset& data, std::span<const double> sample_weights,
               int max_depth, int max_features, int num_classes,
               std::mt19937_64& rng);

// Multiplicities of a bootstrap resample of n rows.
std::vector<double> bootstrap_counts(std::size_t n, std::mt19937_64& rng);

// Multi-class AdaBoost (SAMME). Learners worse than chance get weight 0.
Ensemble train_adaboost(const Dataset& data, int num_trees, int max_depth,
                        std::uint64_t seed);

// Bootstrap forest, ceil(sqrt(p)) features per node, unit weights.
Ensemble train_random_forest(const Dataset& data, int num_trees, int max_depth,
                             std::uint64_t seed);

enum class SyntheticKind { Blobs, Xor, Separable };

SyntheticKind parse_synthetic_kind(const std::string& name);

// blobs: three Gaussian clusters (sd 0.8) centered at (0, 0), (2.5, 0) and
//   (1.25, 2.2), classes 0..2, round robin.
// xor: the corners of the unit square, label = x0 xor x1; rows past the
//   first four get N(0, 0.15) jitter.
// separable: uniform on [0, 1]^2, label = [x0 + x1 > 1], points within 0.05
//   of the boundary resampled.
Dataset make_synthetic(SyntheticKind kind, std::size_t n, std::uint64_t seed);

}  // namespace fipe
