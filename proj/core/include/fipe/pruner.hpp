#pragma once

#include <span>
#include <unordered_set>
#include <vector>

#include "fipe/ensemble.hpp"
#include "fipe/solver.hpp"

namespace fipe {

// A point of the pruning set together with the class the original ensemble
// assigns to it.
struct PruneEntry {
  Point point;
  CellSignature cell;
  int label = 0;
};

// Finite set of points on which a pruned ensemble must agree with the
// original one. At most one entry per cell, since points of one cell yield
// identical margin rows.
class PruneSet {
 public:
  PruneSet() = default;

  // Labels x with the original ensemble. Returns false when x's cell is
  // already present.
  bool add(const Ensemble& ensemble, const Point& x);

  bool contains(const CellSignature& cell) const {
    return cells_.contains(cell);
  }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const PruneEntry& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<PruneEntry>& entries() const { return entries_; }

  // Throws InternalError if a stored label no longer matches the ensemble.
  void validate(const Ensemble& ensemble) const;

 private:
  std::vector<PruneEntry> entries_;
  std::unordered_set<CellSignature, CellSignatureHash> cells_;
};

// One row per (entry i, class c != label_i):
//   coef[m] = h_m^{label_i}(x_i) - h_m^{c}(x_i), in [-1, 1].
// A weight vector is faithful on the prune set iff sum_m w_m coef[m] >= 1 for
// every row (after rescaling).
struct MarginRow {
  std::size_t entry = 0;
  int cls = 0;
  std::vector<double> coef;

  double dot(std::span<const double> w) const;
};

struct MarginTable {
  std::size_t num_trees = 0;
  std::vector<MarginRow> rows;
};

MarginTable build_margins(const Ensemble& ensemble, const PruneSet& prune_set);

struct PruneOptions {
  double zero_tol = 1e-9;  // weights at or below count as pruned
  double tie_tol = 1e-9;   // original margins at or below count as ties
  int max_big_w_doublings = 40;
};

// Smallest original weighted margin over all rows; its row is reported via
// `row` when non-null.
double min_original_margin(const Ensemble& ensemble, const MarginTable& table,
                           std::size_t* row = nullptr);

// W = 10 * max(alpha) / delta_min, which keeps alpha / delta_min feasible.
// Throws TiedPrediction when delta_min <= tie_tol.
double compute_big_w(const Ensemble& ensemble, const MarginTable& table,
                     const PruneOptions& options = {});

struct PruneResult {
  std::vector<double> weights;
  std::vector<int> active;  // trees with weight > zero_tol
  double objective = 0.0;   // solver objective (count for l0, sum for l1)
  double big_w = 0.0;       // l0 only
  int big_w_doublings = 0;  // l0 only
  long solver_iterations = 0;
  long solver_nodes = 0;

  std::size_t support() const { return active.size(); }
};

// Minimum number of active trees (exact MIP). If a weight reaches the big-W
// bound, W is doubled and the problem re-solved. Throws InfeasiblePruning.
PruneResult prune_l0(const Ensemble& ensemble, const MarginTable& table,
                     double big_w, const PruneOptions& options = {},
                     const solver::MilpSolver& solver = solver::default_solver());

// Minimum total weight (LP). Throws InfeasiblePruning.
PruneResult prune_l1(const Ensemble& ensemble, const MarginTable& table,
                     const PruneOptions& options = {},
                     const solver::MilpSolver& solver = solver::default_solver());

// Builds margins and big-W from the prune set.
PruneResult prune_l0(const Ensemble& ensemble, const PruneSet& prune_set,
                     const PruneOptions& options = {},
                     const solver::MilpSolver& solver = solver::default_solver());
PruneResult prune_l1(const Ensemble& ensemble, const PruneSet& prune_set,
                     const PruneOptions& options = {},
                     const solver::MilpSolver& solver = solver::default_solver());

std::vector<int> active_trees(std::span<const double> weights,
                              double zero_tol = 1e-9);

}  // namespace fipe
