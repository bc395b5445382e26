#pragma once

// Brute-force ground truth over the finite cell partition of an ensemble.
// Everything here is independent of the separation MIP.

#include <cstdint>
#include <span>
#include <vector>

#include "fipe/ensemble.hpp"
#include "fipe/pruner.hpp"

namespace fipe {

inline constexpr std::uint64_t kDefaultMaxCells = 200'000;

// Product of the per-feature cell extents, saturating at UINT64_MAX.
std::uint64_t cell_count(const FeatureSchema& schema);

// Enumerates every cell exactly once in mixed-radix order (feature 0 varies
// fastest). Refuses (CapExceeded) schemas with more than max_cells cells.
class CellEnumerator {
 public:
  explicit CellEnumerator(const FeatureSchema& schema,
                          std::uint64_t max_cells = kDefaultMaxCells);

  std::uint64_t size() const { return count_; }
  CellSignature cell(std::uint64_t index) const;

  class iterator {
   public:
    using value_type = CellSignature;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(const CellEnumerator* owner, std::uint64_t index)
        : owner_(owner), index_(index) {}
    CellSignature operator*() const { return owner_->cell(index_); }
    iterator& operator++() {
      ++index_;
      return *this;
    }
    iterator operator++(int) {
      iterator tmp = *this;
      ++index_;
      return tmp;
    }
    bool operator==(const iterator& o) const { return index_ == o.index_; }

   private:
    const CellEnumerator* owner_ = nullptr;
    std::uint64_t index_ = 0;
  };

  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, count_}; }

 private:
  std::vector<int> extent_;
  std::uint64_t count_ = 0;
};

std::vector<CellSignature> enumerate_cells(
    const FeatureSchema& schema, std::uint64_t max_cells = kDefaultMaxCells);

// Score of the predicted class minus the best other score.
double prediction_margin(std::span<const double> scores);

struct CellDisagreement {
  CellSignature cell;
  Point center;
  int original_class = 0;
  int pruned_class = 0;
  double original_margin = 0.0;
};

struct CertificationReport {
  bool identical = true;  // no disagreement at all, sub-epsilon included
  std::uint64_t cells_checked = 0;
  // Disagreeing cells where the original margin is >= epsilon.
  std::vector<CellDisagreement> disagreement_cells;
  // Disagreeing cells the oracle cannot see (original margin < epsilon).
  std::vector<CellDisagreement> sub_epsilon_cells;
  // Agreeing or not, cells where the pruned top scores tie exactly, so only
  // the tie-break decides the pruned class.
  std::vector<CellSignature> pruned_tie_cells;
};

// Compares the classes of the center of every cell under `weights` and under
// the ensemble's own weights. `threads` = 0 picks the hardware concurrency.
CertificationReport certify(const Ensemble& ensemble,
                            std::span<const double> weights, double epsilon,
                            std::uint64_t max_cells = kDefaultMaxCells,
                            unsigned threads = 0);

// Exhaustive optimum of the separation problem for one class pair: maximize
// sum_m w_m (h_m^c - h_m^y) over cells whose original margin for y is >=
// epsilon against every other class.
struct PairMaximum {
  int c = 0;
  int y = 0;
  bool feasible = false;
  double objective = 0.0;
  CellSignature argmax;
};

// All ordered pairs in y-major, c-minor order.
std::vector<PairMaximum> brute_force_separation(
    const Ensemble& ensemble, std::span<const double> weights, double epsilon,
    std::uint64_t max_cells = kDefaultMaxCells);

// Smallest k such that some k-subset of trees admits non-negative weights
// with every margin row >= 1, each subset checked by an LP feasibility solve.
// Refuses (CapExceeded) ensembles with more than max_trees trees; throws
// InfeasiblePruning when even the full ensemble is infeasible.
std::size_t brute_force_min_support(const Ensemble& ensemble,
                                    const PruneSet& prune_set,
                                    std::size_t max_trees = 8);

}  // namespace fipe
