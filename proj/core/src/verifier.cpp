#include "fipe/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "fipe/error.hpp"
#include "fipe/solver.hpp"

namespace fipe {

std::uint64_t cell_count(const FeatureSchema& schema) {
  std::uint64_t total = 1;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto k = static_cast<std::uint64_t>(schema.cell_extent(j));
    if (total > std::numeric_limits<std::uint64_t>::max() / k) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    total *= k;
  }
  return total;
}

CellEnumerator::CellEnumerator(const FeatureSchema& schema,
                               std::uint64_t max_cells) {
  count_ = cell_count(schema);
  if (count_ > max_cells) {
    throw CapExceeded("schema has " +
                      (count_ == std::numeric_limits<std::uint64_t>::max()
                           ? std::string("more than 2^64")
                           : std::to_string(count_)) +
                      " cells, above the enumeration cap of " +
                      std::to_string(max_cells));
  }
  for (std::size_t j = 0; j < schema.size(); ++j) {
    extent_.push_back(schema.cell_extent(j));
  }
}

CellSignature CellEnumerator::cell(std::uint64_t index) const {
  CellSignature cell;
  cell.index.resize(extent_.size());
  for (std::size_t j = 0; j < extent_.size(); ++j) {
    const auto k = static_cast<std::uint64_t>(extent_[j]);
    cell.index[j] = static_cast<int>(index % k);
    index /= k;
  }
  return cell;
}

std::vector<CellSignature> enumerate_cells(const FeatureSchema& schema,
                                           std::uint64_t max_cells) {
  CellEnumerator cells(schema, max_cells);
  return {cells.begin(), cells.end()};
}

double prediction_margin(std::span<const double> scores) {
  const int top = argmax(scores);
  double other = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (static_cast<int>(c) != top) other = std::max(other, scores[c]);
  }
  return scores[top] - other;
}

namespace {

bool top_scores_tie(std::span<const double> scores) {
  const int top = argmax(scores);
  const double tol = 1e-12 * std::max(1.0, std::abs(scores[top]));
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (static_cast<int>(c) != top && scores[top] - scores[c] <= tol) return true;
  }
  return false;
}

struct Chunk {
  std::vector<std::pair<std::uint64_t, CellDisagreement>> disagreements;
  std::vector<std::uint64_t> ties;
};

void certify_range(const Ensemble& ensemble, std::span<const double> weights,
                   const CellEnumerator& cells, std::uint64_t begin,
                   std::uint64_t end, Chunk* out) {
  for (std::uint64_t idx = begin; idx < end; ++idx) {
    CellSignature cell = cells.cell(idx);
    Point x = cell_center(ensemble.schema(), cell);
    const auto original = ensemble.predict_scores(x);
    const auto pruned = ensemble.predict_scores(weights, x);
    if (top_scores_tie(pruned)) out->ties.push_back(idx);
    const int a = argmax(original);
    const int b = argmax(pruned);
    if (a == b) continue;
    out->disagreements.push_back(
        {idx, {std::move(cell), std::move(x), a, b, prediction_margin(original)}});
  }
}

}  // namespace

CertificationReport certify(const Ensemble& ensemble,
                            std::span<const double> weights, double epsilon,
                            std::uint64_t max_cells, unsigned threads) {
  if (weights.size() != ensemble.size()) {
    throw InvalidInput("weight vector length does not match the ensemble");
  }
  CellEnumerator cells(ensemble.schema(), max_cells);
  const std::uint64_t total = cells.size();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(
      std::min<std::uint64_t>(threads, std::max<std::uint64_t>(1, total / 1024)));

  std::vector<Chunk> chunks(threads);
  if (threads == 1) {
    certify_range(ensemble, weights, cells, 0, total, &chunks[0]);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      const std::uint64_t begin = total * t / threads;
      const std::uint64_t end = total * (t + 1) / threads;
      pool.emplace_back(certify_range, std::cref(ensemble), weights,
                        std::cref(cells), begin, end, &chunks[t]);
    }
  }

  // Chunks cover increasing index ranges, so concatenation keeps cell order.
  CertificationReport report;
  report.cells_checked = total;
  for (Chunk& chunk : chunks) {
    for (auto& [idx, d] : chunk.disagreements) {
      (void)idx;
      if (d.original_margin >= epsilon) {
        report.disagreement_cells.push_back(std::move(d));
      } else {
        report.sub_epsilon_cells.push_back(std::move(d));
      }
    }
    for (std::uint64_t idx : chunk.ties) {
      report.pruned_tie_cells.push_back(cells.cell(idx));
    }
  }
  report.identical =
      report.disagreement_cells.empty() && report.sub_epsilon_cells.empty();
  return report;
}

std::vector<PairMaximum> brute_force_separation(const Ensemble& ensemble,
                                                std::span<const double> weights,
                                                double epsilon,
                                                std::uint64_t max_cells) {
  const int num_classes = ensemble.num_classes();
  std::vector<PairMaximum> out;
  for (int y = 0; y < num_classes; ++y) {
    for (int c = 0; c < num_classes; ++c) {
      if (c != y) out.push_back({c, y, false, 0.0, {}});
    }
  }
  CellEnumerator cells(ensemble.schema(), max_cells);
  for (std::uint64_t idx = 0; idx < cells.size(); ++idx) {
    const CellSignature cell = cells.cell(idx);
    const Point x = cell_center(ensemble.schema(), cell);
    const auto original = ensemble.predict_scores(x);
    const auto pruned = ensemble.predict_scores(weights, x);
    for (PairMaximum& pair : out) {
      bool ok = true;
      for (int other = 0; other < num_classes && ok; ++other) {
        if (other != pair.y && original[pair.y] - original[other] < epsilon) {
          ok = false;
        }
      }
      if (!ok) continue;
      const double gap = pruned[pair.c] - pruned[pair.y];
      if (!pair.feasible || gap > pair.objective) {
        pair.feasible = true;
        pair.objective = gap;
        pair.argmax = cell;
      }
    }
  }
  return out;
}

namespace {

bool subset_feasible(const MarginTable& table, const std::vector<int>& subset) {
  using solver::Relation;
  solver::MilpProblem p;
  for (int m : subset) p.add_variable("w" + std::to_string(m), 0.0, solver::kInf);
  for (const MarginRow& row : table.rows) {
    std::vector<solver::Term> terms;
    for (std::size_t k = 0; k < subset.size(); ++k) {
      const double g = row.coef[subset[k]];
      if (g != 0.0) terms.push_back({static_cast<int>(k), g});
    }
    if (terms.empty()) return false;  // 0 >= 1
    p.add_constraint("", std::move(terms), Relation::GreaterEqual, 1.0);
  }
  p.set_objective(solver::Sense::Minimize, {});
  const auto s = solver::solve_lp(p);
  if (s.status == solver::SolveStatus::IterationLimit) {
    throw SolverFailure("subset feasibility LP hit the iteration limit");
  }
  return s.optimal();
}

// Advances `subset` to the next k-combination of [0, n); false when done.
bool next_combination(std::vector<int>& subset, int n) {
  const int k = static_cast<int>(subset.size());
  int i = k - 1;
  while (i >= 0 && subset[i] == n - k + i) --i;
  if (i < 0) return false;
  ++subset[i];
  for (int j = i + 1; j < k; ++j) subset[j] = subset[j - 1] + 1;
  return true;
}

}  // namespace

std::size_t brute_force_min_support(const Ensemble& ensemble,
                                    const PruneSet& prune_set,
                                    std::size_t max_trees) {
  if (ensemble.size() > max_trees) {
    throw CapExceeded("subset search refused: " +
                      std::to_string(ensemble.size()) + " trees exceed " +
                      std::to_string(max_trees));
  }
  const MarginTable table = build_margins(ensemble, prune_set);
  if (table.rows.empty()) return 0;
  const int n = static_cast<int>(ensemble.size());
  for (int k = 1; k <= n; ++k) {
    std::vector<int> subset(k);
    for (int i = 0; i < k; ++i) subset[i] = i;
    do {
      if (subset_feasible(table, subset)) return static_cast<std::size_t>(k);
    } while (next_combination(subset, n));
  }
  throw InfeasiblePruning("no subset of trees is faithful on the pruning set");
}

}  // namespace fipe
