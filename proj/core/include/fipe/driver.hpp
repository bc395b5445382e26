#pragma once

// The prune / separate loop and the metrics reported for its output.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fipe/ensemble.hpp"
#include "fipe/oracle.hpp"
#include "fipe/pruner.hpp"
#include "fipe/solver.hpp"

namespace fipe {

enum class Norm { L0, L1 };

const char* to_string(Norm norm);
Norm parse_norm(const std::string& text);  // "l0" / "l1", else InvalidInput

struct FipeOptions {
  Norm norm = Norm::L0;
  double epsilon = 1e-6;
  double violation_tol = 1e-8;
  int max_iterations = 1000;
  std::uint64_t seed = 0;
  // Keep only this many initial points, drawn with `seed`.
  std::optional<std::size_t> subsample;
  // Initial points whose original margin is below epsilon lie outside the
  // certified region; by default they are dropped instead of aborting the
  // pruner on a tie.
  bool drop_sub_epsilon_points = true;
  solver::SolverOptions solver;
  PruneOptions prune;
  bool parallel = true;
  std::string dump_prefix;  // forwarded to the oracle
  // One JSON object per line and iteration when non-null.
  std::ostream* run_log = nullptr;
};

struct IterationRecord {
  std::size_t prune_set_size = 0;  // before the points of this iteration
  double pruner_objective = 0.0;
  std::size_t support = 0;
  std::vector<double> pair_objectives;  // y-major, c-minor; NaN if infeasible
  std::vector<CellSignature> added;
  double prune_seconds = 0.0;
  double oracle_seconds = 0.0;
};

struct FipeOutcome {
  std::vector<double> weights;
  std::vector<int> active;
  int iterations = 0;
  std::size_t n_oracle = 0;  // pair MIPs solved
  std::size_t dropped_points = 0;
  std::vector<IterationRecord> history;
  PruneSet prune_set;  // final
  double prune_seconds = 0.0;
  double oracle_seconds = 0.0;
  double total_seconds = 0.0;

  std::size_t support() const { return active.size(); }
};

FipeOutcome fipe(const Ensemble& ensemble, std::span<const Point> initial_points,
                 const FipeOptions& options = {});

// Fraction of points on which `weights` and the ensemble's own weights
// predict the same class.
double fidelity(const Ensemble& ensemble, std::span<const double> weights,
                std::span<const Point> points);

double accuracy(const Ensemble& ensemble, std::span<const double> weights,
                std::span<const Point> points, std::span<const int> labels);

}  // namespace fipe
