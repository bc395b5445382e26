#include "fipe/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include <json.hpp>

#include "fipe/error.hpp"
#include "fipe/verifier.hpp"

namespace fipe {

const char* to_string(Norm norm) { return norm == Norm::L0 ? "l0" : "l1"; }

Norm parse_norm(const std::string& text) {
  if (text == "l0") return Norm::L0;
  if (text == "l1") return Norm::L1;
  throw InvalidInput("unknown norm '" + text + "' (expected l0 or l1)");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_options(const FipeOptions& o) {
  if (!(o.epsilon > 0)) throw InvalidInput("epsilon must be positive");
  if (!(o.violation_tol >= 0)) {
    throw InvalidInput("violation_tol must be non-negative");
  }
  if (o.max_iterations < 1) throw InvalidInput("max_iterations must be >= 1");
  if (o.subsample && *o.subsample == 0) {
    throw InvalidInput("subsample size must be positive");
  }
}

std::vector<Point> pick_initial(std::span<const Point> points,
                                const FipeOptions& o) {
  std::vector<Point> out(points.begin(), points.end());
  if (o.subsample && *o.subsample < out.size()) {
    std::mt19937_64 rng(o.seed);
    std::vector<Point> picked;
    std::sample(out.begin(), out.end(), std::back_inserter(picked),
                *o.subsample, rng);
    out = std::move(picked);
  }
  return out;
}

PruneResult run_pruner(const Ensemble& ensemble, const PruneSet& prune_set,
                       const FipeOptions& o, const solver::MilpSolver& engine) {
  const MarginTable table = build_margins(ensemble, prune_set);
  if (o.norm == Norm::L0) {
    return prune_l0(ensemble, table, compute_big_w(ensemble, table, o.prune),
                    o.prune, engine);
  }
  // Same tie check as for l0, so that both norms refuse the same inputs.
  compute_big_w(ensemble, table, o.prune);
  return prune_l1(ensemble, table, o.prune, engine);
}

void log_iteration(std::ostream& out, int iteration, const IterationRecord& r) {
  nlohmann::json j;
  j["iteration"] = iteration;
  j["prune_set_size"] = r.prune_set_size;
  j["pruner_objective"] = r.pruner_objective;
  j["support"] = r.support;
  auto pairs = nlohmann::json::array();
  for (double v : r.pair_objectives) {
    pairs.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  }
  j["pair_objectives"] = std::move(pairs);
  auto added = nlohmann::json::array();
  for (const auto& cell : r.added) added.push_back(cell.index);
  j["added"] = std::move(added);
  j["prune_seconds"] = r.prune_seconds;
  j["oracle_seconds"] = r.oracle_seconds;
  out << j.dump() << '\n';
}

}  // namespace

FipeOutcome fipe(const Ensemble& ensemble, std::span<const Point> initial_points,
                 const FipeOptions& options) {
  check_options(options);
  if (initial_points.empty()) throw InvalidInput("no initial points");
  const auto start = Clock::now();

  FipeOutcome outcome;
  for (const Point& x : pick_initial(initial_points, options)) {
    ensemble.schema().validate(x);
    if (options.drop_sub_epsilon_points &&
        prediction_margin(ensemble.predict_scores(x)) < options.epsilon) {
      ++outcome.dropped_points;
      continue;
    }
    outcome.prune_set.add(ensemble, x);
  }
  if (outcome.prune_set.empty()) {
    throw InvalidInput("every initial point has an original margin below epsilon");
  }

  const solver::ReferenceSolver engine(options.solver);
  SeparationOptions sep;
  sep.epsilon = options.epsilon;
  sep.violation_tol = options.violation_tol;
  sep.parallel = options.parallel;
  sep.solver = &engine;
  sep.dump_prefix = options.dump_prefix;

  PruneSet& prune_set = outcome.prune_set;
  for (int it = 0; it < options.max_iterations; ++it) {
    IterationRecord record;
    record.prune_set_size = prune_set.size();

    auto t0 = Clock::now();
    const PruneResult pruned = run_pruner(ensemble, prune_set, options, engine);
    record.prune_seconds = seconds_since(t0);
    record.pruner_objective = pruned.objective;
    record.support = pruned.support();

    t0 = Clock::now();
    const SeparationResult found = separate(ensemble, pruned.weights, sep);
    record.oracle_seconds = seconds_since(t0);
    for (const PairSeparation& pair : found.pairs) {
      record.pair_objectives.push_back(
          pair.status == solver::SolveStatus::Optimal
              ? pair.objective
              : std::numeric_limits<double>::quiet_NaN());
    }

    outcome.iterations = it + 1;
    outcome.n_oracle += found.calls();
    outcome.prune_seconds += record.prune_seconds;
    outcome.oracle_seconds += record.oracle_seconds;

    for (const Point& x : found.points()) {
      CellSignature cell = cell_of(ensemble.schema(), x);
      if (prune_set.contains(cell)) {
        throw CycleDetected("iteration " + std::to_string(it + 1) +
                            ": separating point falls in a cell already in "
                            "the pruning set");
      }
      prune_set.add(ensemble, x);
      record.added.push_back(std::move(cell));
    }
    if (options.run_log) log_iteration(*options.run_log, it + 1, record);
    const bool done = record.added.empty();
    outcome.history.push_back(std::move(record));

    if (done) {
      outcome.weights = pruned.weights;
      outcome.active = pruned.active;
      outcome.total_seconds = seconds_since(start);
      return outcome;
    }
  }
  throw IterationLimitExceeded("no certificate after " +
                               std::to_string(options.max_iterations) +
                               " iterations");
}

double fidelity(const Ensemble& ensemble, std::span<const double> weights,
                std::span<const Point> points) {
  if (points.empty()) throw InvalidInput("fidelity needs at least one point");
  std::size_t same = 0;
  for (const Point& x : points) {
    if (ensemble.predict_class(weights, x) == ensemble.predict_class(x)) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(points.size());
}

double accuracy(const Ensemble& ensemble, std::span<const double> weights,
                std::span<const Point> points, std::span<const int> labels) {
  if (points.empty()) throw InvalidInput("accuracy needs at least one point");
  if (points.size() != labels.size()) {
    throw InvalidInput("point and label counts differ");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= ensemble.num_classes()) {
      throw InvalidInput("label " + std::to_string(labels[i]) + " at row " +
                         std::to_string(i) + " is out of range");
    }
    if (ensemble.predict_class(weights, points[i]) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(points.size());
}

}  // namespace fipe
