#include "fipe/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fipe/error.hpp"

namespace fipe {

using solver::MilpProblem;
using solver::Relation;
using solver::Sense;
using solver::SolveStatus;
using solver::Term;

bool PruneSet::add(const Ensemble& ensemble, const Point& x) {
  CellSignature cell = cell_of(ensemble.schema(), x);
  if (cells_.contains(cell)) return false;
  const int label = ensemble.predict_class(x);
  cells_.insert(cell);
  entries_.push_back({x, std::move(cell), label});
  return true;
}

void PruneSet::validate(const Ensemble& ensemble) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (ensemble.predict_class(entries_[i].point) != entries_[i].label) {
      throw InternalError("prune set entry " + std::to_string(i) +
                          " has a stale label");
    }
  }
}

double MarginRow::dot(std::span<const double> w) const {
  double s = 0.0;
  for (std::size_t m = 0; m < coef.size(); ++m) s += w[m] * coef[m];
  return s;
}

MarginTable build_margins(const Ensemble& ensemble, const PruneSet& prune_set) {
  MarginTable table;
  table.num_trees = ensemble.size();
  const int num_classes = ensemble.num_classes();
  for (std::size_t i = 0; i < prune_set.size(); ++i) {
    const PruneEntry& e = prune_set[i];
    std::vector<std::vector<double>> per_class(
        num_classes, std::vector<double>(ensemble.size()));
    for (std::size_t m = 0; m < ensemble.size(); ++m) {
      auto h = ensemble.tree_scores(m, e.point);
      for (int c = 0; c < num_classes; ++c) {
        per_class[c][m] = h[e.label] - h[c];
      }
    }
    for (int c = 0; c < num_classes; ++c) {
      if (c == e.label) continue;
      table.rows.push_back({i, c, std::move(per_class[c])});
    }
  }
  return table;
}

double min_original_margin(const Ensemble& ensemble, const MarginTable& table,
                           std::size_t* row) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double v = table.rows[r].dot(ensemble.weights());
    if (v < best) {
      best = v;
      if (row) *row = r;
    }
  }
  return best;
}

double compute_big_w(const Ensemble& ensemble, const MarginTable& table,
                     const PruneOptions& options) {
  const auto& alpha = ensemble.weights();
  const double max_alpha = *std::max_element(alpha.begin(), alpha.end());
  if (table.rows.empty()) return 10.0 * max_alpha;
  std::size_t row = 0;
  const double delta = min_original_margin(ensemble, table, &row);
  if (delta <= options.tie_tol) {
    const MarginRow& r = table.rows[row];
    std::ostringstream os;
    os << "original prediction tied on pruning point " << r.entry
       << " (class " << r.cls << ", margin " << delta << ")";
    throw TiedPrediction(r.entry, os.str());
  }
  return 10.0 * max_alpha / delta;
}

std::vector<int> active_trees(std::span<const double> weights, double zero_tol) {
  std::vector<int> active;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    if (weights[m] > zero_tol) active.push_back(static_cast<int>(m));
  }
  return active;
}

namespace {

void add_margin_rows(MilpProblem& p, const MarginTable& table) {
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const MarginRow& row = table.rows[r];
    std::vector<Term> terms;
    for (std::size_t m = 0; m < row.coef.size(); ++m) {
      if (row.coef[m] != 0.0) terms.push_back({static_cast<int>(m), row.coef[m]});
    }
    p.add_constraint("margin_" + std::to_string(row.entry) + "_" +
                         std::to_string(row.cls),
                     std::move(terms), Relation::GreaterEqual, 1.0);
  }
}

[[noreturn]] void report_failure(const solver::MilpSolution& s,
                                 const char* model) {
  if (s.status == SolveStatus::Infeasible) {
    throw InfeasiblePruning(
        "no faithful reweighting exists on the pruning set");
  }
  throw SolverFailure(std::string(model) + " solve ended with status " +
                      solver::to_string(s.status));
}

PruneResult finish(std::vector<double> weights, const PruneOptions& options) {
  PruneResult r;
  for (double& w : weights) {
    if (w <= options.zero_tol) w = 0.0;
  }
  r.active = active_trees(weights, options.zero_tol);
  r.weights = std::move(weights);
  return r;
}

}  // namespace

PruneResult prune_l0(const Ensemble&, const MarginTable& table, double big_w,
                     const PruneOptions& options,
                     const solver::MilpSolver& solver) {
  const int num_trees = static_cast<int>(table.num_trees);
  long iterations = 0;
  long nodes = 0;
  for (int doubling = 0; doubling <= options.max_big_w_doublings; ++doubling) {
    MilpProblem p;
    for (int m = 0; m < num_trees; ++m) {
      p.add_variable("w" + std::to_string(m), 0.0, solver::kInf);
    }
    std::vector<Term> objective;
    for (int m = 0; m < num_trees; ++m) {
      objective.push_back({p.add_binary("u" + std::to_string(m)), 1.0});
    }
    add_margin_rows(p, table);
    for (int m = 0; m < num_trees; ++m) {
      p.add_constraint("active_" + std::to_string(m),
                       {{m, 1.0}, {num_trees + m, -big_w}}, Relation::LessEqual,
                       0.0);
    }
    p.set_objective(Sense::Minimize, std::move(objective));

    const auto s = solver.solve(p);
    iterations += s.iterations;
    nodes += s.nodes;
    if (!s.optimal()) report_failure(s, "l0 pruning");

    std::vector<double> w(s.values.begin(), s.values.begin() + num_trees);
    const bool at_bound = std::any_of(w.begin(), w.end(), [&](double v) {
      return v >= big_w * (1.0 - 1e-6);
    });
    if (at_bound) {
      big_w *= 2.0;
      continue;
    }
    PruneResult r = finish(std::move(w), options);
    r.objective = s.objective;
    r.big_w = big_w;
    r.big_w_doublings = doubling;
    r.solver_iterations = iterations;
    r.solver_nodes = nodes;
    return r;
  }
  throw SolverFailure("l0 pruning: weights keep reaching the big-W bound");
}

PruneResult prune_l1(const Ensemble&, const MarginTable& table,
                     const PruneOptions& options,
                     const solver::MilpSolver& solver) {
  const int num_trees = static_cast<int>(table.num_trees);
  MilpProblem p;
  std::vector<Term> objective;
  for (int m = 0; m < num_trees; ++m) {
    objective.push_back(
        {p.add_variable("w" + std::to_string(m), 0.0, solver::kInf), 1.0});
  }
  add_margin_rows(p, table);
  p.set_objective(Sense::Minimize, std::move(objective));

  const auto s = solver.solve(p);
  if (!s.optimal()) report_failure(s, "l1 pruning");
  PruneResult r = finish(s.values, options);
  r.objective = s.objective;
  r.solver_iterations = s.iterations;
  r.solver_nodes = s.nodes;
  return r;
}

PruneResult prune_l0(const Ensemble& ensemble, const PruneSet& prune_set,
                     const PruneOptions& options,
                     const solver::MilpSolver& solver) {
  const MarginTable table = build_margins(ensemble, prune_set);
  return prune_l0(ensemble, table, compute_big_w(ensemble, table, options),
                  options, solver);
}

PruneResult prune_l1(const Ensemble& ensemble, const PruneSet& prune_set,
                     const PruneOptions& options,
                     const solver::MilpSolver& solver) {
  const MarginTable table = build_margins(ensemble, prune_set);
  return prune_l1(ensemble, table, options, solver);
}

}  // namespace fipe
