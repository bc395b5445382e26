#include "fipe/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "fipe/error.hpp"
#include "simplex.hpp"

namespace fipe::solver {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::Unbounded:
      return "unbounded";
    case SolveStatus::IterationLimit:
      return "iteration-limit";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// MilpProblem

int MilpProblem::add_variable(std::string name, double lower, double upper,
                              bool is_binary) {
  variables_.push_back({std::move(name), lower, upper, is_binary, 0});
  return static_cast<int>(variables_.size()) - 1;
}

int MilpProblem::add_constraint(std::string name, std::vector<Term> terms,
                                Relation relation, double rhs) {
  constraints_.push_back({std::move(name), std::move(terms), relation, rhs});
  return static_cast<int>(constraints_.size()) - 1;
}

void MilpProblem::set_objective(Sense sense, std::vector<Term> terms) {
  sense_ = sense;
  objective_ = std::move(terms);
}

void MilpProblem::set_bounds(int var, double lower, double upper) {
  variables_.at(var).lower = lower;
  variables_.at(var).upper = upper;
}

void MilpProblem::set_branch_priority(int var, int priority) {
  variables_.at(var).branch_priority = priority;
}

std::size_t MilpProblem::num_binaries() const {
  return std::count_if(variables_.begin(), variables_.end(),
                       [](const Variable& v) { return v.is_binary; });
}

void MilpProblem::validate() const {
  const int n = static_cast<int>(variables_.size());
  for (const Variable& v : variables_) {
    if (!std::isfinite(v.lower) || std::isnan(v.upper) || v.lower > v.upper) {
      throw InvalidInput("variable '" + v.name + "' has inconsistent bounds");
    }
    if (v.is_binary && (v.lower < 0.0 || v.upper > 1.0)) {
      throw InvalidInput("binary variable '" + v.name +
                         "' has bounds outside [0, 1]");
    }
  }
  auto check_terms = [n](const std::vector<Term>& terms, const std::string& where) {
    for (const Term& t : terms) {
      if (t.var < 0 || t.var >= n) {
        throw InvalidInput(where + ": unknown variable index");
      }
      if (!std::isfinite(t.coef)) {
        throw InvalidInput(where + ": non-finite coefficient");
      }
    }
  };
  check_terms(objective_, "objective");
  for (const Constraint& c : constraints_) {
    check_terms(c.terms, "constraint '" + c.name + "'");
    if (!std::isfinite(c.rhs)) {
      throw InvalidInput("constraint '" + c.name + "': non-finite rhs");
    }
  }
}

double MilpProblem::objective_value(std::span<const double> x) const {
  double v = 0.0;
  for (const Term& t : objective_) v += t.coef * x[t.var];
  return v;
}

double MilpProblem::max_violation(std::span<const double> x) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < variables_.size(); ++j) {
    worst = std::max(worst, variables_[j].lower - x[j]);
    if (variables_[j].upper < kInf) {
      worst = std::max(worst, x[j] - variables_[j].upper);
    }
  }
  for (const Constraint& c : constraints_) {
    double lhs = 0.0;
    for (const Term& t : c.terms) lhs += t.coef * x[t.var];
    switch (c.relation) {
      case Relation::LessEqual:
        worst = std::max(worst, lhs - c.rhs);
        break;
      case Relation::GreaterEqual:
        worst = std::max(worst, c.rhs - lhs);
        break;
      case Relation::Equal:
        worst = std::max(worst, std::abs(lhs - c.rhs));
        break;
    }
  }
  return worst;
}

namespace {

std::string lp_name(const std::string& name, char prefix, std::size_t index) {
  if (name.empty()) return prefix + std::to_string(index);
  std::string out = name;
  for (char& ch : out) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' ||
          ch == '.')) {
      ch = '_';
    }
  }
  return out;
}

void write_terms(std::ostream& os, const std::vector<Term>& terms,
                 const std::vector<std::string>& names) {
  if (terms.empty()) {
    os << " 0 " << names.front();
    return;
  }
  bool first = true;
  for (const Term& t : terms) {
    os << (t.coef < 0 ? " - " : (first ? " " : " + ")) << std::abs(t.coef)
       << ' ' << names[t.var];
    first = false;
  }
}

}  // namespace

std::string MilpProblem::to_lp() const {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < variables_.size(); ++j) {
    names.push_back(lp_name(variables_[j].name, 'x', j));
  }
  if (names.empty()) names.push_back("x0");
  std::ostringstream os;
  os.precision(17);
  os << (sense_ == Sense::Minimize ? "Minimize" : "Maximize") << "\n obj:";
  write_terms(os, objective_, names);
  os << "\nSubject To\n";
  for (std::size_t i = 0; i < constraints_.size(); ++i) {
    const Constraint& c = constraints_[i];
    os << ' ' << lp_name(c.name, 'c', i) << ':';
    write_terms(os, c.terms, names);
    switch (c.relation) {
      case Relation::LessEqual:
        os << " <= ";
        break;
      case Relation::GreaterEqual:
        os << " >= ";
        break;
      case Relation::Equal:
        os << " = ";
        break;
    }
    os << c.rhs << '\n';
  }
  os << "Bounds\n";
  for (std::size_t j = 0; j < variables_.size(); ++j) {
    const Variable& v = variables_[j];
    os << ' ' << v.lower << " <= " << names[j] << " <= ";
    if (v.upper == kInf) {
      os << "+inf\n";
    } else {
      os << v.upper << '\n';
    }
  }
  bool any_binary = false;
  for (std::size_t j = 0; j < variables_.size(); ++j) {
    if (!variables_[j].is_binary) continue;
    if (!any_binary) os << "Binaries\n";
    any_binary = true;
    os << ' ' << names[j] << '\n';
  }
  os << "End\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// LP

namespace {

MilpSolution to_solution(const detail::StandardForm& form,
                         const detail::LpResult& lp) {
  MilpSolution sol;
  sol.status = lp.status;
  sol.iterations = lp.iterations;
  if (lp.status != SolveStatus::Optimal) return sol;
  sol.values = lp.x;
  sol.objective = form.sense_sign * lp.objective;
  sol.duals.resize(lp.duals.size());
  for (std::size_t i = 0; i < lp.duals.size(); ++i) {
    const double row_sign = form.negated[i] ? -1.0 : 1.0;
    sol.duals[i] = form.sense_sign * row_sign * lp.duals[i];
  }
  return sol;
}

}  // namespace

MilpSolution solve_lp(const MilpProblem& problem, const SolverOptions& options) {
  problem.validate();
  const auto form = detail::StandardForm::from(problem);
  const auto lp = detail::solve_standard(form, form.lower, form.upper, options);
  return to_solution(form, lp);
}

// ---------------------------------------------------------------------------
// Branch and bound

namespace {

struct BranchNode {
  double bound;  // parent LP objective (internal, minimized)
  int depth;
  long sequence;
  std::vector<std::pair<int, double>> fixings;  // binary index, fixed value
};

struct NodeOrder {
  // priority_queue pops the "largest": invert for best-bound first, deeper
  // nodes on ties, then earlier creation.
  bool operator()(const BranchNode& a, const BranchNode& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.sequence > b.sequence;
  }
};

}  // namespace

MilpSolution solve_mip(const MilpProblem& problem, const SolverOptions& options) {
  problem.validate();
  const auto form = detail::StandardForm::from(problem);

  MilpSolution best;
  best.status = SolveStatus::Infeasible;
  double incumbent = kInf;  // internal objective
  long total_iterations = 0;
  long nodes = 0;
  long sequence = 0;
  bool hit_limit = false;
  bool unbounded = false;

  std::priority_queue<BranchNode, std::vector<BranchNode>, NodeOrder> open;
  open.push({-kInf, 0, sequence++, {}});

  std::vector<double> lower(form.lower);
  std::vector<double> upper(form.upper);

  while (!open.empty()) {
    BranchNode node = open.top();
    open.pop();
    if (node.bound >= incumbent - options.absolute_gap) continue;
    if (nodes >= options.max_nodes) {
      hit_limit = true;
      break;
    }
    ++nodes;

    lower = form.lower;
    upper = form.upper;
    for (auto [var, value] : node.fixings) {
      lower[var] = value;
      upper[var] = value;
    }
    const auto lp = detail::solve_standard(form, lower, upper, options);
    total_iterations += lp.iterations;
    if (lp.status == SolveStatus::IterationLimit) {
      hit_limit = true;
      break;
    }
    if (lp.status == SolveStatus::Unbounded) {
      unbounded = true;
      break;
    }
    if (lp.status == SolveStatus::Infeasible) continue;
    if (lp.objective >= incumbent - options.absolute_gap) continue;

    // Most fractional binary, smallest index on ties.
    auto most_fractional = [&](double threshold) {
      int var = -1;
      double best_frac = threshold;
      int best_priority = std::numeric_limits<int>::min();
      for (int j : form.binaries) {
        const double v = lp.x[j];
        const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
        if (frac <= threshold) continue;
        const int prio = problem.variable(j).branch_priority;
        if (prio > best_priority || (prio == best_priority && frac > best_frac)) {
          best_priority = prio;
          best_frac = frac;
          var = j;
        }
      }
      return var;
    };
    int branch_var = most_fractional(options.integrality_tol);
    if (branch_var < 0) {
      // Integral within tolerance. Re-solve with the binaries fixed so that
      // the continuous part is exact for the rounded assignment; tolerance
      // slack in the binaries must not leak into the constraints.
      for (int j : form.binaries) {
        lower[j] = upper[j] = std::round(lp.x[j]);
      }
      const auto exact = detail::solve_standard(form, lower, upper, options);
      total_iterations += exact.iterations;
      if (exact.status == SolveStatus::IterationLimit) {
        hit_limit = true;
        break;
      }
      const bool ok = exact.status == SolveStatus::Optimal;
      if (ok && exact.objective < incumbent - options.absolute_gap) {
        incumbent = exact.objective;
        best.status = SolveStatus::Optimal;
        best.values = exact.x;
      }
      if (ok && exact.objective <= lp.objective + options.absolute_gap) continue;
      // Rounding lost feasibility or objective: keep branching.
      branch_var = most_fractional(0.0);
      if (branch_var < 0) continue;
    }

    const double v = lp.x[branch_var];
    const double first = v >= 0.5 ? 1.0 : 0.0;
    for (double value : {first, 1.0 - first}) {
      BranchNode child{lp.objective, node.depth + 1, sequence++, node.fixings};
      child.fixings.emplace_back(branch_var, value);
      open.push(std::move(child));
    }
  }

  best.iterations = total_iterations;
  best.nodes = nodes;
  if (unbounded) {
    best.status = SolveStatus::Unbounded;
    best.values.clear();
    return best;
  }
  if (hit_limit) {
    best.status = SolveStatus::IterationLimit;
    return best;
  }
  if (best.status == SolveStatus::Optimal) {
    best.objective = problem.objective_value(best.values);
  }
  return best;
}

MilpSolution ReferenceSolver::solve(const MilpProblem& problem) const {
  if (problem.num_binaries() == 0) return solve_lp(problem, options_);
  return solve_mip(problem, options_);
}

const MilpSolver& default_solver() {
  static const ReferenceSolver solver;
  return solver;
}

}  // namespace fipe::solver
