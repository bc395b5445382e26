#pragma once

#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fipe::solver {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { Minimize, Maximize };
enum class Relation { LessEqual, GreaterEqual, Equal };

struct Term {
  int var;
  double coef;
};

struct Variable {
  std::string name;
  double lower = 0.0;
  double upper = kInf;
  bool is_binary = false;
  // Branch and bound branches on the highest priority class that still has
  // a fractional binary.
  int branch_priority = 0;
};

struct Constraint {
  std::string name;
  std::vector<Term> terms;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
};

// Bounded-variable linear program with optional binary variables. Lower
// bounds must be finite; upper bounds may be +inf.
class MilpProblem {
 public:
  int add_variable(std::string name, double lower, double upper,
                   bool is_binary = false);
  int add_binary(std::string name) {
    return add_variable(std::move(name), 0.0, 1.0, true);
  }
  int add_constraint(std::string name, std::vector<Term> terms,
                     Relation relation, double rhs);
  void set_objective(Sense sense, std::vector<Term> terms);
  void set_bounds(int var, double lower, double upper);
  void set_branch_priority(int var, int priority);

  std::size_t num_variables() const { return variables_.size(); }
  std::size_t num_constraints() const { return constraints_.size(); }
  std::size_t num_binaries() const;
  const Variable& variable(std::size_t j) const { return variables_[j]; }
  const std::vector<Variable>& variables() const { return variables_; }
  const Constraint& constraint(std::size_t i) const { return constraints_[i]; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  Sense sense() const { return sense_; }
  const std::vector<Term>& objective() const { return objective_; }

  // Throws InvalidInput on inconsistent bounds, non-finite coefficients or
  // out-of-range variable references.
  void validate() const;

  double objective_value(std::span<const double> x) const;
  // Largest amount by which x violates a row or a bound.
  double max_violation(std::span<const double> x) const;

  // CPLEX LP text format, for cross-checking with external solvers.
  std::string to_lp() const;

 private:
  std::vector<Variable> variables_;
  std::vector<Constraint> constraints_;
  std::vector<Term> objective_;
  Sense sense_ = Sense::Minimize;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(SolveStatus status);

struct MilpSolution {
  SolveStatus status = SolveStatus::Infeasible;
  std::vector<double> values;
  double objective = 0.0;
  // LP solves only: sensitivity of the objective to each row's rhs.
  std::vector<double> duals;
  long iterations = 0;  // simplex pivots and bound flips, all nodes
  long nodes = 0;       // branch-and-bound nodes explored

  bool optimal() const { return status == SolveStatus::Optimal; }
};

struct SolverOptions {
  double feasibility_tol = 1e-7;
  double optimality_tol = 1e-9;
  double integrality_tol = 1e-6;
  double absolute_gap = 1e-9;
  double pivot_tol = 1e-9;
  long max_iterations = 1'000'000;  // per LP solve
  long max_nodes = 2'000'000;
  // Consecutive degenerate pivots before switching to Bland's rule.
  int stall_threshold = 50;
};

// Solves the continuous relaxation (binaries relaxed to [0, 1]).
MilpSolution solve_lp(const MilpProblem& problem,
                      const SolverOptions& options = {});

// Best-bound branch and bound over the binary variables.
MilpSolution solve_mip(const MilpProblem& problem,
                       const SolverOptions& options = {});

// Pluggable solver contract; an external engine can implement this.
class MilpSolver {
 public:
  virtual ~MilpSolver() = default;
  virtual MilpSolution solve(const MilpProblem& problem) const = 0;
  virtual std::string name() const = 0;
};

class ReferenceSolver final : public MilpSolver {
 public:
  explicit ReferenceSolver(SolverOptions options = {}) : options_(options) {}

  MilpSolution solve(const MilpProblem& problem) const override;
  std::string name() const override { return "reference-bnb"; }
  const SolverOptions& options() const { return options_; }

 private:
  SolverOptions options_;
};

const MilpSolver& default_solver();

}  // namespace fipe::solver
