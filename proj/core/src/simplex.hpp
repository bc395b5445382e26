#pragma once

// Internal dense-tableau simplex used by the reference solver.

#include <span>
#include <vector>

#include "fipe/solver.hpp"

namespace fipe::solver::detail {

// Rows normalized to a.x + s = b with s in [0, inf) for <= rows and s = 0 for
// equality rows; >= rows are negated. The objective is always minimized.
struct StandardForm {
  int num_vars = 0;
  int num_rows = 0;
  std::vector<std::vector<Term>> rows;
  std::vector<double> rhs;
  std::vector<char> equality;
  std::vector<char> negated;
  std::vector<double> cost;
  double sense_sign = 1.0;  // original objective = sense_sign * internal
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> binaries;

  static StandardForm from(const MilpProblem& problem);
};

struct LpResult {
  SolveStatus status = SolveStatus::Infeasible;
  std::vector<double> x;      // structural values
  double objective = 0.0;     // internal (minimized) objective
  std::vector<double> duals;  // per normalized row
  long iterations = 0;
};

// Two-phase bounded-variable primal simplex. `lower`/`upper` override the
// structural bounds of `form` (used by branch and bound).
LpResult solve_standard(const StandardForm& form, std::span<const double> lower,
                        std::span<const double> upper,
                        const SolverOptions& options);

}  // namespace fipe::solver::detail
