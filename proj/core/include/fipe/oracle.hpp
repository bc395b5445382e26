#pragma once

// Separation oracle: searches the whole feature space for a cell where a
// reweighted ensemble disagrees with the original one.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fipe/ensemble.hpp"
#include "fipe/solver.hpp"

namespace fipe {

// MIP for one ordered class pair (c, y): maximize the pruned score gap of c
// over y subject to the original ensemble predicting y with margin >= epsilon.
// The point is encoded by root-to-leaf flows in every tree, tied to a single
// feature assignment through threshold (mu), binary and category (nu)
// indicators.
struct SeparationProgram {
  solver::MilpProblem problem;
  int c = 0;
  int y = 0;
  std::vector<std::vector<int>> flow;       // [tree][node position]
  std::vector<std::vector<int>> turn;       // lambda [tree][depth]
  std::vector<std::vector<int>> threshold;  // mu [feature][threshold index]
  std::vector<int> binary;                  // [feature], -1 if not binary
  std::vector<std::vector<int>> category;   // nu [feature][level]
  std::vector<int> epsilon_rows;            // one per class y' != y
};

SeparationProgram build_separation(const Ensemble& ensemble,
                                   std::span<const double> weights, int c,
                                   int y, double epsilon);

// Reads the cell encoded by the threshold/binary/category indicators and
// returns its center. Throws InternalError if the center does not route to
// the leaves selected by the flow variables.
Point extract_point(const Ensemble& ensemble, const SeparationProgram& program,
                    std::span<const double> values);

struct SeparationOptions {
  double epsilon = 1e-6;
  double violation_tol = 1e-8;
  bool parallel = true;  // solve class pairs concurrently
  const solver::MilpSolver* solver = nullptr;  // default_solver() when null
  // When non-empty, each pair's MIP is written to
  // "<dump_prefix>c<c>_y<y>.lp".
  std::string dump_prefix;
};

struct PairSeparation {
  int c = 0;
  int y = 0;
  solver::SolveStatus status = solver::SolveStatus::Infeasible;
  double objective = 0.0;
  std::optional<Point> point;
  std::optional<CellSignature> cell;
  long nodes = 0;
  long iterations = 0;
};

struct SeparationResult {
  std::vector<PairSeparation> pairs;  // y-major, c-minor

  bool empty() const;
  // Separating points in pair order, one per cell.
  std::vector<Point> points() const;
  std::size_t calls() const { return pairs.size(); }
};

// Whether a pair objective counts as separating: the pruned score of c
// reaches that of y up to the tolerance. Near-ties count in both class orders,
// since floating-point noise rather than the tie-break would decide them.
bool is_separating(double objective, double violation_tol);

// Solves every ordered pair; an empty result certifies that the two
// ensembles agree wherever the original margin is at least epsilon.
SeparationResult separate(const Ensemble& ensemble,
                          std::span<const double> weights,
                          const SeparationOptions& options = {});

}  // namespace fipe
