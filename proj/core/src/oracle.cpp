#include "fipe/oracle.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "fipe/error.hpp"

namespace fipe {

using solver::MilpProblem;
using solver::Relation;
using solver::Sense;
using solver::SolveStatus;
using solver::Term;

SeparationProgram build_separation(const Ensemble& ensemble,
                                   std::span<const double> weights, int c,
                                   int y, double epsilon) {
  const int num_classes = ensemble.num_classes();
  if (weights.size() != ensemble.size()) {
    throw InvalidInput("weight vector length does not match the ensemble");
  }
  if (c < 0 || c >= num_classes || y < 0 || y >= num_classes || c == y) {
    throw InvalidInput("separation needs two distinct valid classes");
  }
  if (!(epsilon > 0)) throw InvalidInput("epsilon must be positive");

  const FeatureSchema& schema = ensemble.schema();
  const auto& alpha = ensemble.weights();
  SeparationProgram sp;
  sp.c = c;
  sp.y = y;
  MilpProblem& p = sp.problem;

  const std::size_t num_trees = ensemble.size();
  sp.flow.resize(num_trees);
  sp.turn.resize(num_trees);
  for (std::size_t m = 0; m < num_trees; ++m) {
    const Tree& tree = ensemble.tree(m);
    for (std::size_t v = 0; v < tree.size(); ++v) {
      sp.flow[m].push_back(p.add_variable(
          "z_" + std::to_string(m) + "_" + std::to_string(tree.node(v).id), 0.0,
          1.0));
    }
  }
  for (std::size_t m = 0; m < num_trees; ++m) {
    for (int d = 0; d <= ensemble.tree(m).max_depth(); ++d) {
      sp.turn[m].push_back(
          p.add_binary("lambda_" + std::to_string(m) + "_" + std::to_string(d)));
    }
  }
  sp.threshold.resize(schema.size());
  sp.binary.assign(schema.size(), -1);
  sp.category.resize(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const std::string tag = std::to_string(j);
    switch (schema.type(j)) {
      case FeatureType::Continuous:
        for (std::size_t r = 0; r < schema.thresholds(j).size(); ++r) {
          sp.threshold[j].push_back(
              p.add_binary("mu_" + tag + "_" + std::to_string(r)));
        }
        break;
      case FeatureType::Binary:
        sp.binary[j] = p.add_binary("x_" + tag);
        break;
      case FeatureType::Categorical:
        for (int z = 0; z < schema.num_levels(j); ++z) {
          sp.category[j].push_back(
              p.add_binary("nu_" + tag + "_" + std::to_string(z)));
        }
        break;
    }
  }

  // Integral feature indicators force integral flows, so branch on them
  // before the depth variables.
  for (std::size_t j = 0; j < schema.size(); ++j) {
    for (int v : sp.threshold[j]) p.set_branch_priority(v, 1);
    for (int v : sp.category[j]) p.set_branch_priority(v, 1);
    if (sp.binary[j] >= 0) p.set_branch_priority(sp.binary[j], 1);
  }

  // Objective: pruned score gap of c over y.
  std::vector<Term> objective;
  for (std::size_t m = 0; m < num_trees; ++m) {
    if (weights[m] == 0.0) continue;
    const Tree& tree = ensemble.tree(m);
    for (std::size_t v = 0; v < tree.size(); ++v) {
      const Node& node = tree.node(v);
      if (!node.is_leaf) continue;
      const double g = weights[m] * (node.scores[c] - node.scores[y]);
      if (g != 0.0) objective.push_back({sp.flow[m][v], g});
    }
  }
  p.set_objective(Sense::Maximize, std::move(objective));

  // The original ensemble must prefer y over every other class by epsilon.
  for (int other = 0; other < num_classes; ++other) {
    if (other == y) continue;
    std::vector<Term> terms;
    for (std::size_t m = 0; m < num_trees; ++m) {
      if (alpha[m] == 0.0) continue;
      const Tree& tree = ensemble.tree(m);
      for (std::size_t v = 0; v < tree.size(); ++v) {
        const Node& node = tree.node(v);
        if (!node.is_leaf) continue;
        const double g = alpha[m] * (node.scores[y] - node.scores[other]);
        if (g != 0.0) terms.push_back({sp.flow[m][v], g});
      }
    }
    sp.epsilon_rows.push_back(p.add_constraint(
        "margin_" + std::to_string(other), std::move(terms),
        Relation::GreaterEqual, epsilon));
  }

  // Path consistency inside each tree.
  for (std::size_t m = 0; m < num_trees; ++m) {
    const Tree& tree = ensemble.tree(m);
    const auto& z = sp.flow[m];
    const std::string tag = std::to_string(m);
    p.add_constraint("root_" + tag, {{z[tree.root()], 1.0}}, Relation::Equal,
                     1.0);
    std::vector<std::vector<Term>> by_depth(tree.max_depth() + 1);
    for (std::size_t v = 0; v < tree.size(); ++v) {
      const Node& node = tree.node(v);
      if (node.is_leaf) continue;
      const std::string nid = tag + "_" + std::to_string(node.id);
      p.add_constraint("children_" + nid,
                       {{z[node.left], 1.0}, {z[node.right], 1.0}, {z[v], -1.0}},
                       Relation::Equal, 0.0);
      by_depth[node.depth].push_back({z[node.left], 1.0});

      // Feature consistency: the branch taken must agree with the shared
      // indicator of this split.
      int indicator = -1;
      switch (node.split) {
        case SplitKind::Threshold:
          indicator = sp.threshold[node.feature][node.threshold_index];
          break;
        case SplitKind::Binary:
          indicator = sp.binary[node.feature];
          break;
        case SplitKind::Category:
          indicator = sp.category[node.feature][node.category];
          break;
      }
      p.add_constraint("left_" + nid, {{z[node.left], 1.0}, {indicator, 1.0}},
                       Relation::LessEqual, 1.0);
      p.add_constraint("right_" + nid, {{z[node.right], 1.0}, {indicator, -1.0}},
                       Relation::LessEqual, 0.0);
    }
    for (std::size_t d = 0; d < by_depth.size(); ++d) {
      auto terms = std::move(by_depth[d]);
      terms.push_back({sp.turn[m][d], -1.0});
      p.add_constraint("depth_" + tag + "_" + std::to_string(d),
                       std::move(terms), Relation::Equal, 0.0);
    }
  }

  // Indicator structure shared across trees.
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& mu = sp.threshold[j];
    for (std::size_t r = 0; r + 1 < mu.size(); ++r) {
      p.add_constraint("order_" + std::to_string(j) + "_" + std::to_string(r),
                       {{mu[r], 1.0}, {mu[r + 1], -1.0}},
                       Relation::GreaterEqual, 0.0);
    }
    if (schema.type(j) == FeatureType::Categorical) {
      std::vector<Term> terms;
      for (int v : sp.category[j]) terms.push_back({v, 1.0});
      p.add_constraint("onehot_" + std::to_string(j), std::move(terms),
                       Relation::Equal, 1.0);
    }
  }
  return sp;
}

Point extract_point(const Ensemble& ensemble, const SeparationProgram& program,
                    std::span<const double> values) {
  const FeatureSchema& schema = ensemble.schema();
  CellSignature cell;
  cell.index.resize(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    switch (schema.type(j)) {
      case FeatureType::Continuous: {
        int k = 0;
        for (int v : program.threshold[j]) k += static_cast<int>(std::lround(values[v]));
        cell.index[j] = k;
        break;
      }
      case FeatureType::Binary:
        cell.index[j] = static_cast<int>(std::lround(values[program.binary[j]]));
        break;
      case FeatureType::Categorical: {
        int best = 0;
        for (std::size_t z = 1; z < program.category[j].size(); ++z) {
          if (values[program.category[j][z]] >
              values[program.category[j][best]]) {
            best = static_cast<int>(z);
          }
        }
        cell.index[j] = best;
        break;
      }
    }
  }
  Point x = cell_center(schema, cell);
  for (std::size_t m = 0; m < ensemble.size(); ++m) {
    const int leaf = ensemble.tree(m).leaf_index(x);
    if (values[program.flow[m][leaf]] < 0.5) {
      throw InternalError("extracted point does not follow the MIP path in tree " +
                          std::to_string(m));
    }
  }
  return x;
}

bool is_separating(double objective, double violation_tol) {
  return objective > -violation_tol;
}

bool SeparationResult::empty() const {
  for (const PairSeparation& pair : pairs) {
    if (pair.point) return false;
  }
  return true;
}

std::vector<Point> SeparationResult::points() const {
  std::vector<Point> out;
  std::set<CellSignature> seen;
  for (const PairSeparation& pair : pairs) {
    if (pair.point && seen.insert(*pair.cell).second) out.push_back(*pair.point);
  }
  return out;
}

namespace {

PairSeparation solve_pair(const Ensemble& ensemble,
                          std::span<const double> weights, int c, int y,
                          const SeparationOptions& options) {
  const solver::MilpSolver& engine =
      options.solver ? *options.solver : solver::default_solver();
  const SeparationProgram sp =
      build_separation(ensemble, weights, c, y, options.epsilon);
  if (!options.dump_prefix.empty()) {
    std::ofstream out(options.dump_prefix + "c" + std::to_string(c) + "_y" +
                      std::to_string(y) + ".lp");
    out << sp.problem.to_lp();
  }
  const auto s = engine.solve(sp.problem);

  PairSeparation result;
  result.c = c;
  result.y = y;
  result.status = s.status;
  result.nodes = s.nodes;
  result.iterations = s.iterations;
  if (s.status == SolveStatus::Infeasible) return result;
  if (s.status != SolveStatus::Optimal) {
    throw SolverFailure("separation MIP for pair (c=" + std::to_string(c) +
                        ", y=" + std::to_string(y) + ") ended with status " +
                        solver::to_string(s.status));
  }
  result.objective = s.objective;
  if (!is_separating(s.objective, options.violation_tol)) return result;

  Point x = extract_point(ensemble, sp, s.values);
  // Soundness, checked by direct evaluation.
  const auto original = ensemble.predict_scores(x);
  const auto pruned = ensemble.predict_scores(weights, x);
  const double gap = pruned[c] - pruned[y];
  if (argmax(original) != y ||
      std::abs(gap - s.objective) > 1e-6 * (1.0 + std::abs(s.objective))) {
    std::ostringstream os;
    os << "separating point for pair (c=" << c << ", y=" << y
       << ") fails direct evaluation: original class " << argmax(original)
       << ", pruned gap " << gap << ", MIP objective " << s.objective;
    throw InternalError(os.str());
  }
  result.cell = cell_of(ensemble.schema(), x);
  result.point = std::move(x);
  return result;
}

}  // namespace

SeparationResult separate(const Ensemble& ensemble,
                          std::span<const double> weights,
                          const SeparationOptions& options) {
  const int num_classes = ensemble.num_classes();
  std::vector<std::pair<int, int>> order;
  for (int y = 0; y < num_classes; ++y) {
    for (int c = 0; c < num_classes; ++c) {
      if (c != y) order.emplace_back(c, y);
    }
  }
  SeparationResult result;
  result.pairs.resize(order.size());
  if (options.parallel && order.size() > 1) {
    std::vector<std::future<PairSeparation>> futures;
    for (auto [c, y] : order) {
      futures.push_back(std::async(std::launch::async, solve_pair,
                                   std::cref(ensemble), weights, c, y,
                                   std::cref(options)));
    }
    for (std::size_t k = 0; k < futures.size(); ++k) {
      result.pairs[k] = futures[k].get();
    }
  } else {
    for (std::size_t k = 0; k < order.size(); ++k) {
      result.pairs[k] =
          solve_pair(ensemble, weights, order[k].first, order[k].second, options);
    }
  }
  return result;
}

}  // namespace fipe
