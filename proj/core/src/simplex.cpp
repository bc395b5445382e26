#include "simplex.hpp"

#include <algorithm>
#include <cmath>

namespace fipe::solver::detail {

StandardForm StandardForm::from(const MilpProblem& problem) {
  StandardForm f;
  f.num_vars = static_cast<int>(problem.num_variables());
  f.num_rows = static_cast<int>(problem.num_constraints());
  f.sense_sign = problem.sense() == Sense::Minimize ? 1.0 : -1.0;
  f.cost.assign(f.num_vars, 0.0);
  for (const Term& t : problem.objective()) {
    f.cost[t.var] += f.sense_sign * t.coef;
  }
  for (int j = 0; j < f.num_vars; ++j) {
    const Variable& v = problem.variable(j);
    f.lower.push_back(v.lower);
    f.upper.push_back(v.upper);
    if (v.is_binary) f.binaries.push_back(j);
  }
  for (const Constraint& c : problem.constraints()) {
    const bool neg = c.relation == Relation::GreaterEqual;
    const double sign = neg ? -1.0 : 1.0;
    // Merge duplicate variable references.
    std::vector<Term> row = c.terms;
    std::sort(row.begin(), row.end(),
              [](const Term& a, const Term& b) { return a.var < b.var; });
    std::vector<Term> merged;
    for (const Term& t : row) {
      if (!merged.empty() && merged.back().var == t.var) {
        merged.back().coef += sign * t.coef;
      } else {
        merged.push_back({t.var, sign * t.coef});
      }
    }
    std::erase_if(merged, [](const Term& t) { return t.coef == 0.0; });
    f.rows.push_back(std::move(merged));
    f.rhs.push_back(sign * c.rhs);
    f.equality.push_back(c.relation == Relation::Equal);
    f.negated.push_back(neg);
  }
  return f;
}

namespace {

enum class VarState : char { Basic, AtLower, AtUpper };

constexpr double kDropTol = 1e-14;

class Tableau {
 public:
  Tableau(const StandardForm& form, std::span<const double> lower,
          std::span<const double> upper, const SolverOptions& options)
      : form_(form), opt_(options) {
    n_ = form.num_vars;
    m_ = form.num_rows;

    // Nonbasic structural variables start at their lower bound.
    lo_.assign(lower.begin(), lower.end());
    hi_.assign(upper.begin(), upper.end());
    x_.assign(lo_.begin(), lo_.end());
    state_.assign(n_, VarState::AtLower);
    for (int i = 0; i < m_; ++i) {
      lo_.push_back(0.0);
      hi_.push_back(form.equality[i] ? 0.0 : kInf);
      x_.push_back(0.0);
      state_.push_back(VarState::AtLower);
    }

    // Rows whose residual does not fit the slack range get an artificial.
    std::vector<double> residual(m_);
    std::vector<int> art_row;
    for (int i = 0; i < m_; ++i) {
      double r = form.rhs[i];
      for (const Term& t : form.rows[i]) r -= t.coef * x_[t.var];
      residual[i] = r;
      const bool fits = r >= 0.0 && (r <= hi_[n_ + i]);
      if (!fits) art_row.push_back(i);
    }
    num_art_ = static_cast<int>(art_row.size());
    cols_ = n_ + m_ + num_art_;
    stride_ = cols_ + 1;
    for (int a = 0; a < num_art_; ++a) {
      lo_.push_back(0.0);
      hi_.push_back(kInf);
      x_.push_back(0.0);
      state_.push_back(VarState::AtLower);
    }

    tab_.assign(static_cast<std::size_t>(m_) * stride_, 0.0);
    basis_.assign(m_, -1);
    std::vector<int> art_of_row(m_, -1);
    for (int a = 0; a < num_art_; ++a) art_of_row[art_row[a]] = a;
    for (int i = 0; i < m_; ++i) {
      double* row = &tab_[static_cast<std::size_t>(i) * stride_];
      const double sigma = (art_of_row[i] >= 0 && residual[i] < 0) ? -1.0 : 1.0;
      for (const Term& t : form.rows[i]) row[t.var] = sigma * t.coef;
      row[n_ + i] = sigma;
      row[cols_] = sigma * form.rhs[i];
      if (art_of_row[i] >= 0) {
        const int col = n_ + m_ + art_of_row[i];
        row[col] = 1.0;
        basis_[i] = col;
        x_[col] = std::abs(residual[i]);
      } else {
        basis_[i] = n_ + i;
        x_[n_ + i] = residual[i];
      }
      state_[basis_[i]] = VarState::Basic;
    }
    d_.assign(cols_, 0.0);
  }

  LpResult run() {
    LpResult res;
    if (num_art_ > 0) {
      std::vector<double> phase1(cols_, 0.0);
      for (int a = 0; a < num_art_; ++a) phase1[n_ + m_ + a] = 1.0;
      price(phase1);
      const SolveStatus s = iterate(/*allow_art=*/true);
      res.iterations = iterations_;
      if (s == SolveStatus::IterationLimit) {
        res.status = s;
        return res;
      }
      refresh_basic_values();
      double infeas = 0.0;
      for (int a = 0; a < num_art_; ++a) infeas += x_[n_ + m_ + a];
      if (infeas > opt_.feasibility_tol) {
        res.status = SolveStatus::Infeasible;
        return res;
      }
      for (int a = 0; a < num_art_; ++a) {
        const int col = n_ + m_ + a;
        hi_[col] = 0.0;
        x_[col] = 0.0;
        if (state_[col] == VarState::AtUpper) state_[col] = VarState::AtLower;
      }
      refresh_basic_values();
    }

    std::vector<double> phase2(cols_, 0.0);
    for (int j = 0; j < n_; ++j) phase2[j] = form_.cost[j];
    price(phase2);
    const SolveStatus s = iterate(/*allow_art=*/false);
    res.iterations = iterations_;
    res.status = s;
    if (s != SolveStatus::Optimal) return res;
    refresh_basic_values();

    res.x.assign(x_.begin(), x_.begin() + n_);
    for (int j = 0; j < n_; ++j) {
      // Snap values that drifted within tolerance of a bound.
      if (std::abs(res.x[j] - lo_[j]) <= opt_.feasibility_tol * 1e-2) {
        res.x[j] = lo_[j];
      } else if (hi_[j] < kInf &&
                 std::abs(res.x[j] - hi_[j]) <= opt_.feasibility_tol * 1e-2) {
        res.x[j] = hi_[j];
      }
    }
    res.objective = 0.0;
    for (int j = 0; j < n_; ++j) res.objective += form_.cost[j] * res.x[j];
    res.duals.resize(m_);
    for (int i = 0; i < m_; ++i) res.duals[i] = -d_[n_ + i];
    return res;
  }

 private:
  double& at(int i, int j) {
    return tab_[static_cast<std::size_t>(i) * stride_ + j];
  }

  void price(const std::vector<double>& cost) {
    cost_ = cost;
    for (int j = 0; j < cols_; ++j) d_[j] = cost[j];
    for (int i = 0; i < m_; ++i) {
      const double cb = cost[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &tab_[static_cast<std::size_t>(i) * stride_];
      for (int j = 0; j < cols_; ++j) {
        if (row[j] != 0.0) d_[j] -= cb * row[j];
      }
    }
    for (int i = 0; i < m_; ++i) d_[basis_[i]] = 0.0;
  }

  // x_B = b_bar - sum over nonbasic of T_j x_j.
  void refresh_basic_values() {
    for (int i = 0; i < m_; ++i) {
      const double* row = &tab_[static_cast<std::size_t>(i) * stride_];
      double v = row[cols_];
      for (int j = 0; j < cols_; ++j) {
        if (row[j] != 0.0 && state_[j] != VarState::Basic) v -= row[j] * x_[j];
      }
      x_[basis_[i]] = v;
    }
  }

  bool eligible(int j, bool allow_art) const {
    if (state_[j] == VarState::Basic) return false;
    if (!allow_art && j >= n_ + m_) return false;
    if (hi_[j] - lo_[j] <= 0.0) return false;
    if (state_[j] == VarState::AtLower) return d_[j] < -opt_.optimality_tol;
    return d_[j] > opt_.optimality_tol;
  }

  SolveStatus iterate(bool allow_art) {
    int stall = 0;
    while (true) {
      if (iterations_ >= opt_.max_iterations) return SolveStatus::IterationLimit;
      const bool bland = stall >= opt_.stall_threshold;

      int q = -1;
      double best = 0.0;
      for (int j = 0; j < cols_; ++j) {
        if (!eligible(j, allow_art)) continue;
        if (bland) {
          q = j;
          break;
        }
        if (std::abs(d_[j]) > best) {
          best = std::abs(d_[j]);
          q = j;
        }
      }
      if (q < 0) return SolveStatus::Optimal;
      ++iterations_;

      const double dir = state_[q] == VarState::AtLower ? 1.0 : -1.0;
      const double range = hi_[q] - lo_[q];

      // Ratio test. Harris two-pass unless in Bland mode.
      const double tol = opt_.feasibility_tol;
      double relaxed = kInf;
      if (!bland) {
        for (int i = 0; i < m_; ++i) {
          const double alpha = at(i, q);
          if (std::abs(alpha) <= opt_.pivot_tol) continue;
          const double delta = -dir * alpha;
          const int b = basis_[i];
          double lim;
          if (delta < 0) {
            lim = (x_[b] - lo_[b] + tol) / -delta;
          } else {
            if (hi_[b] == kInf) continue;
            lim = (hi_[b] - x_[b] + tol) / delta;
          }
          // A basic value already outside its tolerance band blocks at once.
          relaxed = std::min(relaxed, std::max(lim, 0.0));
        }
      }
      int r = -1;
      double theta = kInf;
      double best_alpha = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double alpha = at(i, q);
        if (std::abs(alpha) <= opt_.pivot_tol) continue;
        const double delta = -dir * alpha;
        const int b = basis_[i];
        double lim;
        if (delta < 0) {
          lim = (x_[b] - lo_[b]) / -delta;
        } else {
          if (hi_[b] == kInf) continue;
          lim = (hi_[b] - x_[b]) / delta;
        }
        lim = std::max(lim, 0.0);
        if (bland) {
          if (lim < theta || (lim == theta && r >= 0 && b < basis_[r])) {
            theta = lim;
            r = i;
          }
        } else if (lim <= relaxed) {
          if (std::abs(alpha) > best_alpha) {
            best_alpha = std::abs(alpha);
            theta = lim;
            r = i;
          }
        }
      }

      if (range <= theta) {
        if (range == kInf) return SolveStatus::Unbounded;
        // Bound flip, no basis change.
        move(q, dir * range);
        state_[q] =
            state_[q] == VarState::AtLower ? VarState::AtUpper : VarState::AtLower;
        x_[q] = state_[q] == VarState::AtLower ? lo_[q] : hi_[q];
        stall = 0;
        continue;
      }
      if (r < 0) return SolveStatus::Unbounded;

      move(q, dir * theta);
      const int leaving = basis_[r];
      const double delta = -dir * at(r, q);
      if (delta < 0) {
        x_[leaving] = lo_[leaving];
        state_[leaving] = VarState::AtLower;
      } else {
        x_[leaving] = hi_[leaving];
        state_[leaving] = VarState::AtUpper;
      }
      pivot(r, q);
      stall = theta <= 1e-12 ? stall + 1 : 0;
    }
  }

  // Shift nonbasic q by `step` and update the basic variables.
  void move(int q, double step) {
    if (step == 0.0) return;
    x_[q] += step;
    for (int i = 0; i < m_; ++i) {
      const double alpha = at(i, q);
      if (alpha != 0.0) x_[basis_[i]] -= alpha * step;
    }
  }

  void pivot(int r, int q) {
    double* prow = &tab_[static_cast<std::size_t>(r) * stride_];
    const double inv = 1.0 / prow[q];
    nz_.clear();
    for (int j = 0; j <= cols_; ++j) {
      if (prow[j] == 0.0) continue;
      prow[j] *= inv;
      if (std::abs(prow[j]) < kDropTol) {
        prow[j] = 0.0;
        continue;
      }
      nz_.push_back(j);
    }
    prow[q] = 1.0;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* row = &tab_[static_cast<std::size_t>(i) * stride_];
      const double f = row[q];
      if (f == 0.0) continue;
      for (int j : nz_) {
        double v = row[j] - f * prow[j];
        row[j] = std::abs(v) < kDropTol ? 0.0 : v;
      }
      row[q] = 0.0;
    }
    const double f = d_[q];
    if (f != 0.0) {
      for (int j : nz_) {
        if (j < cols_) d_[j] -= f * prow[j];
      }
    }
    d_[q] = 0.0;
    state_[q] = VarState::Basic;
    basis_[r] = q;
  }

  const StandardForm& form_;
  const SolverOptions& opt_;
  int n_ = 0;
  int m_ = 0;
  int num_art_ = 0;
  int cols_ = 0;
  int stride_ = 0;
  std::vector<double> tab_;
  std::vector<double> d_;
  std::vector<double> cost_;
  std::vector<double> lo_, hi_, x_;
  std::vector<VarState> state_;
  std::vector<int> basis_;
  std::vector<int> nz_;
  long iterations_ = 0;
};

}  // namespace

LpResult solve_standard(const StandardForm& form, std::span<const double> lower,
                        std::span<const double> upper,
                        const SolverOptions& options) {
  for (int j = 0; j < form.num_vars; ++j) {
    if (lower[j] > upper[j]) {
      LpResult res;
      res.status = SolveStatus::Infeasible;
      return res;
    }
  }
  Tableau tableau(form, lower, upper, options);
  return tableau.run();
}

}  // namespace fipe::solver::detail
