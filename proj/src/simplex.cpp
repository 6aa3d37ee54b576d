#include "flownet/simplex.hpp"

#include <algorithm>
#include <cmath>

namespace flownet {
namespace {

constexpr double kPivotTol = 1e-9;

enum class PivotEnd { Optimal, Unbounded, IterationCap };

// One Bland-rule simplex pass on the tableau. `t` is rows x (ncols+1) with
// the rhs in the last column; `obj` is the reduced-cost row with the
// (negated) objective value in its last entry. `allowed` masks columns the
// entering step may consider.
PivotEnd run_simplex(Mat& t, Vec& obj, std::vector<int>& basis,
                     const std::vector<char>& allowed, int max_iter) {
  const int rows = static_cast<int>(t.rows());
  const int ncols = static_cast<int>(t.cols()) - 1;
  for (int iter = 0; iter < max_iter; ++iter) {
    int enter = -1;
    for (int j = 0; j < ncols; ++j) {
      if (allowed[j] && obj[j] < -kPivotTol) {
        enter = j;
        break;  // Bland: smallest eligible index
      }
    }
    if (enter < 0) return PivotEnd::Optimal;

    int leave = -1;
    double best_ratio = 0.0;
    for (int i = 0; i < rows; ++i) {
      const double a = t(i, enter);
      if (a > kPivotTol) {
        const double ratio = t(i, ncols) / a;
        if (leave < 0 || ratio < best_ratio - 1e-12 ||
            (ratio < best_ratio + 1e-12 && basis[i] < basis[leave])) {
          leave = i;
          best_ratio = ratio;
        }
      }
    }
    if (leave < 0) return PivotEnd::Unbounded;

    // pivot on (leave, enter)
    t.row(leave) /= t(leave, enter);
    for (int i = 0; i < rows; ++i) {
      if (i != leave && std::abs(t(i, enter)) > 0.0) {
        t.row(i) -= t(i, enter) * t.row(leave);
      }
    }
    obj -= obj[enter] * t.row(leave).transpose();
    basis[leave] = enter;
  }
  return PivotEnd::IterationCap;
}

}  // namespace

LpSolution solve_lp(const LpProblem& p) {
  const int nvar = static_cast<int>(p.c.size());
  const int neq = static_cast<int>(p.b.size());

  // Shift to y = x - lb >= 0 and turn upper bounds into rows y + s = u.
  const Vec span = p.ub - p.lb;
  const int rows = neq + nvar;
  const int nstruct = 2 * nvar;          // y then slack s
  const int ncols = nstruct + rows;      // + artificials
  Mat t = Mat::Zero(rows, ncols + 1);
  t.block(0, 0, neq, nvar) = p.A;
  t.block(0, ncols, neq, 1) = p.b - p.A * p.lb;
  for (int i = 0; i < nvar; ++i) {
    t(neq + i, i) = 1.0;
    t(neq + i, nvar + i) = 1.0;
    t(neq + i, ncols) = span[i];
  }
  for (int i = 0; i < rows; ++i) {
    if (t(i, ncols) < 0.0) t.row(i) = -t.row(i);
    t(i, nstruct + i) = 1.0;
  }

  std::vector<int> basis(rows);
  for (int i = 0; i < rows; ++i) basis[i] = nstruct + i;

  // Phase 1: minimize the artificial sum.
  Vec obj = Vec::Zero(ncols + 1);
  for (int j = 0; j < nstruct; ++j) obj[j] = -t.col(j).sum();
  obj[ncols] = -t.col(ncols).sum();
  std::vector<char> allowed(ncols, 1);

  const int max_iter = 400 * (rows + ncols);
  const PivotEnd phase1 = run_simplex(t, obj, basis, allowed, max_iter);

  LpSolution sol;
  if (phase1 == PivotEnd::IterationCap) {
    sol.status = LpStatus::IterationLimit;
    return sol;
  }
  const double feas_tol = 1e-7 * std::max(1.0, t.col(ncols).cwiseAbs().maxCoeff());
  if (-obj[ncols] > feas_tol) {
    sol.status = LpStatus::Infeasible;
    return sol;
  }

  // Pivot lingering artificials out of the basis where possible; a row
  // with no structural pivot is redundant and stays parked at zero.
  for (int i = 0; i < rows; ++i) {
    if (basis[i] < nstruct) continue;
    for (int j = 0; j < nstruct; ++j) {
      if (std::abs(t(i, j)) > kPivotTol) {
        t.row(i) /= t(i, j);
        for (int r = 0; r < rows; ++r) {
          if (r != i && std::abs(t(r, j)) > 0.0) t.row(r) -= t(r, j) * t.row(i);
        }
        basis[i] = j;
        break;
      }
    }
  }
  for (int j = nstruct; j < ncols; ++j) allowed[j] = 0;

  // Phase 2 with the real costs on the shifted variables.
  Vec cost = Vec::Zero(ncols);
  cost.head(nvar) = p.c;
  obj.setZero();
  for (int j = 0; j < ncols; ++j) {
    if (!allowed[j]) continue;
    double red = cost[j];
    for (int i = 0; i < rows; ++i) {
      if (basis[i] < nstruct) red -= cost[basis[i]] * t(i, j);
    }
    obj[j] = red;
  }
  double zval = 0.0;
  for (int i = 0; i < rows; ++i) {
    if (basis[i] < nstruct) zval += cost[basis[i]] * t(i, ncols);
  }
  obj[ncols] = -zval;

  const PivotEnd phase2 = run_simplex(t, obj, basis, allowed, max_iter);
  if (phase2 != PivotEnd::Optimal) {
    sol.status = phase2 == PivotEnd::Unbounded ? LpStatus::Unbounded
                                               : LpStatus::IterationLimit;
    return sol;
  }

  Vec y = Vec::Zero(nstruct);
  for (int i = 0; i < rows; ++i) {
    if (basis[i] < nstruct) y[basis[i]] = t(i, ncols);
  }
  sol.x = y.head(nvar) + p.lb;
  sol.objective = p.c.dot(sol.x);
  sol.status = LpStatus::Optimal;
  return sol;
}

}  // namespace flownet
