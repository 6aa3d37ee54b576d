#ifndef FLOWNET_SIMPLEX_HPP
#define FLOWNET_SIMPLEX_HPP

#include "flownet/types.hpp"

namespace flownet {

/// Dense LP in the form
///     min c'x   s.t.  A x = b,  lb <= x <= ub,
/// with all bounds finite. Callers cap infinities before building the
/// problem (graph-level code records the cap it used).
struct LpProblem {
  Mat A;
  Vec b;
  Vec c;
  Vec lb;
  Vec ub;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Vec x;
  double objective = 0.0;
};

/// Two-phase tableau simplex with Bland's rule. Problems here are tiny
/// (tens of rows), so the straightforward dense tableau is the robust
/// choice over anything iterative.
LpSolution solve_lp(const LpProblem& p);

}  // namespace flownet

#endif
