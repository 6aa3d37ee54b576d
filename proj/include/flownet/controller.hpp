#ifndef FLOWNET_CONTROLLER_HPP
#define FLOWNET_CONTROLLER_HPP

#include <optional>
#include <string>
#include <vector>

#include "flownet/adaptive.hpp"
#include "flownet/graph.hpp"
#include "flownet/hamiltonian.hpp"
#include "flownet/types.hpp"

namespace flownet {

/// Edge-wise PI feedback mu = -R zeta - grad H_c(eta), zeta = B' grad H(x).
struct PIController {
  Vec r;  // diagonal damping gains, strictly positive
  ControllerHamiltonian hc;

  void validate(int m) const;
};

/// Constant terminal in/outflows d_bar feeding the plant through E.
struct Disturbance {
  Vec d_bar;  // size = terminal count (may be empty)
};

enum class ConstraintMode { Unconstrained, ConstantBox, Adaptive };

struct ConstraintPolicy {
  ConstraintMode mode = ConstraintMode::Unconstrained;
  BoxBounds box;  // ConstantBox only
  ClassifierOptions classifier;
};

/// Element-wise clamp of x into [lo, hi]; values exactly on a bound count
/// as saturated. Throws ConfigError if any lo > hi.
Vec saturate(const Vec& x, const Vec& lo, const Vec& hi);

Vec controller_output(const PIController& c, const Vec& zeta, const Vec& eta);

struct RhsEval {
  Vec x_dot;
  Vec eta_dot;
  Vec mu_raw;
  Vec mu_sat;
};

/// Assembles the closed-loop vector field
///   x_dot   = B sat(mu; lo, hi) + E d_bar
///   eta_dot = B' grad H(x)
/// with mu = -R B' grad H(x) - grad H_c(eta). Pass e_dbar = E * d_bar
/// premultiplied, or nullptr for no disturbance.
RhsEval closed_loop_rhs(const NetworkGraph& g, const VertexHamiltonian& h,
                        const PIController& c, const SystemState& s,
                        const Vec& lo, const Vec& hi,
                        const Vec* e_dbar = nullptr);

struct NormalizedConstraints {
  NetworkGraph graph;  // columns of B negated for flipped edges
  BoxBounds bounds;
  std::vector<int> flipped_edges;
  std::vector<int> straddling_edges;  // lower < 0 < upper, left in place
};

/// Reorients edges whose bound interval lies in the negative half-line so
/// that the returned bounds satisfy upper >= lower >= 0 where achievable.
NormalizedConstraints normalize_constraints(const NetworkGraph& g,
                                            const BoxBounds& bounds);

struct MatchingResult {
  bool matchable = false;
  std::optional<Vec> v_bar;    // edge flow with B v = E d_bar
  std::optional<Vec> eta_bar;  // controller state with grad H_c(eta) = v
  double residual = 0.0;
  std::string diagnostic;
};

/// Decides E d_bar in im B (or, with bounds, existence of a bounded flow
/// reproducing the terminal in/outflows) and returns a matching flow.
/// Unconstrained: minimum-norm solve; constrained: LP feasibility.
MatchingResult solve_matching(const NetworkGraph& g, const Disturbance& d,
                              const ControllerHamiltonian& hc,
                              const BoxBounds* bounds = nullptr);

}  // namespace flownet

#endif
