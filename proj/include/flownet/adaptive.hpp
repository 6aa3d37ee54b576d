#ifndef FLOWNET_ADAPTIVE_HPP
#define FLOWNET_ADAPTIVE_HPP

#include <vector>

#include "flownet/graph.hpp"
#include "flownet/types.hpp"

namespace flownet {

struct ClassifierOptions {
  /// Absolute + relative threshold deciding x_i = gamma_i in floating point:
  /// gray iff x_i <= gamma_i + max(tol, tol*|gamma_i|).
  double gray_tolerance = 1e-9;

  /// The one-level rule takes gray vertices sharing an in-edge with a
  /// deficit vertex's out-set, exactly as stated; the transitive closure
  /// also protects gray vertices further down a chain of scaled flows.
  enum class Closure { OneLevel, Transitive };
  Closure black2_closure = Closure::Transitive;

  enum class FlowBasis { RawMu, SaturatedMu };
  FlowBasis flow_basis = FlowBasis::RawMu;
};

/// Per-instant vertex/edge partition. Vertices: white (above the bound),
/// gray (at the bound), black1 (gray with net outflow), black2 (gray fed
/// by a black vertex's out-edge). Edges with zero flow belong to neither
/// f_in nor f_out.
struct VertexClassification {
  std::vector<int> white, gray, black1, black2, black;  // sorted vertex ids
  std::vector<char> is_gray, is_black;                  // size n masks
  std::vector<std::vector<int>> f_in, f_out;            // per-vertex edges
  std::vector<int> e_b_out;        // out-edges of black vertices, sorted
  std::vector<char> in_e_b_out;    // size m mask
};

VertexClassification classify(const NetworkGraph& g, const Vec& x,
                              const Vec& gamma, const Vec& mu,
                              const ClassifierOptions& opts = {});

/// phi_star solves the per-instant flow rebalancing problem; phi_plus is
/// the saturation magnitude: |phi_star| on e_b_out, +inf elsewhere.
struct AdaptiveBounds {
  Vec phi_star;
  Vec phi_plus;
  double kkt_residual = 0.0;      // stationarity + constraint residual
  double balance_residual = 0.0;  // max |B(i,:) phi_star| over black i
  bool via_rescaling = false;     // bound came from the scaling fixed point
};

/// sat(mu; -|phi|, |phi|) reproduces phi exactly iff phi shrinks mu
/// without flipping signs. When this fails for a minimizer, the bounds
/// built from it cannot realize it.
bool realizable_by_saturation(const Vec& mu, const Vec& phi,
                              const std::vector<int>& e_b_out);

/// Minimizes sum_{j in e_b_out} ((phi_j - mu_j)^2 + phi_j^2) / (2|mu_j|)
/// subject to B(i,:) phi = 0 at every black vertex and phi_k = mu_k off
/// e_b_out. Diagonal positive Hessian on the free variables makes the
/// minimizer unique; redundant balance rows are handled by a least-squares
/// KKT solve. Throws NumericalError when the equality system is
/// inconsistent (possible when a protected vertex has fixed inflow it
/// cannot shed; see iterative_rescaling for the scaling-based analogue).
AdaptiveBounds solve_flow_qp(const NetworkGraph& g, const Vec& mu,
                             const VertexClassification& cls);

struct RescalingResult {
  Vec phi;
  int iterations = 0;
  bool converged = false;
  double max_balance_defect = 0.0;  // max(0, -B(i,:) phi) over black i
};

/// Fixed-point iteration: starting from phi = mu, any black vertex with
/// negative balance scales its out-flows by inflow/outflow until nothing
/// changes. Magnitudes are non-increasing, so the iteration converges;
/// vertices are swept in ascending index order.
RescalingResult iterative_rescaling(const NetworkGraph& g, const Vec& mu,
                                    const VertexClassification& cls,
                                    double tol = 1e-10, int max_iter = 200000);

/// Bound assembly for an existing classification: the rebalancing
/// minimizer where it exists and is realizable by the saturation, else
/// the rescaling fixed point (which always is); via_rescaling records
/// which route produced the bound.
AdaptiveBounds bounds_from_classification(const NetworkGraph& g, const Vec& mu,
                                          const VertexClassification& cls);

/// classify -> solve_flow_qp -> bound assembly. No gray (or no black)
/// vertices means no saturation anywhere. When the balance system is
/// inconsistent or its minimizer cannot be realized by the saturation,
/// the bound falls back to the rescaling fixed point, which always
/// exists and always keeps protected vertices non-draining; the result
/// carries via_rescaling = true.
AdaptiveBounds compute_bounds(const NetworkGraph& g, const Vec& x,
                              const Vec& gamma, const Vec& mu,
                              const ClassifierOptions& opts = {});

}  // namespace flownet

#endif
