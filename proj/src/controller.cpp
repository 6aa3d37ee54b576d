#include "flownet/controller.hpp"

#include <cmath>
#include <sstream>

#include "flownet/simplex.hpp"

namespace flownet {

void PIController::validate(int m) const {
  if (r.size() != m || hc.q.size() != m) {
    throw ConfigError("controller gain/hamiltonian length differs from edge count");
  }
  for (int i = 0; i < m; ++i) {
    if (!(r[i] > 0.0)) throw ConfigError("damping gains must be strictly positive");
    if (!(hc.q[i] > 0.0)) throw ConfigError("controller hamiltonian weights must be strictly positive");
  }
}

Vec saturate(const Vec& x, const Vec& lo, const Vec& hi) {
  if (lo.size() != x.size() || hi.size() != x.size()) {
    throw ConfigError("saturation bound length mismatch");
  }
  Vec out(x.size());
  for (int i = 0; i < x.size(); ++i) {
    if (!(lo[i] <= hi[i])) {
      std::ostringstream msg;
      msg << "saturation bounds on component " << (i + 1) << " have lower > upper";
      throw ConfigError(msg.str());
    }
    out[i] = x[i] <= lo[i] ? lo[i] : (x[i] >= hi[i] ? hi[i] : x[i]);
  }
  return out;
}

Vec controller_output(const PIController& c, const Vec& zeta, const Vec& eta) {
  return -c.r.cwiseProduct(zeta) - c.hc.gradient(eta);
}

RhsEval closed_loop_rhs(const NetworkGraph& g, const VertexHamiltonian& h,
                        const PIController& c, const SystemState& s,
                        const Vec& lo, const Vec& hi, const Vec* e_dbar) {
  RhsEval out;
  const Vec y = h.gradient(s.x);
  const Vec zeta = g.B.transpose() * y;
  out.mu_raw = controller_output(c, zeta, s.eta);
  out.mu_sat = saturate(out.mu_raw, lo, hi);
  out.x_dot = g.B * out.mu_sat;
  if (e_dbar) out.x_dot += *e_dbar;
  out.eta_dot = zeta;
  return out;
}

NormalizedConstraints normalize_constraints(const NetworkGraph& g,
                                            const BoxBounds& bounds) {
  bounds.validate();
  NormalizedConstraints out;
  out.graph = g;
  out.bounds = bounds;
  for (int j = 0; j < g.m; ++j) {
    if (bounds.upper[j] <= 0.0 && bounds.lower[j] < 0.0) {
      out.graph.B_int.col(j) = -out.graph.B_int.col(j);
      out.graph.B.col(j) = -out.graph.B.col(j);
      std::swap(out.graph.edges[j].tail, out.graph.edges[j].head);
      out.bounds.lower[j] = -bounds.upper[j];
      out.bounds.upper[j] = -bounds.lower[j];
      out.flipped_edges.push_back(j);
    } else if (bounds.lower[j] < 0.0 && bounds.upper[j] > 0.0) {
      out.straddling_edges.push_back(j);
    }
  }
  return out;
}

MatchingResult solve_matching(const NetworkGraph& g, const Disturbance& d,
                              const ControllerHamiltonian& hc,
                              const BoxBounds* bounds) {
  MatchingResult res;
  if (d.d_bar.size() != g.terminal_count()) {
    throw ConfigError("d_bar length differs from terminal count");
  }
  const Vec target = g.terminal_count() ? Vec(g.E * d.d_bar) : Vec(Vec::Zero(g.n));
  const double tol = 1e-9 * (1.0 + target.cwiseAbs().maxCoeff());

  // Minimum-norm flow reproducing the terminal in/outflows.
  Vec v = Vec::Zero(g.m);
  if (g.m > 0) v = g.B.completeOrthogonalDecomposition().solve(target);
  double residual = g.m ? (g.B * v - target).cwiseAbs().maxCoeff()
                        : target.cwiseAbs().maxCoeff();

  if (bounds) {
    bounds->validate();
    bool inside = residual <= tol;
    for (int i = 0; inside && i < g.m; ++i) {
      inside = v[i] >= bounds->lower[i] - tol && v[i] <= bounds->upper[i] + tol;
    }
    if (!inside) {
      // Minimum-norm point leaves the box: fall back to LP feasibility of
      // { v : B v = E d_bar, lower <= v <= upper }.
      double cap = 1e6;
      for (int i = 0; i < g.m; ++i) {
        if (std::isfinite(bounds->lower[i])) cap = std::max(cap, 1e6 * std::abs(bounds->lower[i]));
        if (std::isfinite(bounds->upper[i])) cap = std::max(cap, 1e6 * std::abs(bounds->upper[i]));
      }
      LpProblem p;
      p.A = g.B;
      p.b = target;
      p.c = Vec::Zero(g.m);
      p.lb = bounds->lower.cwiseMax(-cap);
      p.ub = bounds->upper.cwiseMin(cap);
      const LpSolution sol = solve_lp(p);
      if (sol.status != LpStatus::Optimal) {
        res.matchable = false;
        res.residual = residual;
        res.diagnostic = "no flow inside the bounds reproduces E d_bar";
        return res;
      }
      v = sol.x;
      residual = g.m ? (g.B * v - target).cwiseAbs().maxCoeff() : 0.0;
    }
  }

  res.residual = residual;
  if (residual > tol) {
    res.matchable = false;
    res.diagnostic = "E d_bar is not in the image of B";
    return res;
  }
  res.matchable = true;
  res.v_bar = v;
  // grad H_c(eta_bar) = q .* eta_bar = v_bar
  res.eta_bar = v.cwiseQuotient(hc.q);
  return res;
}

}  // namespace flownet
