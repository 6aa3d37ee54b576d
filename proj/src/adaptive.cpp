#include "flownet/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace flownet {

VertexClassification classify(const NetworkGraph& g, const Vec& x,
                              const Vec& gamma, const Vec& mu,
                              const ClassifierOptions& opts) {
  if (x.size() != g.n || gamma.size() != g.n || mu.size() != g.m) {
    throw ConfigError("classification input length mismatch");
  }
  VertexClassification cls;
  cls.is_gray.assign(g.n, 0);
  cls.is_black.assign(g.n, 0);
  cls.f_in.assign(g.n, {});
  cls.f_out.assign(g.n, {});
  cls.in_e_b_out.assign(g.m, 0);

  for (int j = 0; j < g.m; ++j) {
    if (mu[j] > 0.0) {
      cls.f_out[g.edges[j].tail].push_back(j);
      cls.f_in[g.edges[j].head].push_back(j);
    } else if (mu[j] < 0.0) {
      cls.f_out[g.edges[j].head].push_back(j);
      cls.f_in[g.edges[j].tail].push_back(j);
    }  // zero flow feeds neither set
  }

  const Vec balance = g.B * mu;
  for (int i = 0; i < g.n; ++i) {
    const double tol = std::max(opts.gray_tolerance,
                                opts.gray_tolerance * std::abs(gamma[i]));
    if (x[i] <= gamma[i] + tol) {
      cls.is_gray[i] = 1;
      cls.gray.push_back(i);
      if (balance[i] < 0.0) {
        cls.is_black[i] = 1;
        cls.black1.push_back(i);
      }
    } else {
      cls.white.push_back(i);
    }
  }

  // Black2: gray vertices fed by an out-edge of an already-black vertex.
  // The one-level option stops after seeding from the deficit set.
  std::vector<int> frontier = cls.black1;
  bool first_pass = true;
  while (!frontier.empty()) {
    std::vector<int> next;
    for (int v : frontier) {
      for (int j : cls.f_out[v]) {
        const int other = (g.edges[j].tail == v) ? g.edges[j].head : g.edges[j].tail;
        if (cls.is_gray[other] && !cls.is_black[other]) {
          cls.is_black[other] = 1;
          cls.black2.push_back(other);
          next.push_back(other);
        }
      }
    }
    if (first_pass && opts.black2_closure == ClassifierOptions::Closure::OneLevel) break;
    first_pass = false;
    frontier = std::move(next);
  }
  std::sort(cls.black2.begin(), cls.black2.end());

  for (int i = 0; i < g.n; ++i) {
    if (cls.is_black[i]) {
      cls.black.push_back(i);
      for (int j : cls.f_out[i]) {
        if (!cls.in_e_b_out[j]) {
          cls.in_e_b_out[j] = 1;
          cls.e_b_out.push_back(j);
        }
      }
    }
  }
  std::sort(cls.e_b_out.begin(), cls.e_b_out.end());
  return cls;
}

AdaptiveBounds solve_flow_qp(const NetworkGraph& g, const Vec& mu,
                             const VertexClassification& cls) {
  AdaptiveBounds out;
  out.phi_star = mu;
  out.phi_plus = Vec::Constant(g.m, kInf);
  const int nfree = static_cast<int>(cls.e_b_out.size());
  if (nfree == 0) return out;

  const int ncon = static_cast<int>(cls.black.size());
  // KKT system for the free flows: diag(2/|mu_j|) phi + A' lambda = sign(mu),
  // A phi = -(fixed flow contribution), A = black rows of B on free columns.
  Mat kkt = Mat::Zero(nfree + ncon, nfree + ncon);
  Vec rhs = Vec::Zero(nfree + ncon);
  for (int a = 0; a < nfree; ++a) {
    const int j = cls.e_b_out[a];
    kkt(a, a) = 2.0 / std::abs(mu[j]);
    rhs[a] = mu[j] > 0.0 ? 1.0 : -1.0;
  }
  for (int b = 0; b < ncon; ++b) {
    const int i = cls.black[b];
    double fixed = 0.0;
    for (int j = 0; j < g.m; ++j) {
      if (cls.in_e_b_out[j]) continue;
      fixed += g.B(i, j) * mu[j];
    }
    rhs[nfree + b] = -fixed;
    for (int a = 0; a < nfree; ++a) {
      const int j = cls.e_b_out[a];
      kkt(nfree + b, a) = g.B(i, j);
      kkt(a, nfree + b) = g.B(i, j);
    }
  }

  Eigen::CompleteOrthogonalDecomposition<Mat> cod(kkt);
  cod.setThreshold(1e-10);
  const Vec sol = cod.solve(rhs);
  out.kkt_residual = (kkt * sol - rhs).cwiseAbs().maxCoeff();

  for (int a = 0; a < nfree; ++a) {
    const int j = cls.e_b_out[a];
    out.phi_star[j] = sol[a];
    out.phi_plus[j] = std::abs(sol[a]);
  }
  for (int i : cls.black) {
    out.balance_residual =
        std::max(out.balance_residual, std::abs(g.B.row(i).dot(out.phi_star)));
  }
  if (out.balance_residual > 1e-6) {
    std::ostringstream msg;
    msg << "flow rebalancing system is inconsistent (balance residual "
        << out.balance_residual << "); a protected vertex cannot shed its fixed inflow";
    throw NumericalError(msg.str());
  }
  return out;
}

RescalingResult iterative_rescaling(const NetworkGraph& g, const Vec& mu,
                                    const VertexClassification& cls,
                                    double tol, int max_iter) {
  RescalingResult res;
  res.phi = mu;
  if (cls.e_b_out.empty()) {
    res.converged = true;
    return res;
  }
  Vec prev = res.phi;
  for (int k = 0; k < max_iter; ++k) {
    prev = res.phi;
    for (int i : cls.black) {
      double bal = 0.0;
      for (int j : cls.f_in[i]) bal += std::abs(res.phi[j]);
      double out_sum = 0.0;
      for (int j : cls.f_out[i]) out_sum += std::abs(res.phi[j]);
      bal -= out_sum;
      if (bal < 0.0 && out_sum > 0.0) {
        const double scale = (out_sum + bal) / out_sum;
        for (int j : cls.f_out[i]) res.phi[j] *= scale;
      }
    }
    res.iterations = k + 1;
    if ((res.phi - prev).cwiseAbs().maxCoeff() <= tol) {
      res.converged = true;
      break;
    }
  }
  for (int i : cls.black) {
    res.max_balance_defect =
        std::max(res.max_balance_defect, -g.B.row(i).dot(res.phi));
  }
  res.max_balance_defect = std::max(res.max_balance_defect, 0.0);
  return res;
}

bool realizable_by_saturation(const Vec& mu, const Vec& phi,
                              const std::vector<int>& e_b_out) {
  for (int j : e_b_out) {
    const double tol = 1e-12 * std::max(1.0, std::abs(mu[j]));
    if (std::abs(phi[j]) <= tol) continue;  // ~zero realizes as zero
    if (phi[j] * mu[j] < 0.0) return false;
    if (std::abs(phi[j]) > std::abs(mu[j]) + tol) return false;
  }
  return true;
}

AdaptiveBounds bounds_from_classification(const NetworkGraph& g, const Vec& mu,
                                          const VertexClassification& cls) {
  AdaptiveBounds out;
  if (cls.black.empty()) {
    out.phi_star = mu;
    out.phi_plus = Vec::Constant(g.m, kInf);
    return out;
  }
  bool fall_back = false;
  try {
    out = solve_flow_qp(g, mu, cls);
    fall_back = !realizable_by_saturation(mu, out.phi_star, cls.e_b_out);
  } catch (const NumericalError&) {
    fall_back = true;  // inconsistent balance system
  }
  if (fall_back) {
    // The scaling fixed point shrinks magnitudes without sign flips, so
    // the saturation reproduces it and every black balance stays >= 0.
    const RescalingResult it = iterative_rescaling(g, mu, cls);
    out.phi_star = it.phi;
    out.phi_plus = Vec::Constant(g.m, kInf);
    for (int j : cls.e_b_out) out.phi_plus[j] = std::abs(it.phi[j]);
    out.kkt_residual = 0.0;
    out.balance_residual = it.max_balance_defect;
    out.via_rescaling = true;
  }
  return out;
}

AdaptiveBounds compute_bounds(const NetworkGraph& g, const Vec& x,
                              const Vec& gamma, const Vec& mu,
                              const ClassifierOptions& opts) {
  return bounds_from_classification(g, mu, classify(g, x, gamma, mu, opts));
}

}  // namespace flownet
