#include "flownet/sim.hpp"

#include <cmath>
#include <sstream>

#include "flownet/adaptive.hpp"

namespace flownet {
namespace {

struct Deriv {
  Vec x_dot;
  Vec eta_dot;
};

// Closed-loop field with the step's frozen bounds.
Deriv eval_rhs(const SimSystem& sys, const Vec& x, const Vec& eta,
               const Vec& lo, const Vec& hi, const Vec* e_dbar,
               bool proportional_only) {
  const Vec y = sys.h.gradient(x);
  const Vec zeta = sys.g.B.transpose() * y;
  Vec mu = proportional_only ? Vec(-sys.pi.r.cwiseProduct(zeta))
                             : controller_output(sys.pi, zeta, eta);
  Deriv d;
  d.x_dot = sys.g.B * saturate(mu, lo, hi);
  if (e_dbar) d.x_dot += *e_dbar;
  d.eta_dot = proportional_only ? Vec(Vec::Zero(eta.size())) : zeta;
  return d;
}

std::vector<std::int8_t> class_codes(const VertexClassification& cls, int n) {
  std::vector<std::int8_t> codes(n, kWhite);
  for (int v : cls.gray) codes[v] = kGray;
  for (int v : cls.black1) codes[v] = kBlack1;
  for (int v : cls.black2) codes[v] = kBlack2;
  return codes;
}

}  // namespace

void SimConfig::validate() const {
  if (!(h > 0.0) || !(t_end > 0.0)) {
    throw ConfigError("sim step and horizon must be strictly positive");
  }
  if (record_every < 1) throw ConfigError("record_every must be >= 1");
  if (!(consensus_tol > 0.0) || !(lyapunov_slack > 0.0)) {
    throw ConfigError("sim tolerances must be strictly positive");
  }
}

Trajectory integrate(const SimSystem& sys, const SystemState& s0,
                     const SimConfig& cfg) {
  cfg.validate();
  const int n = sys.g.n, m = sys.g.m;
  if (s0.x.size() != n || s0.eta.size() != m || sys.h.size() != n) {
    throw ConfigError("initial state length differs from graph dimensions");
  }
  sys.pi.validate(m);
  if (!s0.x.allFinite() || !s0.eta.allFinite()) {
    throw ConfigError("initial state must be finite");
  }

  const bool adaptive = sys.policy.mode == ConstraintMode::Adaptive;
  const Vec& gamma = sys.h.minimizers();
  if (adaptive) {
    if (sys.dist.d_bar.size() && sys.dist.d_bar.cwiseAbs().maxCoeff() > 0.0) {
      throw ConfigError(
          "adaptive flow bounds are stated for zero terminal in/outflows; "
          "set d_bar = 0 or use another constraint mode");
    }
    for (int i = 0; i < n; ++i) {
      if (s0.x[i] < gamma[i]) {
        std::ostringstream msg;
        msg << "adaptive policy requires x0 >= gamma; vertex " << (i + 1)
            << " starts below its bound";
        throw ConfigError(msg.str());
      }
    }
  }

  Vec e_dbar;
  const Vec* e_dbar_ptr = nullptr;
  if (sys.dist.d_bar.size()) {
    if (sys.dist.d_bar.size() != sys.g.terminal_count()) {
      throw ConfigError("d_bar length differs from terminal count");
    }
    e_dbar = sys.g.E * sys.dist.d_bar;
    e_dbar_ptr = &e_dbar;
  }

  Vec lo, hi;
  switch (sys.policy.mode) {
    case ConstraintMode::Unconstrained:
      lo = Vec::Constant(m, -kInf);
      hi = Vec::Constant(m, kInf);
      break;
    case ConstraintMode::ConstantBox:
      sys.policy.box.validate();
      if (sys.policy.box.lower.size() != m) {
        throw ConfigError("constant flow bounds length differs from edge count");
      }
      lo = sys.policy.box.lower;
      hi = sys.policy.box.upper;
      break;
    case ConstraintMode::Adaptive:
      lo = Vec::Constant(m, -kInf);
      hi = Vec::Constant(m, kInf);
      break;
  }

  const int nsteps = static_cast<int>(std::ceil(cfg.t_end / cfg.h - 1e-12));
  Trajectory tr;
  const int approx_samples = nsteps / cfg.record_every + 2;
  tr.times.reserve(approx_samples);

  Vec x = s0.x, eta = s0.eta;
  double t = 0.0;
  const double mass0 = x.sum();
  double energy_prev = sys.h.value(x) + sys.pi.hc.value(eta);
  tr.min_x_minus_gamma = (x - gamma).minCoeff();
  std::vector<std::int8_t> codes_prev;
  int last_change_step = -10;

  auto record = [&](const Vec& mu_raw, const Vec& mu_sat, const Vec& phi_plus,
                    const std::vector<std::int8_t>& codes, double energy) {
    tr.times.push_back(t);
    tr.x.push_back(x);
    tr.eta.push_back(eta);
    tr.mu_raw.push_back(mu_raw);
    tr.mu_sat.push_back(mu_sat);
    tr.phi_plus.push_back(phi_plus);
    tr.vertex_class.push_back(codes);
    tr.energy.push_back(energy);
    tr.mass.push_back(x.sum());
  };

  for (int step = 0; step <= nsteps; ++step) {
    // Controller output and, when adaptive, this step's frozen bounds.
    const Vec y = sys.h.gradient(x);
    const Vec zeta = sys.g.B.transpose() * y;
    const Vec mu_raw = cfg.proportional_only
                           ? Vec(-sys.pi.r.cwiseProduct(zeta))
                           : controller_output(sys.pi, zeta, eta);
    std::vector<std::int8_t> codes(n, kWhite);
    Vec phi_plus = Vec::Constant(m, kInf);
    if (adaptive) {
      Vec flows = mu_raw;
      if (sys.policy.classifier.flow_basis ==
          ClassifierOptions::FlowBasis::SaturatedMu) {
        flows = saturate(mu_raw, lo, hi);  // previous step's bounds
      }
      const VertexClassification cls =
          classify(sys.g, x, gamma, flows, sys.policy.classifier);
      codes = class_codes(cls, n);
      if (cls.black.empty()) {
        lo = Vec::Constant(m, -kInf);
        hi = Vec::Constant(m, kInf);
      } else {
        const AdaptiveBounds b = bounds_from_classification(sys.g, flows, cls);
        if (b.via_rescaling) ++tr.rescaling_fallback_steps;
        phi_plus = b.phi_plus;
        lo = -b.phi_plus;
        hi = b.phi_plus;
      }
      if (step > 0 && codes != codes_prev) {
        ++tr.classification_changes;
        if (step - last_change_step < 3) tr.chattering_warning = true;
        last_change_step = step;
      }
      codes_prev = codes;
    }

    const Vec mu_sat = saturate(mu_raw, lo, hi);
    if (step % cfg.record_every == 0 || step == nsteps) {
      record(mu_raw, mu_sat, phi_plus, codes, energy_prev);
    }
    if (step == nsteps) break;

    const double h = std::min(cfg.h, cfg.t_end - t);
    Vec xn, en;
    if (cfg.integrator == SimConfig::Integrator::EulerFixed) {
      const Deriv k1 = eval_rhs(sys, x, eta, lo, hi, e_dbar_ptr, cfg.proportional_only);
      xn = x + h * k1.x_dot;
      en = eta + h * k1.eta_dot;
    } else {
      const Deriv k1 = eval_rhs(sys, x, eta, lo, hi, e_dbar_ptr, cfg.proportional_only);
      const Deriv k2 = eval_rhs(sys, x + 0.5 * h * k1.x_dot, eta + 0.5 * h * k1.eta_dot,
                                lo, hi, e_dbar_ptr, cfg.proportional_only);
      const Deriv k3 = eval_rhs(sys, x + 0.5 * h * k2.x_dot, eta + 0.5 * h * k2.eta_dot,
                                lo, hi, e_dbar_ptr, cfg.proportional_only);
      const Deriv k4 = eval_rhs(sys, x + h * k3.x_dot, eta + h * k3.eta_dot,
                                lo, hi, e_dbar_ptr, cfg.proportional_only);
      xn = x + (h / 6.0) * (k1.x_dot + 2.0 * k2.x_dot + 2.0 * k3.x_dot + k4.x_dot);
      en = eta + (h / 6.0) * (k1.eta_dot + 2.0 * k2.eta_dot + 2.0 * k3.eta_dot + k4.eta_dot);
    }
    if (!xn.allFinite() || !en.allFinite()) {
      std::ostringstream msg;
      msg << "state became non-finite at t = " << t + h;
      throw NumericalError(msg.str());
    }

    tr.min_x_minus_gamma =
        std::min(tr.min_x_minus_gamma, (xn - gamma).minCoeff());
    if (adaptive && cfg.clamp_guard) {
      for (int i = 0; i < n; ++i) {
        if (xn[i] < gamma[i]) {
          const double deficit = gamma[i] - xn[i];
          tr.max_clamp_deficit = std::max(tr.max_clamp_deficit, deficit);
          tr.total_clamp_mass += deficit;
          xn[i] = gamma[i];
        }
      }
    }

    x = std::move(xn);
    eta = std::move(en);
    t += h;
    ++tr.steps;

    const double energy = sys.h.value(x) + sys.pi.hc.value(eta);
    tr.max_step_energy_increase =
        std::max(tr.max_step_energy_increase, energy - energy_prev);
    energy_prev = energy;
    tr.max_mass_drift = std::max(tr.max_mass_drift, std::abs(x.sum() - mass0));
  }
  return tr;
}

double monitor_conservation(const Trajectory& tr) {
  double drift = 0.0;
  for (double mass : tr.mass) drift = std::max(drift, std::abs(mass - tr.mass.front()));
  return drift;
}

double monitor_lyapunov(const Trajectory& tr) {
  double inc = 0.0;
  for (int k = 1; k < tr.samples(); ++k) {
    inc = std::max(inc, tr.energy[k] - tr.energy[k - 1]);
  }
  return inc;
}

ConsensusResult detect_consensus(const Trajectory& tr, const NetworkGraph& g,
                                 const VertexHamiltonian& h,
                                 const SimConfig& cfg) {
  ConsensusResult res;
  if (tr.samples() == 0) return res;
  int first = tr.samples();  // first sample index from which the residual stays small
  for (int k = tr.samples() - 1; k >= 0; --k) {
    const Vec rel = g.B.transpose() * h.gradient(tr.x[k]);
    const double r = g.m ? rel.cwiseAbs().maxCoeff() : 0.0;
    if (r > cfg.consensus_tol) break;
    first = k;
  }
  // The edge residual cannot see disagreement across disconnected
  // components; the global output spread can. For connected graphs the
  // residual condition already implies this one.
  const Vec y_final = h.gradient(tr.x.back());
  const double spread = y_final.maxCoeff() - y_final.minCoeff();
  if (first < tr.samples() &&
      spread <= cfg.consensus_tol * std::max(1, g.n - 1)) {
    res.reached = true;
    res.time = tr.times[first];
    res.alpha = y_final.mean();
  }
  return res;
}

}  // namespace flownet
