#include "flownet/hamiltonian.hpp"

#include <cmath>
#include <utility>

namespace flownet {
namespace {

void require_positive(const Vec& v, const char* what) {
  for (int i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0) || !std::isfinite(v[i])) {
      throw ConfigError(std::string(what) + " must be strictly positive and finite");
    }
  }
}

}  // namespace

VertexHamiltonian VertexHamiltonian::quadratic(Vec weight, Vec gamma) {
  if (weight.size() != gamma.size()) {
    throw ConfigError("hamiltonian weight/gamma length mismatch");
  }
  require_positive(weight, "hamiltonian weight");
  VertexHamiltonian h;
  h.w_ = std::move(weight);
  h.gamma_ = std::move(gamma);
  h.p_ = 1;
  h.min_ = h.gamma_;
  return h;
}

VertexHamiltonian VertexHamiltonian::even_power(Vec weight, Vec gamma,
                                                int half_power) {
  // p capped at 4: higher powers are numerically flat near the minimum.
  if (half_power < 1 || half_power > 4) {
    throw ConfigError("even-power hamiltonian needs exponent 2p with p in 1..4");
  }
  VertexHamiltonian h = quadratic(std::move(weight), std::move(gamma));
  h.p_ = half_power;
  return h;
}

VertexHamiltonian VertexHamiltonian::hydraulic(const HydraulicParams& p) {
  require_positive(p.S, "bottom area");
  if (!(p.rho > 0.0) || !(p.g > 0.0)) {
    throw ConfigError("rho and g must be strictly positive");
  }
  Vec h_bar = p.h_bar.size() ? p.h_bar : Vec::Zero(p.S.size());
  if (h_bar.size() != p.S.size()) {
    throw ConfigError("h_bar length differs from area length");
  }
  // H_i = rho g / (2 S_i) * (x_i - S_i h_bar_i)^2, pressure rho g (h - h_bar)
  Vec w = (p.rho * p.g) * p.S.cwiseInverse();
  Vec gamma = p.S.cwiseProduct(h_bar);
  return quadratic(std::move(w), std::move(gamma));
}

double VertexHamiltonian::value_at(int i, double xi) const {
  const double d = xi - gamma_[i];
  double base;
  if (p_ == 1) {
    base = 0.5 * w_[i] * d * d;
  } else {
    base = w_[i] / (2.0 * p_) * std::pow(d, 2 * p_);
  }
  if (!shifted_) return base;
  return base - shift_slope_[i] * (xi - min_[i]) - shift_base_[i];
}

double VertexHamiltonian::gradient_at(int i, double xi) const {
  const double d = xi - gamma_[i];
  double base;
  if (p_ == 1) {
    base = w_[i] * d;
  } else {
    base = w_[i] * std::pow(d, 2 * p_ - 1);
  }
  return shifted_ ? base - shift_slope_[i] : base;
}

double VertexHamiltonian::value(const Vec& x) const {
  double v = 0.0;
  for (int i = 0; i < size(); ++i) v += value_at(i, x[i]);
  return v;
}

Vec VertexHamiltonian::gradient(const Vec& x) const {
  Vec y(size());
  for (int i = 0; i < size(); ++i) y[i] = gradient_at(i, x[i]);
  return y;
}

VertexHamiltonian VertexHamiltonian::bregman_shift(const Vec& x_bar) const {
  if (x_bar.size() != size()) {
    throw ConfigError("bregman reference length differs from vertex count");
  }
  VertexHamiltonian out = *this;
  if (p_ == 1) {
    // Quadratics re-center exactly.
    out.gamma_ = x_bar;
    out.min_ = x_bar;
    out.shifted_ = false;
    return out;
  }
  // Shifting twice collapses to one shift about the newest reference, so
  // slope and offset always come from the unshifted base form.
  out.min_ = x_bar;
  out.shifted_ = true;
  out.shift_slope_.resize(size());
  out.shift_base_.resize(size());
  for (int i = 0; i < size(); ++i) {
    const double d = x_bar[i] - gamma_[i];
    out.shift_slope_[i] = w_[i] * std::pow(d, 2 * p_ - 1);
    out.shift_base_[i] = w_[i] / (2.0 * p_) * std::pow(d, 2 * p_);
  }
  return out;
}

double total_energy(const VertexHamiltonian& h, const ControllerHamiltonian& hc,
                    const SystemState& s) {
  return h.value(s.x) + hc.value(s.eta);
}

ShiftedStorage::ShiftedStorage(VertexHamiltonian h, ControllerHamiltonian hc,
                               Vec eta_bar)
    : h_(std::move(h)), hc_(std::move(hc)), eta_bar_(std::move(eta_bar)) {
  grad_bar_ = hc_.gradient(eta_bar_);
  hc_bar_ = hc_.value(eta_bar_);
}

double ShiftedStorage::operator()(const Vec& x, const Vec& eta) const {
  return h_.value(x) + hc_.value(eta) - grad_bar_.dot(eta - eta_bar_) - hc_bar_;
}

}  // namespace flownet
