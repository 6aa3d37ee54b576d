#ifndef FLOWNET_HAMILTONIAN_HPP
#define FLOWNET_HAMILTONIAN_HPP

#include "flownet/types.hpp"

namespace flownet {

/// Cylindric-reservoir parameters: storage x_i = S_i h_i, pressure
/// rho g (x_i - S_i h_bar_i) / S_i.
struct HydraulicParams {
  Vec S;              // bottom areas, > 0
  double rho = 1.0;   // fluid density, > 0
  double g = 9.81;    // gravity; scenarios may override
  Vec h_bar;          // reference heights (empty = zero)
};

/// Separable storage energy H(x) = sum_i H_i(x_i) with every H_i strictly
/// convex, C^2, minimized at gamma_i. Two families:
///   quadratic:  H_i = (w_i/2)(x_i - gamma_i)^2
///   even power: H_i = (w_i/2p)(x_i - gamma_i)^(2p)
/// A Bregman shift re-centers the minimum at a reference point; quadratics
/// stay quadratic, even powers pick up an affine correction.
class VertexHamiltonian {
 public:
  VertexHamiltonian() = default;  // empty; assign from a factory before use

  static VertexHamiltonian quadratic(Vec weight, Vec gamma);
  static VertexHamiltonian even_power(Vec weight, Vec gamma, int half_power);
  static VertexHamiltonian hydraulic(const HydraulicParams& p);

  int size() const { return static_cast<int>(w_.size()); }
  bool is_quadratic() const { return p_ == 1; }
  const Vec& weights() const { return w_; }

  /// Per-vertex minimizers after any shift; the lower-bound vector gamma.
  const Vec& minimizers() const { return min_; }

  double value_at(int i, double xi) const;
  double gradient_at(int i, double xi) const;
  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;

  /// Bregman distance about x_bar: H_i(x) - H_i'(x_bar_i)(x - x_bar_i)
  /// - H_i(x_bar_i). Minimum value 0 at x_bar.
  VertexHamiltonian bregman_shift(const Vec& x_bar) const;

 private:
  Vec w_;
  Vec gamma_;   // center of the base form
  int p_ = 1;   // half exponent; 1 = quadratic
  Vec min_;     // effective minimizers (= gamma_ unless shifted)
  bool shifted_ = false;
  Vec shift_slope_;  // base gradient at the shift reference
  Vec shift_base_;   // base value at the shift reference
};

/// Controller energy H_c(eta) = 1/2 sum_i q_i eta_i^2 with q_i > 0.
struct ControllerHamiltonian {
  Vec q;

  static ControllerHamiltonian unit(int m) {
    return ControllerHamiltonian{Vec::Ones(m)};
  }
  bool is_unit() const { return (q.array() == 1.0).all(); }
  double value(const Vec& eta) const { return 0.5 * eta.dot(q.cwiseProduct(eta)); }
  Vec gradient(const Vec& eta) const { return q.cwiseProduct(eta); }
};

/// Plant + controller state.
struct SystemState {
  Vec x;
  Vec eta;
};

/// V(x, eta) = H(x) + H_c(eta); zero exactly at (gamma, 0).
double total_energy(const VertexHamiltonian& h, const ControllerHamiltonian& hc,
                    const SystemState& s);

/// Lyapunov candidate for a matched equilibrium eta_bar:
/// H(x) + H_c(eta) - grad H_c(eta_bar)'(eta - eta_bar) - H_c(eta_bar).
class ShiftedStorage {
 public:
  ShiftedStorage(VertexHamiltonian h, ControllerHamiltonian hc, Vec eta_bar);
  double operator()(const Vec& x, const Vec& eta) const;

 private:
  VertexHamiltonian h_;
  ControllerHamiltonian hc_;
  Vec eta_bar_;
  Vec grad_bar_;
  double hc_bar_;
};

}  // namespace flownet

#endif
