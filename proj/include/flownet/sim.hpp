#ifndef FLOWNET_SIM_HPP
#define FLOWNET_SIM_HPP

#include <cstdint>
#include <vector>

#include "flownet/controller.hpp"
#include "flownet/graph.hpp"
#include "flownet/hamiltonian.hpp"
#include "flownet/types.hpp"

namespace flownet {

struct SimConfig {
  double t_end = 30.0;
  double h = 1e-3;
  enum class Integrator { Rk4Fixed, EulerFixed };
  Integrator integrator = Integrator::Rk4Fixed;
  int record_every = 1;
  double consensus_tol = 1e-4;
  double lyapunov_slack = 1e-6;   // allowed per-step energy increase
  bool clamp_guard = true;        // adaptive runs: clamp post-step x to gamma
  bool proportional_only = false; // test harness: x_dot = -B R B' grad H

  void validate() const;
};

struct SimSystem {
  NetworkGraph g;
  VertexHamiltonian h;
  PIController pi;
  ConstraintPolicy policy;
  Disturbance dist;  // empty d_bar = no terminals driven
};

// Per-vertex classification code stored with each sample.
enum VertexClass : std::int8_t {
  kWhite = 0,
  kGray = 1,
  kBlack1 = 2,
  kBlack2 = 3,
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> x, eta, mu_raw, mu_sat, phi_plus;
  std::vector<double> energy;  // V = H + H_c at the sample
  std::vector<double> mass;    // 1'x at the sample
  std::vector<std::vector<std::int8_t>> vertex_class;

  // Tracked every step regardless of the sampling stride.
  int steps = 0;
  double min_x_minus_gamma = kInf;        // before any clamp
  double max_step_energy_increase = 0.0;  // max(0, V_{k+1} - V_k)
  double max_mass_drift = 0.0;
  double max_clamp_deficit = 0.0;
  double total_clamp_mass = 0.0;
  int classification_changes = 0;
  bool chattering_warning = false;
  int rescaling_fallback_steps = 0;  // bound came from the scaling route

  int samples() const { return static_cast<int>(times.size()); }
};

/// Fixed-step integration of the closed loop. Under the adaptive policy
/// the saturation bounds are recomputed from the state at the start of
/// every step and held fixed across the step's stages; x(0) >= gamma is
/// required and, with clamp_guard, post-step dips below gamma are clamped
/// with the deficit recorded. Throws ConfigError on bad setups and
/// NumericalError when the state stops being finite.
Trajectory integrate(const SimSystem& sys, const SystemState& s0,
                     const SimConfig& cfg);

/// max over samples of |1'x(t) - 1'x(0)|.
double monitor_conservation(const Trajectory& tr);

/// max(0, max over consecutive samples of V(t_{k+1}) - V(t_k)).
double monitor_lyapunov(const Trajectory& tr);

struct ConsensusResult {
  bool reached = false;
  double time = 0.0;
  double alpha = 0.0;  // common output value at the final sample
};

/// Consensus is reached at the first sample from which the output spread
/// ||B' grad H(x)||_inf stays within consensus_tol through the end of the
/// run; transient dips during oscillation do not count.
ConsensusResult detect_consensus(const Trajectory& tr, const NetworkGraph& g,
                                 const VertexHamiltonian& h,
                                 const SimConfig& cfg);

}  // namespace flownet

#endif
