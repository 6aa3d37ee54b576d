#ifndef FLOWNET_SCENARIO_HPP
#define FLOWNET_SCENARIO_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flownet/controller.hpp"
#include "flownet/graph.hpp"
#include "flownet/hamiltonian.hpp"
#include "flownet/sim.hpp"
#include "flownet/types.hpp"

namespace flownet {

/// Scenario parse failure; carries the offending line number.
class ParseError : public ConfigError {
 public:
  ParseError(int line, const std::string& msg)
      : ConfigError("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

enum class HamiltonianForm { Quadratic, EvenPower, Hydraulic };

enum class MonitorToggle { Auto, On, Off };

/// In-memory form of a scenario file. Scalar-or-list values are expanded
/// to full per-vertex / per-edge vectors while parsing, so serialization
/// round-trips exactly.
struct Scenario {
  struct Graph {
    int vertices = 0;
    std::vector<Edge> edges;          // 0-based; files use 1-based indices
    std::vector<Terminal> terminals;
  } graph;

  struct Hamiltonian {
    HamiltonianForm form = HamiltonianForm::Quadratic;
    Vec weight;      // quadratic / even_power
    Vec gamma;
    int exponent = 4;  // 2p, even_power only
    double rho = 1.0;
    double g = 9.81;
    Vec area;        // hydraulic
    Vec h_bar;
  } hamiltonian;

  struct Controller {
    Vec r;
    Vec hc_weight;
    ConstraintMode mode = ConstraintMode::Unconstrained;
    Vec lower, upper;  // constant_box
    Vec d_bar;         // empty = no disturbance
    bool allow_general_hc = false;
  } controller;

  struct Initial {
    Vec x0, eta0;
  } initial;

  struct Sim {
    SimConfig cfg;
    MonitorToggle check_lower_bound = MonitorToggle::Auto;
    MonitorToggle check_lyapunov = MonitorToggle::Auto;
    MonitorToggle check_conservation = MonitorToggle::Auto;
  } sim;

  ClassifierOptions classifier;

  bool operator==(const Scenario& other) const;
};

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string serialize_scenario(const Scenario& sc);

/// Applies "section.key=value" (e.g. "sim.t_end=50") on top of a parsed
/// scenario. Unknown keys throw ConfigError.
void apply_override(Scenario& sc, const std::string& assignment);

/// Builds the runnable system; validates cross-section invariants
/// (dimensions, x0 >= gamma and d_bar = 0 under the adaptive policy,
/// general H_c / R gated behind allow_general_hc).
SimSystem build_system(const Scenario& sc);

struct GuaranteeVerdict {
  std::string name;
  bool holds = false;
  std::vector<std::string> failed_hypotheses;
};

/// Structural analysis without simulation: connectivity, balance, cycles,
/// interior point and matching where the scenario provides bounds or a
/// disturbance, plus which convergence guarantees apply.
struct CheckReport {
  Connectivity conn;
  bool balanced = false;
  bool acyclic = false;
  std::optional<InteriorPointResult> interior;
  std::optional<MatchingResult> matching;
  std::vector<GuaranteeVerdict> guarantees;
  std::string to_text() const;
};

CheckReport check_scenario(const Scenario& sc);

struct MonitorResult {
  std::string name;
  bool enabled = false;
  bool passed = true;
  double value = 0.0;
  double threshold = 0.0;
};

struct RunReport {
  std::string scenario_name;
  std::vector<std::string> overrides;
  ConstraintMode mode = ConstraintMode::Unconstrained;
  int steps = 0;
  int samples = 0;
  double min_x_minus_gamma = 0.0;
  double conservation_drift = 0.0;
  double max_lyapunov_increment = 0.0;
  double max_clamp_deficit = 0.0;
  double total_clamp_mass = 0.0;
  int classification_changes = 0;
  bool chattering_warning = false;
  int rescaling_fallback_steps = 0;
  ConsensusResult consensus;
  std::vector<MonitorResult> monitors;
  std::vector<std::string> notes;
  CheckReport check;

  bool all_monitors_pass() const;
  std::string to_text() const;
};

struct RunOutcome {
  Trajectory trajectory;
  RunReport report;
  int exit_status = 0;  // 0 ok, 1 monitor violation
};

/// Simulates a scenario and assembles the report. Does not touch the
/// filesystem; see run_scenario_files for the CLI path.
RunOutcome run_scenario(const Scenario& sc, const std::string& name,
                        const std::vector<std::string>& overrides_applied = {});

/// Header `t,x_1..,eta_1..,mu_sat_1..,V,mass`, 12 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& tr, int n, int m);

/// Runs a scenario file and writes <stem>.csv / <stem>.report /
/// <stem>.check into out_dir. Returns the exit status (0 ok, 1 monitor
/// violation; parse and numerical failures throw).
int run_scenario_files(const std::string& path, const std::string& out_dir,
                       const std::vector<std::string>& overrides);

/// A flow rebalancing instance for the qp-solve subcommand: a graph, raw
/// flows, and either an explicit gray vertex set or (x, gamma) to classify.
struct QpInstance {
  Scenario::Graph graph;
  Vec mu;
  std::vector<int> gray;  // explicit gray designation (0-based)
  bool has_state = false;
  Vec x, gamma;
  ClassifierOptions classifier;
};

QpInstance parse_qp_instance(const std::string& text);

/// Solves the instance along both routes and formats phi_star, phi_plus,
/// the KKT residual, and the deviation between the two.
std::string qp_solve_text(const QpInstance& inst);

std::string format_number(double v);  // 12 significant digits

}  // namespace flownet

#endif
