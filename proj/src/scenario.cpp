#include "flownet/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "flownet/adaptive.hpp"

namespace flownet {
namespace {

struct RawEntry {
  std::string key;
  std::string value;
  int line = 0;
};
using RawSections = std::map<std::string, std::vector<RawEntry>>;

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

RawSections tokenize(const std::string& text) {
  RawSections out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(lineno, "unterminated section header");
      section = lower(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ParseError(lineno, "empty section name");
      out[section];  // section may legitimately stay empty
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(lineno, "expected key = value, got '" + line + "'");
    }
    if (section.empty()) {
      throw ParseError(lineno, "key outside any [section]");
    }
    RawEntry e;
    e.key = lower(trim(line.substr(0, eq)));
    e.value = trim(line.substr(eq + 1));
    e.line = lineno;
    if (e.key.empty()) throw ParseError(lineno, "empty key");
    out[section].push_back(std::move(e));
  }
  return out;
}

double parse_double(const std::string& tok, int line) {
  const std::string t = lower(tok);
  if (t == "inf" || t == "+inf") return kInf;
  if (t == "-inf") return -kInf;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') {
    throw ParseError(line, "not a number: '" + tok + "'");
  }
  return v;
}

long parse_int(const std::string& tok, int line) {
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0') {
    throw ParseError(line, "not an integer: '" + tok + "'");
  }
  return v;
}

bool parse_bool(const std::string& tok, int line) {
  const std::string t = lower(tok);
  if (t == "true" || t == "on" || t == "1") return true;
  if (t == "false" || t == "off" || t == "0") return false;
  throw ParseError(line, "not a boolean: '" + tok + "'");
}

MonitorToggle parse_toggle(const std::string& tok, int line) {
  const std::string t = lower(tok);
  if (t == "auto") return MonitorToggle::Auto;
  if (t == "on" || t == "true") return MonitorToggle::On;
  if (t == "off" || t == "false") return MonitorToggle::Off;
  throw ParseError(line, "expected auto|on|off, got '" + tok + "'");
}

std::vector<std::string> split_tokens(const std::string& value) {
  std::vector<std::string> toks;
  std::istringstream in(value);
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

// Scalar values broadcast to the target length; lists must match exactly.
Vec parse_vec(const std::string& value, int size, int line, const char* what) {
  const std::vector<std::string> toks = split_tokens(value);
  if (toks.empty()) throw ParseError(line, std::string(what) + " is empty");
  Vec v(size);
  if (static_cast<int>(toks.size()) == 1) {
    v.setConstant(parse_double(toks[0], line));
  } else if (static_cast<int>(toks.size()) == size) {
    for (int i = 0; i < size; ++i) v[i] = parse_double(toks[i], line);
  } else {
    std::ostringstream msg;
    msg << what << " needs 1 or " << size << " values, got " << toks.size();
    throw ParseError(line, msg.str());
  }
  return v;
}

const std::vector<RawEntry>& section_entries(const RawSections& raw,
                                             const std::string& name) {
  static const std::vector<RawEntry> empty;
  auto it = raw.find(name);
  return it == raw.end() ? empty : it->second;
}

void assemble_graph(Scenario& sc, const RawSections& raw) {
  bool saw_vertices = false;
  for (const RawEntry& e : section_entries(raw, "graph")) {
    if (e.key == "vertices") {
      const long n = parse_int(e.value, e.line);
      if (n < 1) throw ParseError(e.line, "vertices must be >= 1");
      sc.graph.vertices = static_cast<int>(n);
      saw_vertices = true;
    } else if (e.key == "edge") {
      const auto toks = split_tokens(e.value);
      if (toks.size() != 2) throw ParseError(e.line, "edge needs 'tail head'");
      Edge edge;
      edge.tail = static_cast<int>(parse_int(toks[0], e.line)) - 1;
      edge.head = static_cast<int>(parse_int(toks[1], e.line)) - 1;
      sc.graph.edges.push_back(edge);
    } else if (e.key == "terminal") {
      const auto toks = split_tokens(e.value);
      if (toks.size() != 2) throw ParseError(e.line, "terminal needs 'vertex sign'");
      Terminal t;
      t.vertex = static_cast<int>(parse_int(toks[0], e.line)) - 1;
      t.sign = static_cast<int>(parse_int(toks[1], e.line));
      sc.graph.terminals.push_back(t);
    } else {
      throw ParseError(e.line, "unknown graph key '" + e.key + "'");
    }
  }
  if (!saw_vertices) throw ConfigError("[graph] section must set vertices");
  // Validate indices here so errors carry the offending line.
  for (const RawEntry& e : section_entries(raw, "graph")) {
    if (e.key == "edge") {
      const auto toks = split_tokens(e.value);
      const long tail = parse_int(toks[0], e.line), head = parse_int(toks[1], e.line);
      if (tail < 1 || tail > sc.graph.vertices || head < 1 || head > sc.graph.vertices) {
        std::ostringstream msg;
        msg << "edge '" << e.value << "' references a vertex outside 1.."
            << sc.graph.vertices;
        throw ParseError(e.line, msg.str());
      }
      if (tail == head) throw ParseError(e.line, "self-loop edges are not allowed");
    } else if (e.key == "terminal") {
      const auto toks = split_tokens(e.value);
      const long v = parse_int(toks[0], e.line), s = parse_int(toks[1], e.line);
      if (v < 1 || v > sc.graph.vertices) {
        throw ParseError(e.line, "terminal vertex outside the graph");
      }
      if (s != 1 && s != -1) throw ParseError(e.line, "terminal sign must be +1 or -1");
    }
  }
}

void set_hamiltonian_value(Scenario& sc, const RawEntry& e) {
  const int n = sc.graph.vertices;
  if (e.key == "form") {
    const std::string f = lower(e.value);
    if (f == "quadratic") sc.hamiltonian.form = HamiltonianForm::Quadratic;
    else if (f == "even_power") sc.hamiltonian.form = HamiltonianForm::EvenPower;
    else if (f == "hydraulic") sc.hamiltonian.form = HamiltonianForm::Hydraulic;
    else throw ParseError(e.line, "unknown hamiltonian form '" + e.value + "'");
  } else if (e.key == "weight") {
    sc.hamiltonian.weight = parse_vec(e.value, n, e.line, "weight");
  } else if (e.key == "gamma") {
    sc.hamiltonian.gamma = parse_vec(e.value, n, e.line, "gamma");
  } else if (e.key == "exponent") {
    sc.hamiltonian.exponent = static_cast<int>(parse_int(e.value, e.line));
  } else if (e.key == "rho") {
    sc.hamiltonian.rho = parse_double(e.value, e.line);
  } else if (e.key == "g") {
    sc.hamiltonian.g = parse_double(e.value, e.line);
  } else if (e.key == "area") {
    sc.hamiltonian.area = parse_vec(e.value, n, e.line, "area");
  } else if (e.key == "h_bar") {
    sc.hamiltonian.h_bar = parse_vec(e.value, n, e.line, "h_bar");
  } else {
    throw ParseError(e.line, "unknown hamiltonian key '" + e.key + "'");
  }
}

void set_controller_value(Scenario& sc, const RawEntry& e) {
  const int m = static_cast<int>(sc.graph.edges.size());
  const int k = static_cast<int>(sc.graph.terminals.size());
  if (e.key == "r") {
    sc.controller.r = parse_vec(e.value, m, e.line, "r");
  } else if (e.key == "hc_weight") {
    sc.controller.hc_weight = parse_vec(e.value, m, e.line, "hc_weight");
  } else if (e.key == "mode") {
    const std::string v = lower(e.value);
    if (v == "unconstrained") sc.controller.mode = ConstraintMode::Unconstrained;
    else if (v == "constant_box") sc.controller.mode = ConstraintMode::ConstantBox;
    else if (v == "adaptive") sc.controller.mode = ConstraintMode::Adaptive;
    else throw ParseError(e.line, "unknown constraint mode '" + e.value + "'");
  } else if (e.key == "lower") {
    sc.controller.lower = parse_vec(e.value, m, e.line, "lower");
  } else if (e.key == "upper") {
    sc.controller.upper = parse_vec(e.value, m, e.line, "upper");
  } else if (e.key == "d_bar") {
    if (k == 0) throw ParseError(e.line, "d_bar given but the graph has no terminals");
    sc.controller.d_bar = parse_vec(e.value, k, e.line, "d_bar");
  } else if (e.key == "allow_general_hc") {
    sc.controller.allow_general_hc = parse_bool(e.value, e.line);
  } else {
    throw ParseError(e.line, "unknown controller key '" + e.key + "'");
  }
}

void set_initial_value(Scenario& sc, const RawEntry& e) {
  if (e.key == "x0") {
    sc.initial.x0 = parse_vec(e.value, sc.graph.vertices, e.line, "x0");
  } else if (e.key == "eta0") {
    sc.initial.eta0 =
        parse_vec(e.value, static_cast<int>(sc.graph.edges.size()), e.line, "eta0");
  } else {
    throw ParseError(e.line, "unknown initial key '" + e.key + "'");
  }
}

void set_sim_value(Scenario& sc, const RawEntry& e) {
  SimConfig& cfg = sc.sim.cfg;
  if (e.key == "t_end") cfg.t_end = parse_double(e.value, e.line);
  else if (e.key == "h") cfg.h = parse_double(e.value, e.line);
  else if (e.key == "integrator") {
    const std::string v = lower(e.value);
    if (v == "rk4" || v == "rk4_fixed") cfg.integrator = SimConfig::Integrator::Rk4Fixed;
    else if (v == "euler" || v == "euler_fixed") cfg.integrator = SimConfig::Integrator::EulerFixed;
    else throw ParseError(e.line, "unknown integrator '" + e.value + "'");
  } else if (e.key == "record_every") {
    cfg.record_every = static_cast<int>(parse_int(e.value, e.line));
  } else if (e.key == "consensus_tol") cfg.consensus_tol = parse_double(e.value, e.line);
  else if (e.key == "lyapunov_slack") cfg.lyapunov_slack = parse_double(e.value, e.line);
  else if (e.key == "clamp_guard") cfg.clamp_guard = parse_bool(e.value, e.line);
  else if (e.key == "proportional_only") cfg.proportional_only = parse_bool(e.value, e.line);
  else if (e.key == "check_lower_bound") sc.sim.check_lower_bound = parse_toggle(e.value, e.line);
  else if (e.key == "check_lyapunov") sc.sim.check_lyapunov = parse_toggle(e.value, e.line);
  else if (e.key == "check_conservation") sc.sim.check_conservation = parse_toggle(e.value, e.line);
  else throw ParseError(e.line, "unknown sim key '" + e.key + "'");
}

void set_classifier_value(Scenario& sc, const RawEntry& e) {
  if (e.key == "gray_tolerance") {
    sc.classifier.gray_tolerance = parse_double(e.value, e.line);
    if (!(sc.classifier.gray_tolerance > 0.0)) {
      throw ParseError(e.line, "gray_tolerance must be strictly positive");
    }
  } else if (e.key == "black2_closure") {
    const std::string v = lower(e.value);
    if (v == "transitive") sc.classifier.black2_closure = ClassifierOptions::Closure::Transitive;
    else if (v == "one_level") sc.classifier.black2_closure = ClassifierOptions::Closure::OneLevel;
    else throw ParseError(e.line, "expected transitive|one_level");
  } else if (e.key == "flow_basis") {
    const std::string v = lower(e.value);
    if (v == "raw_mu") sc.classifier.flow_basis = ClassifierOptions::FlowBasis::RawMu;
    else if (v == "saturated_mu") sc.classifier.flow_basis = ClassifierOptions::FlowBasis::SaturatedMu;
    else throw ParseError(e.line, "expected raw_mu|saturated_mu");
  } else {
    throw ParseError(e.line, "unknown classifier key '" + e.key + "'");
  }
}

Scenario assemble(const RawSections& raw) {
  for (const auto& [name, entries] : raw) {
    (void)entries;
    if (name != "graph" && name != "hamiltonian" && name != "controller" &&
        name != "initial" && name != "sim" && name != "classifier") {
      throw ConfigError("unknown section [" + name + "]");
    }
  }
  Scenario sc;
  assemble_graph(sc, raw);
  const int n = sc.graph.vertices;
  const int m = static_cast<int>(sc.graph.edges.size());
  sc.hamiltonian.weight = Vec::Ones(n);
  sc.hamiltonian.gamma = Vec::Zero(n);
  sc.controller.r = Vec::Ones(m);
  sc.controller.hc_weight = Vec::Ones(m);
  for (const RawEntry& e : section_entries(raw, "hamiltonian")) set_hamiltonian_value(sc, e);
  for (const RawEntry& e : section_entries(raw, "controller")) set_controller_value(sc, e);
  for (const RawEntry& e : section_entries(raw, "initial")) set_initial_value(sc, e);
  for (const RawEntry& e : section_entries(raw, "sim")) set_sim_value(sc, e);
  for (const RawEntry& e : section_entries(raw, "classifier")) set_classifier_value(sc, e);
  if (sc.initial.x0.size() != n) throw ConfigError("[initial] must set x0");
  if (sc.initial.eta0.size() != m) throw ConfigError("[initial] must set eta0");
  if (sc.hamiltonian.form == HamiltonianForm::Hydraulic && sc.hamiltonian.area.size() == 0) {
    sc.hamiltonian.area = Vec::Ones(n);
  }
  return sc;
}

std::string fmt17(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string vec_to_string(const Vec& v) {
  std::string out;
  for (int i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += fmt17(v[i]);
  }
  return out;
}

const char* form_name(HamiltonianForm f) {
  switch (f) {
    case HamiltonianForm::Quadratic: return "quadratic";
    case HamiltonianForm::EvenPower: return "even_power";
    case HamiltonianForm::Hydraulic: return "hydraulic";
  }
  return "quadratic";
}

const char* mode_name(ConstraintMode m) {
  switch (m) {
    case ConstraintMode::Unconstrained: return "unconstrained";
    case ConstraintMode::ConstantBox: return "constant_box";
    case ConstraintMode::Adaptive: return "adaptive";
  }
  return "unconstrained";
}

const char* toggle_name(MonitorToggle t) {
  switch (t) {
    case MonitorToggle::Auto: return "auto";
    case MonitorToggle::On: return "on";
    case MonitorToggle::Off: return "off";
  }
  return "auto";
}

}  // namespace

bool Scenario::operator==(const Scenario& other) const {
  auto veq = [](const Vec& a, const Vec& b) {
    if (a.size() != b.size()) return false;
    for (int i = 0; i < a.size(); ++i) {
      if (a[i] != b[i] && !(std::isnan(a[i]) && std::isnan(b[i]))) return false;
    }
    return true;
  };
  const bool graph_eq =
      graph.vertices == other.graph.vertices &&
      graph.edges.size() == other.graph.edges.size() &&
      graph.terminals.size() == other.graph.terminals.size();
  if (!graph_eq) return false;
  for (size_t i = 0; i < graph.edges.size(); ++i) {
    if (graph.edges[i].tail != other.graph.edges[i].tail ||
        graph.edges[i].head != other.graph.edges[i].head)
      return false;
  }
  for (size_t i = 0; i < graph.terminals.size(); ++i) {
    if (graph.terminals[i].vertex != other.graph.terminals[i].vertex ||
        graph.terminals[i].sign != other.graph.terminals[i].sign)
      return false;
  }
  return hamiltonian.form == other.hamiltonian.form &&
         veq(hamiltonian.weight, other.hamiltonian.weight) &&
         veq(hamiltonian.gamma, other.hamiltonian.gamma) &&
         hamiltonian.exponent == other.hamiltonian.exponent &&
         hamiltonian.rho == other.hamiltonian.rho &&
         hamiltonian.g == other.hamiltonian.g &&
         veq(hamiltonian.area, other.hamiltonian.area) &&
         veq(hamiltonian.h_bar, other.hamiltonian.h_bar) &&
         veq(controller.r, other.controller.r) &&
         veq(controller.hc_weight, other.controller.hc_weight) &&
         controller.mode == other.controller.mode &&
         veq(controller.lower, other.controller.lower) &&
         veq(controller.upper, other.controller.upper) &&
         veq(controller.d_bar, other.controller.d_bar) &&
         controller.allow_general_hc == other.controller.allow_general_hc &&
         veq(initial.x0, other.initial.x0) && veq(initial.eta0, other.initial.eta0) &&
         sim.cfg.t_end == other.sim.cfg.t_end && sim.cfg.h == other.sim.cfg.h &&
         sim.cfg.integrator == other.sim.cfg.integrator &&
         sim.cfg.record_every == other.sim.cfg.record_every &&
         sim.cfg.consensus_tol == other.sim.cfg.consensus_tol &&
         sim.cfg.lyapunov_slack == other.sim.cfg.lyapunov_slack &&
         sim.cfg.clamp_guard == other.sim.cfg.clamp_guard &&
         sim.cfg.proportional_only == other.sim.cfg.proportional_only &&
         sim.check_lower_bound == other.sim.check_lower_bound &&
         sim.check_lyapunov == other.sim.check_lyapunov &&
         sim.check_conservation == other.sim.check_conservation &&
         classifier.gray_tolerance == other.classifier.gray_tolerance &&
         classifier.black2_closure == other.classifier.black2_closure &&
         classifier.flow_basis == other.classifier.flow_basis;
}

Scenario parse_scenario(const std::string& text) { return assemble(tokenize(text)); }

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& sc) {
  std::ostringstream os;
  os << "[graph]\n";
  os << "vertices = " << sc.graph.vertices << "\n";
  for (const Edge& e : sc.graph.edges) {
    os << "edge = " << (e.tail + 1) << " " << (e.head + 1) << "\n";
  }
  for (const Terminal& t : sc.graph.terminals) {
    os << "terminal = " << (t.vertex + 1) << " " << t.sign << "\n";
  }
  os << "\n[hamiltonian]\n";
  os << "form = " << form_name(sc.hamiltonian.form) << "\n";
  os << "weight = " << vec_to_string(sc.hamiltonian.weight) << "\n";
  os << "gamma = " << vec_to_string(sc.hamiltonian.gamma) << "\n";
  if (sc.hamiltonian.form == HamiltonianForm::EvenPower) {
    os << "exponent = " << sc.hamiltonian.exponent << "\n";
  }
  if (sc.hamiltonian.form == HamiltonianForm::Hydraulic) {
    os << "rho = " << fmt17(sc.hamiltonian.rho) << "\n";
    os << "g = " << fmt17(sc.hamiltonian.g) << "\n";
    os << "area = " << vec_to_string(sc.hamiltonian.area) << "\n";
    if (sc.hamiltonian.h_bar.size()) os << "h_bar = " << vec_to_string(sc.hamiltonian.h_bar) << "\n";
  }
  os << "\n[controller]\n";
  os << "r = " << vec_to_string(sc.controller.r) << "\n";
  os << "hc_weight = " << vec_to_string(sc.controller.hc_weight) << "\n";
  os << "mode = " << mode_name(sc.controller.mode) << "\n";
  if (sc.controller.lower.size()) os << "lower = " << vec_to_string(sc.controller.lower) << "\n";
  if (sc.controller.upper.size()) os << "upper = " << vec_to_string(sc.controller.upper) << "\n";
  if (sc.controller.d_bar.size()) os << "d_bar = " << vec_to_string(sc.controller.d_bar) << "\n";
  if (sc.controller.allow_general_hc) os << "allow_general_hc = true\n";
  os << "\n[initial]\n";
  os << "x0 = " << vec_to_string(sc.initial.x0) << "\n";
  os << "eta0 = " << vec_to_string(sc.initial.eta0) << "\n";
  os << "\n[sim]\n";
  os << "t_end = " << fmt17(sc.sim.cfg.t_end) << "\n";
  os << "h = " << fmt17(sc.sim.cfg.h) << "\n";
  os << "integrator = "
     << (sc.sim.cfg.integrator == SimConfig::Integrator::Rk4Fixed ? "rk4" : "euler") << "\n";
  os << "record_every = " << sc.sim.cfg.record_every << "\n";
  os << "consensus_tol = " << fmt17(sc.sim.cfg.consensus_tol) << "\n";
  os << "lyapunov_slack = " << fmt17(sc.sim.cfg.lyapunov_slack) << "\n";
  os << "clamp_guard = " << (sc.sim.cfg.clamp_guard ? "true" : "false") << "\n";
  if (sc.sim.cfg.proportional_only) os << "proportional_only = true\n";
  os << "check_lower_bound = " << toggle_name(sc.sim.check_lower_bound) << "\n";
  os << "check_lyapunov = " << toggle_name(sc.sim.check_lyapunov) << "\n";
  os << "check_conservation = " << toggle_name(sc.sim.check_conservation) << "\n";
  os << "\n[classifier]\n";
  os << "gray_tolerance = " << fmt17(sc.classifier.gray_tolerance) << "\n";
  os << "black2_closure = "
     << (sc.classifier.black2_closure == ClassifierOptions::Closure::Transitive
             ? "transitive" : "one_level") << "\n";
  os << "flow_basis = "
     << (sc.classifier.flow_basis == ClassifierOptions::FlowBasis::RawMu
             ? "raw_mu" : "saturated_mu") << "\n";
  return os.str();
}

void apply_override(Scenario& sc, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  const std::string path = lower(trim(assignment.substr(0, eq)));
  const std::string value = trim(assignment.substr(eq + 1));
  const size_t dot = path.find('.');
  if (dot == std::string::npos) {
    throw ConfigError("override key '" + path + "' needs a section prefix");
  }
  RawEntry e{path.substr(dot + 1), value, 0};
  const std::string section = path.substr(0, dot);
  try {
    if (section == "hamiltonian") set_hamiltonian_value(sc, e);
    else if (section == "controller") set_controller_value(sc, e);
    else if (section == "initial") set_initial_value(sc, e);
    else if (section == "sim") set_sim_value(sc, e);
    else if (section == "classifier") set_classifier_value(sc, e);
    else if (section == "graph") {
      throw ConfigError("graph topology cannot be overridden; edit the scenario file");
    } else {
      throw ConfigError("unknown override section '" + section + "'");
    }
  } catch (const ParseError& err) {
    // strip the meaningless line number off override diagnostics
    const std::string what = err.what();
    const size_t colon = what.find(": ");
    throw ConfigError("override " + path + ": " +
                      (colon == std::string::npos ? what : what.substr(colon + 2)));
  }
}

SimSystem build_system(const Scenario& sc) {
  SimSystem sys;
  sys.g = build_graph(sc.graph.vertices, sc.graph.edges, sc.graph.terminals);
  switch (sc.hamiltonian.form) {
    case HamiltonianForm::Quadratic:
      sys.h = VertexHamiltonian::quadratic(sc.hamiltonian.weight, sc.hamiltonian.gamma);
      break;
    case HamiltonianForm::EvenPower: {
      if (sc.hamiltonian.exponent % 2 != 0) {
        throw ConfigError("even_power exponent must be even");
      }
      sys.h = VertexHamiltonian::even_power(sc.hamiltonian.weight, sc.hamiltonian.gamma,
                                            sc.hamiltonian.exponent / 2);
      break;
    }
    case HamiltonianForm::Hydraulic: {
      HydraulicParams p;
      p.S = sc.hamiltonian.area;
      p.rho = sc.hamiltonian.rho;
      p.g = sc.hamiltonian.g;
      p.h_bar = sc.hamiltonian.h_bar;
      sys.h = VertexHamiltonian::hydraulic(p);
      break;
    }
  }
  sys.pi.r = sc.controller.r;
  sys.pi.hc = ControllerHamiltonian{sc.controller.hc_weight};
  sys.pi.validate(sys.g.m);
  sys.policy.mode = sc.controller.mode;
  sys.policy.classifier = sc.classifier;
  if (sc.controller.mode == ConstraintMode::ConstantBox) {
    if (sc.controller.lower.size() != sys.g.m || sc.controller.upper.size() != sys.g.m) {
      throw ConfigError("constant_box mode needs per-edge lower and upper bounds");
    }
    sys.policy.box.lower = sc.controller.lower;
    sys.policy.box.upper = sc.controller.upper;
    sys.policy.box.validate();
  }
  sys.dist.d_bar = sc.controller.d_bar;

  if (sc.controller.mode == ConstraintMode::Adaptive) {
    if (sc.controller.d_bar.size() &&
        sc.controller.d_bar.cwiseAbs().maxCoeff() > 0.0) {
      throw ConfigError(
          "adaptive flow bounds are stated for zero terminal in/outflows; "
          "set d_bar = 0 or use another constraint mode");
    }
    for (int i = 0; i < sys.g.n; ++i) {
      if (sc.initial.x0[i] < sys.h.minimizers()[i]) {
        std::ostringstream msg;
        msg << "adaptive policy requires x0 >= gamma; vertex " << (i + 1)
            << " starts below its bound";
        throw ConfigError(msg.str());
      }
    }
    const bool general =
        (sys.pi.r.array() != 1.0).any() || !sys.pi.hc.is_unit();
    if (general && !sc.controller.allow_general_hc) {
      throw ConfigError(
          "adaptive bounds with non-unit gains or controller weights are "
          "outside the stated guarantee; set allow_general_hc = true to "
          "run anyway");
    }
  }
  return sys;
}

namespace {

void guarantee(std::vector<GuaranteeVerdict>& out, const std::string& name,
               std::vector<std::pair<std::string, bool>> hypotheses) {
  GuaranteeVerdict v;
  v.name = name;
  v.holds = true;
  for (auto& [hyp, ok] : hypotheses) {
    if (!ok) {
      v.holds = false;
      v.failed_hypotheses.push_back(hyp);
    }
  }
  out.push_back(std::move(v));
}

}  // namespace

CheckReport check_scenario(const Scenario& sc) {
  CheckReport rep;
  const NetworkGraph g = build_graph(sc.graph.vertices, sc.graph.edges, sc.graph.terminals);
  rep.conn = connectivity(g);
  rep.balanced = is_balanced(g);
  rep.acyclic = is_acyclic(g);

  const bool has_box = sc.controller.mode == ConstraintMode::ConstantBox &&
                       sc.controller.lower.size() == g.m &&
                       sc.controller.upper.size() == g.m;
  BoxBounds box;
  NormalizedConstraints norm;
  bool compatible = false;
  bool common_interval = false;
  if (has_box) {
    box.lower = sc.controller.lower;
    box.upper = sc.controller.upper;
    box.validate();
    rep.interior = interior_point_condition(g, box);
    norm = normalize_constraints(g, box);
    compatible = true;
    double lo = -kInf, hi = kInf;
    for (int i = 0; i < g.m; ++i) {
      compatible = compatible && norm.bounds.lower[i] >= 0.0 &&
                   !(norm.bounds.lower[i] == 0.0 && norm.bounds.upper[i] == 0.0);
      lo = std::max(lo, norm.bounds.lower[i]);
      hi = std::min(hi, norm.bounds.upper[i]);
    }
    common_interval = g.m == 0 || lo < hi;
  }

  ControllerHamiltonian hc{sc.controller.hc_weight};
  Disturbance dist;
  dist.d_bar = sc.controller.d_bar.size() ? sc.controller.d_bar
                                          : Vec::Zero(g.terminal_count());
  rep.matching = solve_matching(g, dist, hc, has_box ? &box : nullptr);

  const bool dbar_zero =
      dist.d_bar.size() == 0 || dist.d_bar.cwiseAbs().maxCoeff() == 0.0;
  const bool x0_above = [&] {
    if (sc.initial.x0.size() != g.n) return false;
    Vec gamma = sc.hamiltonian.gamma;
    if (sc.hamiltonian.form == HamiltonianForm::Hydraulic) {
      gamma = sc.hamiltonian.h_bar.size()
                  ? Vec(sc.hamiltonian.area.cwiseProduct(sc.hamiltonian.h_bar))
                  : Vec(Vec::Zero(g.n));
    }
    return (sc.initial.x0.array() >= gamma.array()).all();
  }();
  const bool unit_pi = (sc.controller.r.array() == 1.0).all() &&
                       (sc.controller.hc_weight.array() == 1.0).all();

  guarantee(rep.guarantees, "pi_consensus_unconstrained",
          {{"graph weakly connected", rep.conn.weakly_connected},
           {"matching condition (E d_bar in im B)", rep.matching->matchable}});
  guarantee(rep.guarantees, "box_consensus_balanced",
          {{"constant flow box configured", has_box},
           {"graph strongly connected", rep.conn.strongly_connected},
           {"graph balanced", rep.balanced},
           {"bounds compatible with the orientation", !has_box || compatible},
           {"bound intervals share an open interval", !has_box || common_interval}});
  guarantee(rep.guarantees, "box_consensus_interior_point",
          {{"constant flow box configured", has_box},
           {"graph weakly connected", rep.conn.weakly_connected},
           {"interior point condition", has_box && rep.interior->holds}});
  guarantee(rep.guarantees, "adaptive_invariance_and_consensus",
          {{"adaptive mode selected", sc.controller.mode == ConstraintMode::Adaptive},
           {"graph weakly connected", rep.conn.weakly_connected},
           {"zero terminal in/outflow", dbar_zero},
           {"x0 >= gamma", x0_above},
           {"unit damping and controller weights", unit_pi}});
  return rep;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string CheckReport::to_text() const {
  std::ostringstream os;
  os << "# flownet check report\n";
  os << "weakly_connected = " << (conn.weakly_connected ? "true" : "false") << "\n";
  os << "strongly_connected = " << (conn.strongly_connected ? "true" : "false") << "\n";
  os << "component_count = " << conn.component_count << "\n";
  os << "balanced = " << (balanced ? "true" : "false") << "\n";
  os << "acyclic = " << (acyclic ? "true" : "false") << "\n";
  if (interior) {
    os << "interior_point.holds = " << (interior->holds ? "true" : "false") << "\n";
    if (interior->witness) {
      os << "interior_point.witness =";
      for (int i = 0; i < interior->witness->size(); ++i) {
        os << " " << format_number((*interior->witness)[i]);
      }
      os << "\n";
      os << "interior_point.margin = " << format_number(interior->margin) << "\n";
      os << "interior_point.active_edges =";
      for (int e : interior->active_subgraph_edges) os << " " << (e + 1);
      os << "\n";
    }
    if (!interior->diagnostic.empty()) {
      os << "interior_point.diagnostic = " << interior->diagnostic << "\n";
    }
  }
  if (matching) {
    os << "matching.matchable = " << (matching->matchable ? "true" : "false") << "\n";
    os << "matching.residual = " << format_number(matching->residual) << "\n";
    if (!matching->diagnostic.empty()) {
      os << "matching.diagnostic = " << matching->diagnostic << "\n";
    }
  }
  for (const GuaranteeVerdict& t : guarantees) {
    os << "guarantee." << t.name << " = ";
    if (t.holds) {
      os << "holds\n";
    } else {
      os << "fails:";
      for (size_t i = 0; i < t.failed_hypotheses.size(); ++i) {
        os << (i ? "; " : " ") << t.failed_hypotheses[i];
      }
      os << "\n";
    }
  }
  return os.str();
}

bool RunReport::all_monitors_pass() const {
  for (const MonitorResult& m : monitors) {
    if (m.enabled && !m.passed) return false;
  }
  return true;
}

std::string RunReport::to_text() const {
  std::ostringstream os;
  os << "# flownet run report\n";
  os << "scenario = " << scenario_name << "\n";
  for (const std::string& o : overrides) os << "override = " << o << "\n";
  os << "mode = " << mode_name(mode) << "\n";
  os << "steps = " << steps << "\n";
  os << "samples = " << samples << "\n";
  os << "min_x_minus_gamma = " << format_number(min_x_minus_gamma) << "\n";
  os << "conservation_drift = " << format_number(conservation_drift) << "\n";
  os << "max_lyapunov_increment = " << format_number(max_lyapunov_increment) << "\n";
  os << "max_clamp_deficit = " << format_number(max_clamp_deficit) << "\n";
  os << "total_clamp_mass = " << format_number(total_clamp_mass) << "\n";
  os << "classification_changes = " << classification_changes << "\n";
  os << "rescaling_fallback_steps = " << rescaling_fallback_steps << "\n";
  os << "chattering_warning = " << (chattering_warning ? "true" : "false") << "\n";
  os << "consensus_reached = " << (consensus.reached ? "true" : "false") << "\n";
  if (consensus.reached) {
    os << "consensus_time = " << format_number(consensus.time) << "\n";
    os << "consensus_value = " << format_number(consensus.alpha) << "\n";
  }
  for (const MonitorResult& m : monitors) {
    os << "monitor." << m.name << ".enabled = " << (m.enabled ? "true" : "false") << "\n";
    if (m.enabled) {
      os << "monitor." << m.name << ".value = " << format_number(m.value) << "\n";
      os << "monitor." << m.name << ".threshold = " << format_number(m.threshold) << "\n";
      os << "monitor." << m.name << ".pass = " << (m.passed ? "true" : "false") << "\n";
    }
  }
  for (const std::string& n : notes) os << "note = " << n << "\n";
  os << "status = " << (all_monitors_pass() ? 0 : 1) << "\n";
  return os.str();
}

RunOutcome run_scenario(const Scenario& sc, const std::string& name,
                        const std::vector<std::string>& overrides_applied) {
  const SimSystem sys = build_system(sc);
  SystemState s0{sc.initial.x0, sc.initial.eta0};

  RunOutcome out;
  out.trajectory = integrate(sys, s0, sc.sim.cfg);
  const Trajectory& tr = out.trajectory;

  RunReport& rep = out.report;
  rep.scenario_name = name;
  rep.overrides = overrides_applied;
  rep.mode = sc.controller.mode;
  rep.steps = tr.steps;
  rep.samples = tr.samples();
  rep.min_x_minus_gamma = tr.min_x_minus_gamma;
  rep.conservation_drift = tr.max_mass_drift;
  rep.max_lyapunov_increment = tr.max_step_energy_increase;
  rep.max_clamp_deficit = tr.max_clamp_deficit;
  rep.total_clamp_mass = tr.total_clamp_mass;
  rep.classification_changes = tr.classification_changes;
  rep.chattering_warning = tr.chattering_warning;
  rep.rescaling_fallback_steps = tr.rescaling_fallback_steps;
  rep.consensus = detect_consensus(tr, sys.g, sys.h, sc.sim.cfg);
  rep.check = check_scenario(sc);

  const bool dbar_zero = sys.dist.d_bar.size() == 0 ||
                         sys.dist.d_bar.cwiseAbs().maxCoeff() == 0.0;
  const bool conserved = sys.dist.d_bar.size() == 0 ||
                         std::abs((sys.g.E * sys.dist.d_bar).sum()) <= 1e-12;
  auto enabled = [](MonitorToggle t, bool auto_on) {
    return t == MonitorToggle::Auto ? auto_on : t == MonitorToggle::On;
  };

  MonitorResult lower;
  lower.name = "lower_bound";
  lower.enabled = enabled(sc.sim.check_lower_bound,
                          sc.controller.mode == ConstraintMode::Adaptive);
  lower.value = tr.min_x_minus_gamma;
  lower.threshold = -1e-6;
  lower.passed = tr.min_x_minus_gamma >= -1e-6;
  rep.monitors.push_back(lower);

  MonitorResult clamp;
  clamp.name = "clamp_deficit";
  clamp.enabled = lower.enabled && sc.sim.cfg.clamp_guard;
  clamp.value = tr.max_clamp_deficit;
  clamp.threshold = 1e-6;
  clamp.passed = tr.max_clamp_deficit <= 1e-6;
  rep.monitors.push_back(clamp);

  MonitorResult cons;
  cons.name = "conservation";
  cons.enabled = enabled(sc.sim.check_conservation, conserved);
  cons.value = tr.max_mass_drift;
  cons.threshold = 1e-8;
  cons.passed = tr.max_mass_drift <= 1e-8;
  rep.monitors.push_back(cons);

  MonitorResult lyap;
  lyap.name = "lyapunov";
  lyap.enabled = enabled(sc.sim.check_lyapunov, dbar_zero);
  lyap.value = tr.max_step_energy_increase;
  lyap.threshold = sc.sim.cfg.lyapunov_slack;
  lyap.passed = tr.max_step_energy_increase <= sc.sim.cfg.lyapunov_slack;
  rep.monitors.push_back(lyap);

  const bool general = (sys.pi.r.array() != 1.0).any() || !sys.pi.hc.is_unit();
  if (sc.controller.mode == ConstraintMode::Adaptive && general) {
    rep.notes.push_back(
        "adaptive run uses non-unit gains or controller weights; the "
        "invariance guarantee is stated for the unit setting");
  }
  if (tr.rescaling_fallback_steps > 0) {
    rep.notes.push_back(
        "some steps used the scaling fixed point because the rebalancing "
        "minimizer was inconsistent or not realizable by the saturation");
  }
  if (tr.chattering_warning) {
    rep.notes.push_back(
        "classification switched more than once per 3 steps; possible "
        "sliding along the saturation boundary");
  }
  out.exit_status = rep.all_monitors_pass() ? 0 : 1;
  return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr, int n, int m) {
  os << "t";
  for (int i = 1; i <= n; ++i) os << ",x_" << i;
  for (int i = 1; i <= m; ++i) os << ",eta_" << i;
  for (int i = 1; i <= m; ++i) os << ",mu_sat_" << i;
  os << ",V,mass\n";
  for (int k = 0; k < tr.samples(); ++k) {
    os << format_number(tr.times[k]);
    for (int i = 0; i < n; ++i) os << ',' << format_number(tr.x[k][i]);
    for (int i = 0; i < m; ++i) os << ',' << format_number(tr.eta[k][i]);
    for (int i = 0; i < m; ++i) os << ',' << format_number(tr.mu_sat[k][i]);
    os << ',' << format_number(tr.energy[k]) << ',' << format_number(tr.mass[k]) << "\n";
  }
}

int run_scenario_files(const std::string& path, const std::string& out_dir,
                       const std::vector<std::string>& overrides) {
  Scenario sc = load_scenario(path);
  for (const std::string& o : overrides) apply_override(sc, o);
  const std::string name = std::filesystem::path(path).stem().string();

  RunOutcome outcome = run_scenario(sc, name, overrides);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path base = std::filesystem::path(out_dir) / name;
  {
    std::ofstream csv(base.string() + ".csv");
    write_trajectory_csv(csv, outcome.trajectory, sc.graph.vertices,
                         static_cast<int>(sc.graph.edges.size()));
  }
  {
    std::ofstream rep(base.string() + ".report");
    rep << outcome.report.to_text();
  }
  {
    std::ofstream chk(base.string() + ".check");
    chk << outcome.report.check.to_text();
  }
  return outcome.exit_status;
}

QpInstance parse_qp_instance(const std::string& text) {
  const RawSections raw = tokenize(text);
  Scenario sc;
  assemble_graph(sc, raw);
  QpInstance inst;
  inst.graph = sc.graph;
  const int n = sc.graph.vertices;
  const int m = static_cast<int>(sc.graph.edges.size());
  bool saw_x = false, saw_gamma = false;
  for (const RawEntry& e : section_entries(raw, "instance")) {
    if (e.key == "mu") {
      inst.mu = parse_vec(e.value, m, e.line, "mu");
    } else if (e.key == "gray") {
      for (const std::string& t : split_tokens(e.value)) {
        const long v = parse_int(t, e.line);
        if (v < 1 || v > n) throw ParseError(e.line, "gray vertex outside the graph");
        inst.gray.push_back(static_cast<int>(v) - 1);
      }
    } else if (e.key == "x") {
      inst.x = parse_vec(e.value, n, e.line, "x");
      saw_x = true;
    } else if (e.key == "gamma") {
      inst.gamma = parse_vec(e.value, n, e.line, "gamma");
      saw_gamma = true;
    } else {
      throw ParseError(e.line, "unknown instance key '" + e.key + "'");
    }
  }
  for (const RawEntry& e : section_entries(raw, "classifier")) {
    Scenario tmp = sc;
    set_classifier_value(tmp, e);
    inst.classifier = tmp.classifier;
    sc.classifier = tmp.classifier;
  }
  if (inst.mu.size() != m) throw ConfigError("[instance] must set mu");
  inst.has_state = saw_x || saw_gamma;
  if (inst.has_state && (!saw_x || !saw_gamma)) {
    throw ConfigError("[instance] needs both x and gamma (or a gray list)");
  }
  if (!inst.has_state && inst.gray.empty()) {
    throw ConfigError("[instance] needs either gray = ... or x/gamma");
  }
  return inst;
}

std::string qp_solve_text(const QpInstance& inst) {
  const NetworkGraph g =
      build_graph(inst.graph.vertices, inst.graph.edges, inst.graph.terminals);
  Vec x, gamma;
  if (inst.has_state) {
    x = inst.x;
    gamma = inst.gamma;
  } else {
    // Synthesize a state realizing the designated gray set.
    gamma = Vec::Zero(g.n);
    x = Vec::Ones(g.n);
    for (int v : inst.gray) x[v] = 0.0;
  }
  const VertexClassification cls = classify(g, x, gamma, inst.mu, inst.classifier);

  std::ostringstream os;
  os << "# flow rebalancing instance\n";
  os << "gray =";
  for (int v : cls.gray) os << " " << (v + 1);
  os << "\nblack =";
  for (int v : cls.black) os << " " << (v + 1);
  os << "\ne_b_out =";
  for (int e : cls.e_b_out) os << " " << (e + 1);
  os << "\n";
  if (cls.black.empty()) {
    os << "unconstrained: no vertex at its bound has a flow deficit; "
          "phi_plus = +inf on every edge\n";
    return os.str();
  }
  const AdaptiveBounds qp = solve_flow_qp(g, inst.mu, cls);
  const RescalingResult it = iterative_rescaling(g, inst.mu, cls);
  os << "phi_star =";
  for (int i = 0; i < g.m; ++i) os << " " << format_number(qp.phi_star[i]);
  os << "\nphi_plus =";
  for (int i = 0; i < g.m; ++i) os << " " << format_number(qp.phi_plus[i]);
  os << "\nkkt_residual = " << format_number(qp.kkt_residual) << "\n";
  os << "balance_residual = " << format_number(qp.balance_residual) << "\n";
  os << "rescaling_iterations = " << it.iterations << "\n";
  os << "rescaling_converged = " << (it.converged ? "true" : "false") << "\n";
  os << "rescaling_phi =";
  for (int i = 0; i < g.m; ++i) os << " " << format_number(it.phi[i]);
  const double dev = (qp.phi_star - it.phi).cwiseAbs().maxCoeff();
  os << "\nmax_route_deviation = " << format_number(dev) << "\n";
  return os.str();
}

}  // namespace flownet
