// Acceptance suite: one line per criterion, nonzero exit when any fails.
// Criteria 4 and 5 encode behavior claims that turned out not to hold
// (see README, "Known divergences"); they are run faithfully and reported
// with measured numbers rather than weakened.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "flownet/adaptive.hpp"
#include "flownet/controller.hpp"
#include "flownet/ensemble.hpp"
#include "flownet/scenario.hpp"
#include "flownet/sim.hpp"
#include "test_support.hpp"

using namespace flownet;
using namespace flownet::testing;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

void verdict(int criterion, bool pass, const std::string& what, double secs) {
  std::printf("criterion %d: %s  %s  [%.2f s]\n", criterion,
              pass ? "PASS" : "FAIL", what.c_str(), secs);
  if (!pass) ++failures;
}

std::string fixture(const std::string& name) {
  return std::string(FLOWNET_SOURCE_DIR) + "/scenarios/" + name;
}

char buf[512];

// ---- criterion 1: worked rebalancing instance ---------------------------
void criterion1() {
  Timer t;
  const NetworkGraph g = circle_graph();
  Vec mu(4);
  mu << 1, 3, 1, 2;
  Vec x(3), gamma = Vec::Zero(3);
  x << 1, 0, 0;
  const VertexClassification cls = classify(g, x, gamma, mu);
  bool ok = cls.black == std::vector<int>{1, 2};
  const AdaptiveBounds b = solve_flow_qp(g, mu, cls);
  Vec want(4);
  want << 1, 1.5, 0.5, 1;
  const double qp_err = (b.phi_star - want).cwiseAbs().maxCoeff();
  ok = ok && qp_err <= 1e-9;
  const RescalingResult it = iterative_rescaling(g, mu, cls);
  const double route_dev = (it.phi - b.phi_star).cwiseAbs().maxCoeff();
  ok = ok && it.converged && route_dev <= 1e-6;
  std::snprintf(buf, sizeof(buf),
                "circle instance: qp error %.2e, route deviation %.2e", qp_err,
                route_dev);
  verdict(1, ok, buf, t.seconds());
}

// ---- criterion 2: junction closed form ----------------------------------
void criterion2() {
  Timer t;
  const NetworkGraph g = fork_graph();
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> in(0.0, 2.0), out(0.05, 3.0);
  int done = 0;
  double worst = 0.0;
  while (done < 100) {
    Vec mu(3);
    mu << in(rng), out(rng), out(rng);
    if (mu[1] + mu[2] <= mu[0]) continue;
    ++done;
    Vec x(4), gamma = Vec::Zero(4);
    x << 1, 0, 1, 1;
    const AdaptiveBounds b = compute_bounds(g, x, gamma, mu);
    for (int i = 1; i <= 2; ++i) {
      const double want = std::abs(mu[0] * mu[i] / (mu[1] + mu[2]));
      worst = std::max(worst, std::abs(b.phi_plus[i] - want));
    }
    worst = std::max(worst, b.phi_plus[0] == kInf ? 0.0 : kInf);
  }
  std::snprintf(buf, sizeof(buf),
                "junction bound formula over 100 draws: worst error %.2e", worst);
  verdict(2, worst <= 1e-9, buf, t.seconds());
}

// ---- criterion 3: the five-reservoir run --------------------------------
void criterion3() {
  Timer t;
  const Scenario sc = load_scenario(fixture("example5.scn"));
  const RunOutcome out = run_scenario(sc, "example5");
  const RunReport& r = out.report;
  const bool a = r.min_x_minus_gamma >= -1e-6;
  const bool b = r.consensus.reached;
  const bool c = std::abs(r.consensus.alpha - 6.867) <= 0.01;
  const bool d = r.conservation_drift <= 1e-8;
  const bool e = r.max_lyapunov_increment <= 1e-6;
  std::snprintf(buf, sizeof(buf),
                "min x %.2e | consensus %s t=%.2f | alpha %.4f | drift %.2e | "
                "max dV %.2e",
                r.min_x_minus_gamma, b ? "yes" : "no", r.consensus.time,
                r.consensus.alpha, r.conservation_drift,
                r.max_lyapunov_increment);
  verdict(3, a && b && c && d && e, buf, t.seconds());
}

// ---- criterion 4: unconstrained motivation run --------------------------
void criterion4() {
  Timer t;
  Scenario sc = load_scenario(fixture("example5.scn"));
  apply_override(sc, "controller.mode=unconstrained");
  apply_override(sc, "sim.check_lower_bound=off");
  const RunOutcome literal = run_scenario(sc, "example5_literal_unconstrained");
  const bool negative = literal.report.min_x_minus_gamma < 0.0;

  // Informational companion: the bundled demonstration scenario uses g = 1,
  // where the loop is oscillatory and the undershoot the saturation scheme
  // exists to prevent actually occurs.
  const Scenario demo = load_scenario(fixture("example5_unconstrained.scn"));
  const RunOutcome osc = run_scenario(demo, "example5_unconstrained");

  std::snprintf(
      buf, sizeof(buf),
      "same scenario unconstrained: min x %.3e (not negative: with g=9.81 "
      "every mode is overdamped; at g=1 the bundled demo reaches %.3f < 0)",
      literal.report.min_x_minus_gamma, osc.report.min_x_minus_gamma);
  verdict(4, negative, buf, t.seconds());
}

// ---- criterion 5: randomized two-route suite ----------------------------
void criterion5() {
  Timer t;
  std::mt19937 rng(5);
  const int total = 200;
  int agree = 0, balance_ok = 0, shrink_ok = 0, infeasible = 0;
  double worst_dev = 0.0;
  for (int done = 0; done < total;) {
    const NetworkGraph g = random_graph(rng, 8, 16, true);
    if (g.m == 0) continue;
    const Vec mu = random_flows(rng, g.m, 3.0);
    Vec gamma = Vec::Zero(g.n);
    Vec x(g.n);
    bool any_gray = false;
    for (int i = 0; i < g.n; ++i) {
      x[i] = (rng() % 3 == 0) ? 0.0 : 1.0;
      any_gray = any_gray || x[i] == 0.0;
    }
    if (!any_gray) continue;
    const VertexClassification cls = classify(g, x, gamma, mu);
    if (cls.black.empty()) continue;
    ++done;
    AdaptiveBounds b;
    try {
      b = solve_flow_qp(g, mu, cls);
    } catch (const NumericalError&) {
      ++infeasible;
      continue;
    }
    if (b.balance_residual <= 1e-9) ++balance_ok;
    if (realizable_by_saturation(mu, b.phi_star, cls.e_b_out)) ++shrink_ok;
    const RescalingResult it = iterative_rescaling(g, mu, cls);
    const double dev = (it.phi - b.phi_star).cwiseAbs().maxCoeff();
    worst_dev = std::max(worst_dev, dev);
    if (dev <= 1e-6) ++agree;
  }
  const int solved = total - infeasible;
  const bool pass =
      agree == total && balance_ok == total && shrink_ok == total;
  std::snprintf(buf, sizeof(buf),
                "two-route agreement %d/%d (worst dev %.3g) | balance "
                "%d/%d | shrinkage %d/%d | infeasible systems %d "
                "(the two routes provably differ; see README notes)",
                agree, total, worst_dev, balance_ok, solved, shrink_ok, solved,
                infeasible);
  verdict(5, pass, buf, t.seconds());
}

// ---- criterion 6: consensus iff connected, with disturbances ------------
void criterion6() {
  Timer t;
  const int runs = 20;
  std::mt19937 rng(6);
  std::vector<SimSystem> systems;
  std::vector<SystemState> states;
  for (int i = 0; i < runs; ++i) {
    NetworkGraph g = random_graph(rng, 8, 16, true);
    std::uniform_int_distribution<int> vd(0, g.n - 1);
    int a = vd(rng), b = vd(rng);
    while (b == a) b = vd(rng);
    g = build_graph(g.n, g.edges, {{a, +1}, {b, -1}});
    SimSystem sys;
    sys.g = g;
    std::uniform_real_distribution<double> wd(1.5, 4.0);
    sys.h = VertexHamiltonian::quadratic(Vec::Constant(g.n, wd(rng)), Vec::Zero(g.n));
    sys.pi.r = Vec::Ones(g.m);
    sys.pi.hc = ControllerHamiltonian::unit(g.m);
    sys.policy.mode = ConstraintMode::Unconstrained;
    std::uniform_real_distribution<double> rd(-1.5, 1.5);
    sys.dist.d_bar = Vec::Constant(2, rd(rng));  // 1' E d_bar = 0
    systems.push_back(sys);
    states.push_back({random_vec(rng, g.n, 0.0, 2.0), random_vec(rng, g.m, -1.0, 1.0)});
  }
  SimConfig cfg;
  cfg.t_end = 50.0;
  cfg.h = 1e-3;
  cfg.record_every = 200;
  std::vector<double> residual(runs), mismatch(runs);
  parallel_for(
      runs,
      [&](int i) {
        const Trajectory tr = integrate(systems[i], states[i], cfg);
        const Vec rel = systems[i].g.B.transpose() *
                        systems[i].h.gradient(tr.x.back());
        residual[i] = rel.cwiseAbs().maxCoeff();
        const Vec bdiff = systems[i].g.B * tr.eta.back() -
                          systems[i].g.E * systems[i].dist.d_bar;
        mismatch[i] = bdiff.cwiseAbs().maxCoeff();
      },
      true);
  double worst_res = 0.0, worst_mis = 0.0;
  for (int i = 0; i < runs; ++i) {
    worst_res = std::max(worst_res, residual[i]);
    worst_mis = std::max(worst_mis, mismatch[i]);
  }

  // negative control: two disjoint edges, generic data
  const NetworkGraph split = build_graph(4, {{0, 1}, {2, 3}});
  SimSystem sys;
  sys.g = split;
  sys.h = VertexHamiltonian::quadratic(Vec::Ones(4), Vec::Zero(4));
  sys.pi.r = Vec::Ones(2);
  sys.pi.hc = ControllerHamiltonian::unit(2);
  sys.policy.mode = ConstraintMode::Unconstrained;
  Vec x0(4);
  x0 << 0, 1, 2, 3;
  const Trajectory tr = integrate(sys, {x0, Vec::Zero(2)}, cfg);
  const bool split_fails =
      !detect_consensus(tr, sys.g, sys.h, cfg).reached;

  const bool pass = worst_res <= 1e-4 && worst_mis <= 1e-3 && split_fails;
  std::snprintf(buf, sizeof(buf),
                "20 disturbed runs: worst residual %.2e, worst |B eta - E d| "
                "%.2e | split graph fails consensus: %s",
                worst_res, worst_mis, split_fails ? "yes" : "no");
  verdict(6, pass, buf, t.seconds());
}

// ---- criterion 7: invariance stress -------------------------------------
void criterion7() {
  Timer t;
  const int runs = 50;
  std::mt19937 rng(7);
  std::vector<SimSystem> systems;
  std::vector<SystemState> states;
  for (int i = 0; i < runs; ++i) {
    const NetworkGraph g = random_graph(rng, 8, 14, true);
    SimSystem sys;
    sys.g = g;
    std::uniform_real_distribution<double> wd(0.5, 12.0);
    const Vec gamma = random_vec(rng, g.n, -0.5, 0.5);
    sys.h = VertexHamiltonian::quadratic(Vec::Constant(g.n, wd(rng)), gamma);
    sys.pi.r = Vec::Ones(g.m);
    sys.pi.hc = ControllerHamiltonian::unit(g.m);
    sys.policy.mode = ConstraintMode::Adaptive;
    // guard band: protection engages inside the band, before the discrete
    // step can carry a crossing trajectory through the bound
    sys.policy.classifier.gray_tolerance = 1e-3;
    systems.push_back(sys);
    SystemState s;
    s.x = gamma + random_vec(rng, g.n, 0.0, 1.5);
    for (int v = 0; v < g.n; ++v) {
      if (rng() % 3 == 0) s.x[v] = gamma[v];
    }
    s.eta = random_vec(rng, g.m, -2.0, 2.0);
    states.push_back(std::move(s));
  }
  SimConfig cfg;
  cfg.t_end = 3.0;
  cfg.h = 1e-4;
  cfg.record_every = 300;
  std::vector<double> min_x(runs), v_inc(runs);
  std::vector<int> fallbacks(runs, 0), aborts(runs, 0);
  parallel_for(
      runs,
      [&](int i) {
        try {
          const Trajectory tr = integrate(systems[i], states[i], cfg);
          min_x[i] = tr.min_x_minus_gamma;
          v_inc[i] = tr.max_step_energy_increase;
          fallbacks[i] = tr.rescaling_fallback_steps;
        } catch (const NumericalError&) {
          aborts[i] = 1;
          min_x[i] = -1.0;
          v_inc[i] = 1.0;
        }
      },
      true);
  double worst_min = 0.0, worst_inc = 0.0;
  int total_fb = 0, total_aborts = 0;
  for (int i = 0; i < runs; ++i) {
    worst_min = std::min(worst_min, min_x[i]);
    worst_inc = std::max(worst_inc, v_inc[i]);
    total_fb += fallbacks[i];
    total_aborts += aborts[i];
  }
  const bool pass =
      worst_min >= -1e-6 && worst_inc <= 1e-6 && total_aborts == 0;
  std::snprintf(buf, sizeof(buf),
                "50 adaptive runs: worst min(x-gamma) %.2e, worst step dV "
                "%.2e, scaling-fallback steps %d, aborts %d",
                worst_min, worst_inc, total_fb, total_aborts);
  verdict(7, pass, buf, t.seconds());
}

// ---- criterion 8: interior point checker --------------------------------
void criterion8() {
  Timer t;
  const NetworkGraph g = two_cycle();
  BoxBounds ok_box;
  ok_box.lower = Vec::Zero(2);
  ok_box.upper = Vec::Ones(2);
  const InteriorPointResult yes = interior_point_condition(g, ok_box);
  double wres = kInf;
  if (yes.witness) wres = (g.B * *yes.witness).cwiseAbs().maxCoeff();

  BoxBounds bad_box;
  bad_box.lower = Vec(2);
  bad_box.lower << 0, 2;
  bad_box.upper = Vec(2);
  bad_box.upper << 1, 3;
  const InteriorPointResult no = interior_point_condition(g, bad_box);

  const bool pass = yes.holds && wres <= 1e-9 && !no.holds && !no.witness;
  std::snprintf(buf, sizeof(buf),
                "two-cycle verdicts: holds=%s (witness residual %.2e), "
                "disjoint intervals holds=%s",
                yes.holds ? "yes" : "no", wres, no.holds ? "yes" : "no");
  verdict(8, pass, buf, t.seconds());
}

}  // namespace

int main() {
  std::printf("acceptance suite (%d threads available)\n", hardware_threads());
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
