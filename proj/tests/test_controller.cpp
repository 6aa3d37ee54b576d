#include <doctest.h>

#include <random>

#include "flownet/adaptive.hpp"
#include "flownet/controller.hpp"
#include "test_support.hpp"

using namespace flownet;
using namespace flownet::testing;

TEST_CASE("saturation clamps and respects infinite bounds") {
  Vec x(1), lo(1), hi(1);
  x << 5;
  lo << -1;
  hi << 2;
  CHECK(saturate(x, lo, hi)[0] == doctest::Approx(2.0));

  Vec v(3);
  v << -3, 0, 7;
  CHECK(saturate(v, Vec::Constant(3, -kInf), Vec::Constant(3, kInf)) == v);
  Vec ones_lo = Vec::Constant(3, -1.0), ones_hi = Vec::Constant(3, 1.0);
  Vec want(3);
  want << -1, 0, 1;
  CHECK(saturate(v, ones_lo, ones_hi) == want);

  Vec bad_lo(1), bad_hi(1);
  bad_lo << 2;
  bad_hi << 1;
  CHECK_THROWS_AS(saturate(x, bad_lo, bad_hi), ConfigError);
}

TEST_CASE("saturation is idempotent") {
  std::mt19937 rng(21);
  for (int t = 0; t < 100; ++t) {
    const Vec x = random_vec(rng, 6, -5.0, 5.0);
    Vec lo = random_vec(rng, 6, -2.0, 0.0);
    Vec hi = lo + random_vec(rng, 6, 0.0, 3.0);
    const Vec once = saturate(x, lo, hi);
    CHECK(saturate(once, lo, hi) == once);
  }
}

TEST_CASE("controller output worked example") {
  PIController c;
  c.r = Vec::Ones(2);
  c.hc = ControllerHamiltonian::unit(2);
  Vec zeta(2), eta(2);
  zeta << 1, -2;
  eta << 3, 1;
  const Vec mu = controller_output(c, zeta, eta);
  CHECK(mu[0] == doctest::Approx(-4.0));
  CHECK(mu[1] == doctest::Approx(1.0));

  CHECK(controller_output(c, Vec::Zero(2), Vec::Zero(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("controller output matches an independent evaluation") {
  std::mt19937 rng(22);
  for (int t = 0; t < 50; ++t) {
    PIController c;
    c.r = random_vec(rng, 5, 0.2, 3.0);
    c.hc = ControllerHamiltonian{random_vec(rng, 5, 0.2, 3.0)};
    const Vec zeta = random_vec(rng, 5, -2.0, 2.0);
    const Vec eta = random_vec(rng, 5, -2.0, 2.0);
    const Vec mu = controller_output(c, zeta, eta);
    for (int i = 0; i < 5; ++i) {
      CHECK(mu[i] == doctest::Approx(-c.r[i] * zeta[i] - c.hc.q[i] * eta[i]));
    }
  }
}

TEST_CASE("closed loop is stationary at consensus") {
  const NetworkGraph g = circle_graph();
  const VertexHamiltonian h = VertexHamiltonian::quadratic(Vec::Ones(3), Vec::Zero(3));
  PIController c;
  c.r = Vec::Ones(4);
  c.hc = ControllerHamiltonian::unit(4);
  SystemState s{Vec::Constant(3, 0.7), Vec::Zero(4)};
  const RhsEval rhs = closed_loop_rhs(g, h, c, s, Vec::Constant(4, -kInf),
                                      Vec::Constant(4, kInf));
  CHECK(rhs.x_dot.cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(rhs.eta_dot.cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("fork deficit with and without adaptive bounds") {
  // v2 sits at its bound with mu2 + mu3 > mu1 >= 0: unconstrained flow
  // drains it, the rebalanced bounds stop exactly at zero.
  const NetworkGraph g = fork_graph();
  Vec mu(3);
  mu << 1, 2, 2;
  Vec x(4), gamma = Vec::Zero(4);
  x << 1, 0, 1, 1;

  const Vec unbounded_rate = g.B * mu;
  CHECK(unbounded_rate[1] == doctest::Approx(-3.0));

  const AdaptiveBounds b = compute_bounds(g, x, gamma, mu);
  const Vec guarded = g.B * saturate(mu, -b.phi_plus, b.phi_plus);
  CHECK(guarded[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mass conservation holds for any bounds") {
  std::mt19937 rng(23);
  for (int t = 0; t < 60; ++t) {
    const NetworkGraph g = random_graph(rng, 8, 16, false);
    if (g.m == 0) continue;
    const Vec mu = random_vec(rng, g.m, -3.0, 3.0);
    Vec lo = random_vec(rng, g.m, -2.0, 0.0);
    Vec hi = lo + random_vec(rng, g.m, 0.0, 2.5);
    const double total = (g.B * saturate(mu, lo, hi)).sum();
    CHECK(std::abs(total) <= 1e-12);
  }
}

TEST_CASE("plant energy balance identity") {
  // grad H' x_dot must equal (B mu_sat + E d_bar)' grad H for the
  // assembled field.
  std::mt19937 rng(24);
  for (int t = 0; t < 40; ++t) {
    NetworkGraph g = random_graph(rng, 6, 10, true);
    g = build_graph(g.n, g.edges, {{0, +1}, {g.n - 1, -1}});
    const VertexHamiltonian h =
        VertexHamiltonian::quadratic(random_vec(rng, g.n, 0.5, 2.0), Vec::Zero(g.n));
    PIController c;
    c.r = Vec::Ones(g.m);
    c.hc = ControllerHamiltonian::unit(g.m);
    SystemState s{random_vec(rng, g.n, -1.0, 2.0), random_vec(rng, g.m, -2.0, 2.0)};
    const Vec e_dbar = g.E * Vec::Constant(2, 0.7);
    Vec lo = random_vec(rng, g.m, -1.0, 0.0), hi = lo.array() + 1.5;
    const RhsEval rhs = closed_loop_rhs(g, h, c, s, lo, hi, &e_dbar);
    const Vec y = h.gradient(s.x);
    const double lhs = y.dot(rhs.x_dot);
    const double rhs_val = (g.B * rhs.mu_sat + e_dbar).dot(y);
    CHECK(lhs == doctest::Approx(rhs_val).epsilon(1e-12));
  }
}

TEST_CASE("constraint normalization worked examples") {
  const NetworkGraph g = build_graph(2, {{0, 1}});
  BoxBounds b;
  b.lower = Vec::Constant(1, -2.0);
  b.upper = Vec::Constant(1, -1.0);
  const NormalizedConstraints flipped = normalize_constraints(g, b);
  CHECK(flipped.flipped_edges == std::vector<int>{0});
  CHECK(flipped.bounds.lower[0] == doctest::Approx(1.0));
  CHECK(flipped.bounds.upper[0] == doctest::Approx(2.0));
  CHECK(flipped.graph.B_int(0, 0) == 1);

  b.lower << 0.0;
  b.upper << 1.0;
  const NormalizedConstraints same = normalize_constraints(g, b);
  CHECK(same.flipped_edges.empty());
  CHECK(same.straddling_edges.empty());

  b.lower << -1.0;
  b.upper << 1.0;
  const NormalizedConstraints straddle = normalize_constraints(g, b);
  CHECK(straddle.flipped_edges.empty());
  CHECK(straddle.straddling_edges == std::vector<int>{0});
}

TEST_CASE("normalization preserves the dynamics") {
  std::mt19937 rng(25);
  for (int t = 0; t < 40; ++t) {
    const NetworkGraph g = random_graph(rng, 6, 10, true);
    BoxBounds b;
    b.lower = random_vec(rng, g.m, -3.0, -0.5);
    b.upper = b.lower + random_vec(rng, g.m, 0.0, 2.0);
    const NormalizedConstraints norm = normalize_constraints(g, b);
    const VertexHamiltonian h =
        VertexHamiltonian::quadratic(Vec::Ones(g.n), Vec::Zero(g.n));
    PIController c;
    c.r = Vec::Ones(g.m);
    c.hc = ControllerHamiltonian::unit(g.m);
    SystemState s{random_vec(rng, g.n, -1.0, 1.0), random_vec(rng, g.m, -1.0, 1.0)};
    // controller states live on edges, so flipping an edge flips eta too
    SystemState s_flipped = s;
    for (int j : norm.flipped_edges) s_flipped.eta[j] = -s.eta[j];
    const RhsEval before = closed_loop_rhs(g, h, c, s, b.lower, b.upper);
    const RhsEval after = closed_loop_rhs(norm.graph, h, c, s_flipped,
                                          norm.bounds.lower, norm.bounds.upper);
    CHECK((before.x_dot - after.x_dot).cwiseAbs().maxCoeff() <= 1e-12);
    for (int j = 0; j < g.m; ++j) {
      const bool flipped = std::find(norm.flipped_edges.begin(), norm.flipped_edges.end(),
                                     j) != norm.flipped_edges.end();
      const double want = flipped ? -before.eta_dot[j] : before.eta_dot[j];
      CHECK(after.eta_dot[j] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("matching with zero disturbance is trivial") {
  const NetworkGraph g = build_graph(3, {{0, 1}, {1, 2}}, {{0, +1}, {2, -1}});
  const MatchingResult r =
      solve_matching(g, Disturbance{Vec::Zero(2)}, ControllerHamiltonian::unit(2));
  REQUIRE(r.matchable);
  CHECK(r.v_bar->cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(r.eta_bar->cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("weakly connected with balanced in/outflow is always matchable") {
  // E d_bar orthogonal to the all-ones vector lies in im B exactly when
  // the graph is weakly connected; paired terminals with a common rate
  // keep the total inflow equal to the total outflow.
  std::mt19937 rng(26);
  for (int t = 0; t < 30; ++t) {
    NetworkGraph g = random_graph(rng, 7, 12, true);
    std::uniform_int_distribution<int> vd(0, g.n - 1);
    int a = vd(rng), b = vd(rng);
    while (b == a) b = vd(rng);
    g = build_graph(g.n, g.edges, {{a, +1}, {b, -1}});
    const double rate = random_vec(rng, 1, -2.0, 2.0)[0];
    const Vec d_bar = Vec::Constant(2, rate);  // 1' E d_bar = 0
    const MatchingResult r =
        solve_matching(g, Disturbance{d_bar}, ControllerHamiltonian::unit(g.m));
    REQUIRE(r.matchable);
    CHECK((g.B * *r.v_bar - g.E * d_bar).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((g.B * r.eta_bar->cwiseProduct(Vec::Ones(g.m)) - g.E * d_bar)
              .cwiseAbs()
              .maxCoeff() <= 1e-9);
  }
}

TEST_CASE("matching on the five-vertex graph") {
  NetworkGraph g = example5_graph();
  g = build_graph(g.n, g.edges, {{0, +1}, {2, -1}});
  const MatchingResult r = solve_matching(g, Disturbance{Vec::Ones(2)},
                                          ControllerHamiltonian::unit(g.m));
  REQUIRE(r.matchable);
  Vec target = g.E * Vec::Ones(2);
  CHECK((g.B * *r.v_bar - target).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("unmatchable disturbance is reported, not thrown") {
  // isolated vertex with an inflow terminal: E d_bar has a component
  // outside im B
  const NetworkGraph g = build_graph(3, {{0, 1}}, {{2, +1}});
  const MatchingResult r = solve_matching(g, Disturbance{Vec::Ones(1)},
                                          ControllerHamiltonian::unit(1));
  CHECK_FALSE(r.matchable);
  CHECK(!r.diagnostic.empty());
}

TEST_CASE("constrained matching respects bounds") {
  // Path graph with inflow at the last vertex: B v = E d_bar forces
  // v = (1, 1), admitted only when the box reaches 1.
  const NetworkGraph g = build_graph(3, {{0, 1}, {1, 2}}, {{2, +1}, {0, -1}});
  BoxBounds box;
  box.lower = Vec::Zero(2);
  box.upper = Vec::Constant(2, 2.0);
  const MatchingResult ok = solve_matching(g, Disturbance{Vec::Ones(2)},
                                           ControllerHamiltonian::unit(2), &box);
  REQUIRE(ok.matchable);
  CHECK((*ok.v_bar - Vec::Ones(2)).cwiseAbs().maxCoeff() <= 1e-9);

  box.upper = Vec::Constant(2, 0.5);
  const MatchingResult no = solve_matching(g, Disturbance{Vec::Ones(2)},
                                           ControllerHamiltonian::unit(2), &box);
  CHECK_FALSE(no.matchable);
}
