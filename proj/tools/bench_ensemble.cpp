// Benchmark: serial vs OpenMP execution of an ensemble of adaptive runs.
// Per-scenario work is sequential in time, so the ensemble is the
// data-parallel unit; this tool reports the throughput of both paths.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "flownet/adaptive.hpp"
#include "flownet/ensemble.hpp"
#include "flownet/sim.hpp"

using namespace flownet;

namespace {

SimSystem make_system(std::mt19937& rng, int n) {
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<Edge> edges;
  for (int v = 1; v < n; ++v) edges.push_back({pick(rng) % v, v});  // spanning tree
  std::uniform_int_distribution<int> extra(0, n);
  const int extras = extra(rng);
  for (int e = 0; e < extras; ++e) {
    const int a = pick(rng), b = pick(rng);
    if (a != b) edges.push_back({a, b});
  }
  SimSystem sys;
  sys.g = build_graph(n, edges);
  sys.h = VertexHamiltonian::quadratic(Vec::Ones(n), Vec::Zero(n));
  sys.pi.r = Vec::Ones(sys.g.m);
  sys.pi.hc = ControllerHamiltonian::unit(sys.g.m);
  sys.policy.mode = ConstraintMode::Adaptive;
  return sys;
}

double run_ensemble(const std::vector<SimSystem>& systems,
                    const std::vector<SystemState>& states, bool parallel,
                    std::vector<double>& out_energy) {
  SimConfig cfg;
  cfg.t_end = 4.0;
  cfg.h = 2e-4;
  cfg.record_every = 200;
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(
      static_cast<int>(systems.size()),
      [&](int i) {
        const Trajectory tr = integrate(systems[i], states[i], cfg);
        out_energy[i] = tr.energy.back();
      },
      parallel);
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  int count = 64;
  if (argc > 1) count = std::atoi(argv[1]);

  std::mt19937 rng(7);
  std::uniform_real_distribution<double> x_init(0.0, 2.0);
  std::uniform_real_distribution<double> eta_init(-2.0, 2.0);
  std::vector<SimSystem> systems;
  std::vector<SystemState> states;
  for (int i = 0; i < count; ++i) {
    systems.push_back(make_system(rng, 6));
    SystemState s;
    s.x = Vec::NullaryExpr(6, [&](int) { return x_init(rng); });
    s.x[i % 6] = 0.0;  // start one vertex on its bound
    s.eta = Vec::NullaryExpr(systems.back().g.m, [&](int) { return eta_init(rng); });
    states.push_back(std::move(s));
  }

  std::vector<double> serial_energy(count), parallel_energy(count);
  const double t_serial = run_ensemble(systems, states, false, serial_energy);
  const double t_parallel = run_ensemble(systems, states, true, parallel_energy);

  double max_dev = 0.0;
  for (int i = 0; i < count; ++i) {
    max_dev = std::max(max_dev, std::abs(serial_energy[i] - parallel_energy[i]));
  }

  std::printf("ensemble size        : %d adaptive runs\n", count);
  std::printf("threads              : %d\n", hardware_threads());
  std::printf("serial               : %.3f s (%.1f runs/s)\n", t_serial, count / t_serial);
  std::printf("openmp               : %.3f s (%.1f runs/s)\n", t_parallel, count / t_parallel);
  std::printf("speedup              : %.2fx\n", t_serial / t_parallel);
  std::printf("max result deviation : %.3g (paths must agree exactly)\n", max_dev);
  return max_dev == 0.0 ? 0 : 1;
}
