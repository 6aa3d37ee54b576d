#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "flownet/ensemble.hpp"
#include "flownet/scenario.hpp"
#include "flownet/sim.hpp"
#include "test_support.hpp"

using namespace flownet;
using namespace flownet::testing;

namespace {

std::string fixture_dir() { return std::string(FLOWNET_SOURCE_DIR) + "/scenarios"; }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("parallel_for covers every index exactly once") {
  for (bool parallel : {false, true}) {
    std::vector<int> hits(257, 0);
    parallel_for(257, [&](int i) { ++hits[i]; }, parallel);
    for (int h : hits) CHECK(h == 1);
  }
}

TEST_CASE("serial and parallel ensembles produce identical trajectories") {
  // The parallel path must be a pure scheduling change: per-run results
  // are compared bitwise against the serial reference.
  std::mt19937 rng(55);
  std::vector<SimSystem> systems;
  std::vector<SystemState> states;
  for (int i = 0; i < 24; ++i) {
    const NetworkGraph g = random_graph(rng, 6, 10, true);
    SimSystem sys;
    sys.g = g;
    sys.h = VertexHamiltonian::quadratic(random_vec(rng, g.n, 0.5, 3.0),
                                         Vec::Zero(g.n));
    sys.pi.r = Vec::Ones(g.m);
    sys.pi.hc = ControllerHamiltonian::unit(g.m);
    sys.policy.mode = ConstraintMode::Adaptive;
    systems.push_back(sys);
    SystemState s;
    s.x = random_vec(rng, g.n, 0.0, 2.0);
    s.x[0] = 0.0;
    s.eta = random_vec(rng, g.m, -1.5, 1.5);
    states.push_back(s);
  }
  SimConfig cfg;
  cfg.t_end = 0.5;
  cfg.h = 1e-3;
  cfg.record_every = 50;

  auto run_all = [&](bool parallel) {
    std::vector<Vec> finals(systems.size());
    std::vector<double> energies(systems.size());
    parallel_for(
        static_cast<int>(systems.size()),
        [&](int i) {
          const Trajectory tr = integrate(systems[i], states[i], cfg);
          finals[i] = tr.x.back();
          energies[i] = tr.energy.back();
        },
        parallel);
    return std::pair(finals, energies);
  };
  const auto [fx_s, fe_s] = run_all(false);
  const auto [fx_p, fe_p] = run_all(true);
  for (size_t i = 0; i < systems.size(); ++i) {
    CHECK(fx_s[i] == fx_p[i]);  // exact equality, not approximate
    CHECK(fe_s[i] == fe_p[i]);
  }
}

TEST_CASE("batch runner processes a directory in both modes") {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(fixture_dir())) {
    if (e.path().extension() == ".scn") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  REQUIRE(files.size() >= 5);

  const std::string out_s = (std::filesystem::temp_directory_path() /
                             "flownet_batch_serial").string();
  const std::string out_p = (std::filesystem::temp_directory_path() /
                             "flownet_batch_parallel").string();
  std::filesystem::remove_all(out_s);
  std::filesystem::remove_all(out_p);
  const auto rs = run_batch(files, out_s, false);
  const auto rp = run_batch(files, out_p, true);
  REQUIRE(rs.size() == rp.size());
  for (size_t i = 0; i < rs.size(); ++i) {
    CHECK(rs[i].name == rp[i].name);
    CHECK(rs[i].exit_status == 0);
    CHECK(rp[i].exit_status == 0);
    // emitted artifacts are identical across the two paths
    CHECK(slurp(out_s + "/" + rs[i].name + ".report") ==
          slurp(out_p + "/" + rp[i].name + ".report"));
    CHECK(slurp(out_s + "/" + rs[i].name + ".csv") ==
          slurp(out_p + "/" + rp[i].name + ".csv"));
  }
}

TEST_CASE("batch reports scenario failures without stopping") {
  const std::string dir = (std::filesystem::temp_directory_path() /
                           "flownet_batch_bad").string();
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream good(dir + "/good.scn");
    good << slurp(fixture_dir() + "/fork.scn");
    std::ofstream bad(dir + "/broken.scn");
    bad << "[graph]\nvertices = 2\nedge = 1 9\n";
  }
  const auto results = run_batch({dir + "/broken.scn", dir + "/good.scn"},
                                 dir + "/out", true);
  REQUIRE(results.size() == 2);
  CHECK(results[0].exit_status == 2);
  CHECK(results[0].message.find("line 3") != std::string::npos);
  CHECK(results[1].exit_status == 0);
}
