// Command-line front end: run a scenario, check its structural conditions,
// solve a flow rebalancing instance, or run a directory of scenarios.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flownet/ensemble.hpp"
#include "flownet/scenario.hpp"

namespace fs = std::filesystem;
using namespace flownet;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int do_batch(const std::string& dir, const std::string& out_dir, bool serial) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".scn") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::cerr << "no .scn files in " << dir << "\n";
    return 2;
  }
  const auto results = run_batch(files, out_dir, !serial);
  int worst = 0;
  for (const BatchResult& r : results) {
    std::cout << r.name << ": status " << r.exit_status;
    if (!r.message.empty()) std::cout << " (" << r.message << ")";
    std::cout << "\n";
    worst = std::max(worst, r.exit_status);
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distribution-network simulation under PI control with "
               "adaptive flow saturation"};
  app.require_subcommand(0, 1);

  std::string batch_dir;
  std::string batch_out = "out";
  bool batch_serial = false;
  app.add_option("--batch", batch_dir, "run every .scn scenario in a directory");
  app.add_option("-o,--output", batch_out, "output directory for --batch");
  app.add_flag("--serial", batch_serial, "disable parallel batch execution");

  auto* run = app.add_subcommand("run", "simulate a scenario file");
  std::string run_file, run_out = "out";
  std::vector<std::string> overrides;
  run->add_option("file", run_file, "scenario file")->required();
  run->add_option("-o,--output", run_out, "output directory");
  run->add_option("--set", overrides, "override key=value (e.g. sim.t_end=50)");

  auto* check = app.add_subcommand("check", "structural analysis, no simulation");
  std::string check_file;
  check->add_option("file", check_file, "scenario file")->required();

  auto* qp = app.add_subcommand("qp-solve", "solve a flow rebalancing instance");
  std::string qp_file;
  qp->add_option("file", qp_file, "instance file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const int status = run_scenario_files(run_file, run_out, overrides);
      const std::string stem = fs::path(run_file).stem().string();
      std::cout << read_file((fs::path(run_out) / (stem + ".report")).string());
      return status;
    }
    if (check->parsed()) {
      const Scenario sc = load_scenario(check_file);
      std::cout << check_scenario(sc).to_text();
      return 0;
    }
    if (qp->parsed()) {
      std::cout << qp_solve_text(parse_qp_instance(read_file(qp_file)));
      return 0;
    }
    if (!batch_dir.empty()) {
      return do_batch(batch_dir, batch_out, batch_serial);
    }
    std::cerr << app.help();
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
}
