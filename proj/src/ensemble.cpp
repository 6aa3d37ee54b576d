#include "flownet/ensemble.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <filesystem>

#include "flownet/scenario.hpp"

namespace flownet {

void parallel_for(int n, const std::function<void(int)>& body, bool parallel) {
#ifdef _OPENMP
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
#else
  (void)parallel;
#endif
  for (int i = 0; i < n; ++i) body(i);
}

int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::vector<BatchResult> run_batch(const std::vector<std::string>& files,
                                   const std::string& out_dir, bool parallel) {
  std::vector<BatchResult> results(files.size());
  parallel_for(
      static_cast<int>(files.size()),
      [&](int i) {
        BatchResult& r = results[i];
        r.name = std::filesystem::path(files[i]).stem().string();
        try {
          r.exit_status = run_scenario_files(files[i], out_dir, {});
        } catch (const ParseError& e) {
          r.exit_status = 2;
          r.message = e.what();
        } catch (const ConfigError& e) {
          r.exit_status = 2;
          r.message = e.what();
        } catch (const NumericalError& e) {
          r.exit_status = 3;
          r.message = e.what();
        }
      },
      parallel);
  return results;
}

}  // namespace flownet
