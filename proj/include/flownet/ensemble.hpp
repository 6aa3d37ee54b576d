#ifndef FLOWNET_ENSEMBLE_HPP
#define FLOWNET_ENSEMBLE_HPP

#include <functional>
#include <string>
#include <vector>

namespace flownet {

/// Runs body(0..n-1). The parallel path uses OpenMP with a dynamic
/// schedule; the serial path is the reference the tests compare against.
/// Bodies must not share mutable state across indices (every caller here
/// writes to its own slot).
void parallel_for(int n, const std::function<void(int)>& body, bool parallel);

int hardware_threads();

struct BatchResult {
  std::string name;
  int exit_status = 0;     // 0 ok, 1 monitor violation, 2 config, 3 numerical
  std::string message;     // error text for nonzero parse/numerical statuses
};

/// Runs every scenario file in `files`, writing outputs to out_dir.
/// Scenarios are independent, so the batch is the data-parallel unit.
std::vector<BatchResult> run_batch(const std::vector<std::string>& files,
                                   const std::string& out_dir, bool parallel);

}  // namespace flownet

#endif
