#pragma once

#include "adaspider/core.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace adaspider {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2, kExitRuntime = 3 };

/// Test hooks that swap in deliberately broken pieces.
struct CliFixture {
  bool mutate_verify = false;
  std::function<ParamVector(const ParamVector&)> regularizer_gradient;
};

/// Environment variable naming the default directory for run/sweep output.
inline constexpr const char* kOutputDirEnv = "ADASPIDER_OUTPUT_DIR";

/// Entry point for `adaspider <run|sweep|verify|gradcheck> ...`. `args`
/// excludes the program name. Data goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliFixture& fixture = {});

/// Result of comparing one analytic gradient family against central differences.
struct GradcheckResult {
  std::string name;
  std::size_t points;
  double max_relative_error;
};

std::vector<GradcheckResult> gradcheck_all(std::size_t points, std::uint64_t seed,
                                           const CliFixture& fixture = {});

}  // namespace adaspider
