#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ksd/config.hpp"
#include "ksd/phase_state.hpp"
#include "ksd/system.hpp"

namespace ksd {

enum class Command { kRun, kKse, kLyapunov, kWork, kBound, kOracle };

Command parse_command(const std::string& name);
std::string command_name(Command command);

struct RunOptions {
  std::filesystem::path out = "out";
  std::optional<std::uint64_t> seed;  // overrides the config seed
  unsigned threads = 1;
};

// One embedded invariant check; the run exits nonzero when any fails.
struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct RunResult {
  std::vector<Check> checks;
  std::vector<std::filesystem::path> files;
  bool passed() const;
};

// Builders shared with tests and the acceptance binary.
std::unique_ptr<SystemModel> make_system(const Config& config);
ControlProtocol make_protocol(const Config& config);

// Validates the config, runs the command and writes its artifacts under
// options.out. Configuration problems throw ConfigError, undersampled
// estimators EstimatorRefusal, broken internal invariants InvariantViolation.
RunResult run_experiment(Config config, Command command, const RunOptions& options);

// 0 when every check passed, 4 otherwise.
int exit_code(const RunResult& result);

}  // namespace ksd
