#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace contagion::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

inline constexpr const char* kVersion = "1.0.0";

struct CommandOptions {
  std::string command;  // run-finite, run-particle, run-meanfield, run-liquidity, check-continuity, fit-network
  std::string config;
  std::string out;      // may be empty for check-continuity
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> b0_seed;
  std::optional<std::size_t> paths;
  std::optional<std::size_t> particles;
  std::optional<std::size_t> grid_steps;
  std::optional<std::string> mode;
  int workers = 0;  // 0 uses the OpenMP default
  bool check_equivalence = false;
};

// Runs one command. Errors are reported as a JSON object on `err` and mapped
// to exit codes: 2 for invalid input, 3 for failures during the run.
int run_command(const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace contagion::cli
