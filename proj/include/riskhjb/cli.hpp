#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskhjb/error.hpp"
#include "riskhjb/model.hpp"

namespace riskhjb {

inline constexpr const char* kToolVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitParse = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitVerification = 4;

/// Parse errors map to 1, model errors to 2, numerical failures to 3,
/// config hash mismatches to 4.
int exit_code_for(ErrorCode code);

struct CliOptions {
  std::string command;
  std::string config_path;
  std::string out_dir = "out";
  std::string artifacts_dir;          // verify/simulate: solve output, defaults to out_dir
  std::vector<int> grid;              // --grid N or NxN
  int time_steps = 0;                 // --tmax-steps
  std::optional<double> theta;        // --theta override
  long long paths = 100000;
  double dt = 0.01;
  std::uint64_t seed = 1;
  bool oracle = false;
  bool antithetic = false;
  int threads = 0;
  std::vector<double> x0;             // default: box centre
  std::vector<double> policy;         // simulate: constant h; empty uses the solved policy or zero
  int dump_paths = 0;                 // simulate: factor paths written to sample_paths.csv (<= 1000)
};

/// Written as manifest.json before any result and rewritten on completion.
struct RunManifest {
  std::string config_path;
  std::string command;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::string started;
  std::string finished;
  std::string config_hash;
  nlohmann::json flags;
  std::optional<int> exit_code;
  double wall_seconds = 0.0;
};

nlohmann::json to_json(const RunManifest& manifest);
nlohmann::json validation_to_json(const ValidationReport& report);

int cmd_validate(const CliOptions& options, std::ostream& log);
int cmd_solve(const CliOptions& options, std::ostream& log);
int cmd_simulate(const CliOptions& options, std::ostream& log);
int cmd_verify(const CliOptions& options, std::ostream& log);
int cmd_oracle(const CliOptions& options, std::ostream& log);

/// Dispatches on options.command.
int run_command(const CliOptions& options, std::ostream& log);

}  // namespace riskhjb
