#pragma once

// Batch command-line front end. Exit codes: 0 ok, 2 usage or input error,
// 3 sampler diagnostics failure (outputs still written).

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace yf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDiagnostics = 3;

struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string version;
  double wall_time_s = 0.0;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const;
};

std::string version_string();

// Runs one subcommand. Errors are reported as a single JSON line on err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace yf
