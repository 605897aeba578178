#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coarse/group.hpp"
#include "coarse/pipeline.hpp"

namespace coarse::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kVerificationFail = 4,
  kNoConvergence = 5,
};

struct RunConfig {
  std::string subcommand;
  GroupSpec group = GroupSpec::lattice(1);
  int radius = 2;
  std::string out = "out";
  std::string kernel;     // CSV path; empty means the word metric
  std::string embedding;  // CSV path for `profile`
  // check
  std::vector<std::string> checks{"psd", "cnd", "decay", "properness"};
  std::vector<double> levels{0.5, 1.0, 2.0, 4.0};
  bool strict = false;
  // embed
  std::string method = "gns";
  int n = 0;
  // pipeline
  std::string entry = "kernel";
  std::string family = "exponential";
  ScheduleParams schedule;
  std::vector<double> t_grid{0.1, 0.5, 1.0, 2.0, 10.0};
  int n_split = 0;
  int max_partial = 0;
  // profile
  std::vector<int> radii;
  // tolerances
  double tol = 1e-6;
  double schur_tol = 1e-6;
  double inner_tol = 1e-8;
  std::uint64_t seed = 0;
  std::string format = "json";
  bool dump_config = false;

  /// Throws UsageError for non-positive tolerances or bad enum values.
  void validate() const;
};

nlohmann::json config_to_json(const RunConfig& c);
/// Merges keys of j into c; unknown keys raise UsageError.
void apply_config_json(RunConfig& c, const nlohmann::json& j);

/// Throws UsageError (including for --help, with the help text as message
/// and exit code 0 reported through help_requested).
RunConfig parse_config(int argc, const char* const* argv, bool* help_requested = nullptr,
                       std::string* help_text = nullptr);

/// Runs a resolved config; returns an exit code.
int execute(const RunConfig& config);

/// parse_config + execute with error-to-exit-code mapping.
int main(int argc, const char* const* argv);

}  // namespace coarse::cli
