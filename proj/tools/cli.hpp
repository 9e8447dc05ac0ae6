#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfsim/exponents.hpp"

namespace selfsim::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kRangeViolation = 2,
  kAlgorithmFailure = 3,
};

/// Flat key=value experiment file. N, p, q and out are recognised; every
/// other key is a named tolerance and must be a positive number.
struct RunConfig {
  ExponentParams params;
  std::map<std::string, double> tolerances;
  std::string output_dir = ".";
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// '#' starts a comment, blank lines are skipped. Throws ConfigError.
RunConfig parse_run_config(const std::string& text);

/// Inverse of parse_run_config, numbers at 17 significant digits.
std::string to_text(const RunConfig& cfg);

/// Flat key -> value view used to prefill command flags.
std::map<std::string, std::string> flat_entries(const RunConfig& cfg);

/// Entry point for `selfsim <command> [flags]`. `args` excludes the program name.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace selfsim::cli
