#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace holodisc {

/// Outcome of one configured run.
struct RunResult {
  /// 0 success, 2 solved but the certificate hypothesis was not met, 1 failure.
  int exit_code = 1;
  /// report.json contents (also written to the output directory).
  std::string report;
  /// Files written, relative to the output directory.
  std::vector<std::string> files;
  /// One-line summary, or the error with its stage.
  std::string message;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& data);

/// Validates a JSON config document, fills defaults and returns the
/// canonical form (sorted keys, no output directory). Throws ConfigError
/// with the line of the offending key.
std::string validate_config(const std::string& text);

/// Runs the command of a JSON config. `output_dir` overrides the config's
/// "output" key when non-empty. Library errors are reported through the
/// result; only unusable output directories throw.
RunResult run_config(const std::string& text, const std::string& output_dir = "",
                     bool sequential = false);

}  // namespace holodisc
