#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "imgan/gan/config.hpp"

namespace imgan::cli {

// Error classes map to exit codes and stable stderr prefixes:
//   UsageError    -> 1, "usage error: "
//   DataError     -> 2, "data error: "
//   TrainingError -> 3, "training error: "
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Run settings parsed from a JSON config file.  Unknown keys anywhere in the
// document are rejected; every field has a documented default.
struct RunConfig {
  gan::TrainConfig train;

  bool operator==(const RunConfig&) const = default;
};

// Parses and validates config JSON text.  Throws UsageError with a
// "config: ..." message on unknown keys, bad types, or invalid values.
RunConfig parse_run_config(const std::string& json_text);

// The fully resolved configuration as deterministic JSON (sorted keys,
// trailing newline); train echoes this into the run directory.
std::string effective_config_json(const RunConfig& cfg);

// Entry point used by the binary and by tests.  args excludes argv[0].
// Returns the process exit code; user output goes to out, errors to err.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace imgan::cli
