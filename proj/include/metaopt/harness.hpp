#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "metaopt/config.hpp"

namespace metaopt {

// Parsed command line of the `metaopt` tool.
struct CliOptions {
  std::string mode;  // run-inner | run-meta | eval | bound | report
  std::string config_path;
  bool live = false;  // permits http engine bindings
  bool has_seed_override = false;
  std::uint64_t seed_override = 0;
};

// Allocates the next sequence-numbered run directory (run-001, run-002,
// ...) under output_dir, creating parents as needed. Existing runs are
// never reused or overwritten.
std::string next_run_dir(const std::string& output_dir);

// Executes one CLI invocation end to end: loads the config, builds
// engines / dataset / program, runs the requested mode, and writes run
// artifacts (config.json, events.jsonl, summary.json, stats.json,
// usage.json, best_program.json, and for meta runs best_optimizer.json).
// bound and report print to `out` without creating a run directory.
// Returns a process exit code; failures print one line to `err`.
int cli_run(const CliOptions& options, std::ostream& out, std::ostream& err);

}  // namespace metaopt
