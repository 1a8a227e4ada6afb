#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaopt/config.hpp"

namespace metaopt {

// One finished run as the reporter sees it: the summary and usage
// documents written into its directory.
struct RunRecord {
  std::string label;
  nlohmann::json summary;
  nlohmann::json usage;
};

// Loads summary.json and usage.json from a run directory; ConfigError
// when either is missing.
RunRecord load_run_record(const std::string& run_dir);

// Renders three plain-text tables over the given runs: score means per
// split, token usage per accounting level, and dollar cost against final
// score at the configured per-million-token prices. Throws ConfigError
// on an empty record list.
std::string report_render(const std::vector<RunRecord>& records,
                          const PriceSection& prices);

}  // namespace metaopt
