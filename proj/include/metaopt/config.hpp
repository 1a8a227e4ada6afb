#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaopt/http_engine.hpp"
#include "metaopt/metrics.hpp"

namespace metaopt {

// One engine slot of the run configuration. Identical bindings at
// different levels are collapsed to a single engine instance, so the
// canonical form doubles as the aliasing key.
struct EngineBinding {
  std::string kind = "echo";   // echo | scripted | http
  std::string transcript_path; // scripted only
  HttpEngineOptions http;      // http only
  std::string api_key_env = "METAOPT_API_KEY";

  nlohmann::ordered_json canonical() const;
};

// Where examples come from: a JSONL file on disk or one of the built-in
// generators, plus optional consecutive train/val/test counts.
struct DatasetSection {
  std::string path;
  std::string generator;  // "word_sorting" | "dyck"
  int size = 64;
  std::uint64_t seed = 0;
  int train = -1;  // -1 keeps the file's split header / puts all in train
  int val = -1;
  int test = -1;
};

struct MetricSection {
  MetricKind kind = MetricKind::exact_text;
  std::string judge_prompt;
};

// A program or optimizer reference: a built-in name or a JSON document
// on disk. Exactly one of the two is set.
struct NamedOrFile {
  std::string name;
  std::string path;
  bool empty() const { return name.empty() && path.empty(); }
};

struct MetaSection {
  std::string kind = "two_stage";  // meta_prompt | meta_structure | two_stage
  std::vector<NamedOrFile> inputs;
  int meta_iterations = 3;
  double meta_temperature = 1.0;
};

struct PriceSection {
  double prompt_per_million = 0.0;
  double completion_per_million = 0.0;
};

struct BoundSection {
  long long n = 100;
  long long m = 100;
  double delta = 0.05;
  double r_star = 0.0;
  long long trials = 0;  // 0: closed-form evaluation only
  std::vector<double> risks;
  std::uint64_t seed = 0;
};

struct RunConfig {
  std::string run_name;
  std::string output_dir = "runs";
  std::vector<std::uint64_t> seeds{0};
  int parallelism = 1;
  std::string cache_dir;  // empty: METAOPT_CACHE_DIR if set, else uncached
  std::string eval_split = "val";

  DatasetSection dataset;
  MetricSection metric;
  NamedOrFile program;
  NamedOrFile optimizer;  // run-inner
  MetaSection meta;       // run-meta

  int inner_iterations = 6;
  bool eager_init = true;
  int failure_sample = 3;

  std::map<std::string, EngineBinding> engines;  // program / optimizer / meta

  BoundSection bound;
  std::vector<std::string> report_runs;
  PriceSection prices;

  nlohmann::ordered_json raw;  // resolved document, copied into run artifacts
};

// Reads and parses a JSON file; ConfigError when the file cannot be
// opened, ParseError when it is not valid JSON.
nlohmann::json load_json_file(const std::string& path);

// Builds a RunConfig from a parsed document, applying defaults and
// validating field types. Unknown top-level keys are rejected so typos
// fail loudly instead of silently running with defaults.
RunConfig run_config_from_json(const nlohmann::json& doc);

RunConfig load_run_config(const std::string& path);

}  // namespace metaopt
