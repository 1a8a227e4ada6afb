#include "metaopt/config.hpp"

#include <fstream>
#include <set>

#include "metaopt/errors.hpp"

namespace metaopt {

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw ConfigError("config field '" + field + "' " + why);
}

void expect_object(const json& value, const std::string& field) {
  if (!value.is_object()) bad_field(field, "must be an object");
}

std::string get_string(const json& obj, const std::string& field,
                       const std::string& fallback) {
  if (!obj.contains(field)) return fallback;
  if (!obj.at(field).is_string()) bad_field(field, "must be a string");
  return obj.at(field).get<std::string>();
}

long long get_int(const json& obj, const std::string& field,
                  long long fallback) {
  if (!obj.contains(field)) return fallback;
  if (!obj.at(field).is_number_integer()) bad_field(field, "must be an integer");
  return obj.at(field).get<long long>();
}

double get_number(const json& obj, const std::string& field, double fallback) {
  if (!obj.contains(field)) return fallback;
  if (!obj.at(field).is_number()) bad_field(field, "must be a number");
  return obj.at(field).get<double>();
}

bool get_bool(const json& obj, const std::string& field, bool fallback) {
  if (!obj.contains(field)) return fallback;
  if (!obj.at(field).is_boolean()) bad_field(field, "must be a boolean");
  return obj.at(field).get<bool>();
}

NamedOrFile parse_named_or_file(const json& value, const std::string& field) {
  NamedOrFile ref;
  if (value.is_string()) {
    ref.name = value.get<std::string>();
    return ref;
  }
  expect_object(value, field);
  ref.name = get_string(value, "name", "");
  ref.path = get_string(value, "path", "");
  if (ref.name.empty() == ref.path.empty()) {
    bad_field(field, "must carry exactly one of 'name' or 'path'");
  }
  return ref;
}

EngineBinding parse_engine_binding(const json& value, const std::string& field) {
  EngineBinding binding;
  if (value.is_string()) {
    binding.kind = value.get<std::string>();
  } else {
    expect_object(value, field);
    binding.kind = get_string(value, "kind", "echo");
    binding.transcript_path = get_string(value, "transcript", "");
    binding.api_key_env = get_string(value, "api_key_env", "METAOPT_API_KEY");
    binding.http.base_url = get_string(value, "base_url", "");
    binding.http.model = get_string(value, "model", "");
    binding.http.path = get_string(value, "path", binding.http.path);
    binding.http.timeout_seconds = static_cast<int>(
        get_int(value, "timeout_seconds", binding.http.timeout_seconds));
    binding.http.max_retries = static_cast<int>(
        get_int(value, "max_retries", binding.http.max_retries));
    if (value.contains("backoff_ms")) {
      if (!value.at("backoff_ms").is_array()) {
        bad_field(field + ".backoff_ms", "must be an array of integers");
      }
      binding.http.backoff_ms.clear();
      for (const auto& entry : value.at("backoff_ms")) {
        if (!entry.is_number_integer()) {
          bad_field(field + ".backoff_ms", "must be an array of integers");
        }
        binding.http.backoff_ms.push_back(entry.get<int>());
      }
    }
  }
  if (binding.kind == "scripted" && binding.transcript_path.empty()) {
    bad_field(field, "of kind 'scripted' needs a 'transcript' path");
  }
  if (binding.kind == "http") {
    if (binding.http.base_url.empty()) {
      bad_field(field, "of kind 'http' needs a 'base_url'");
    }
    if (binding.http.model.empty()) {
      bad_field(field, "of kind 'http' needs a 'model'");
    }
  }
  if (binding.kind != "echo" && binding.kind != "scripted" &&
      binding.kind != "http") {
    bad_field(field, "has unknown engine kind '" + binding.kind + "'");
  }
  return binding;
}

DatasetSection parse_dataset(const json& value) {
  DatasetSection ds;
  expect_object(value, "dataset");
  ds.path = get_string(value, "path", "");
  ds.generator = get_string(value, "generator", "");
  ds.size = static_cast<int>(get_int(value, "size", ds.size));
  ds.seed = static_cast<std::uint64_t>(get_int(value, "seed", 0));
  if (value.contains("splits")) {
    const auto& splits = value.at("splits");
    expect_object(splits, "dataset.splits");
    ds.train = static_cast<int>(get_int(splits, "train", -1));
    ds.val = static_cast<int>(get_int(splits, "val", -1));
    ds.test = static_cast<int>(get_int(splits, "test", -1));
  }
  if (ds.path.empty() == ds.generator.empty()) {
    bad_field("dataset", "must carry exactly one of 'path' or 'generator'");
  }
  if (!ds.generator.empty() && ds.generator != "word_sorting" &&
      ds.generator != "dyck") {
    bad_field("dataset.generator",
              "must be 'word_sorting' or 'dyck', got '" + ds.generator + "'");
  }
  if (!ds.generator.empty() && ds.size < 1) {
    bad_field("dataset.size", "must be at least 1");
  }
  return ds;
}

MetaSection parse_meta(const json& value) {
  MetaSection meta;
  expect_object(value, "meta");
  meta.kind = get_string(value, "kind", meta.kind);
  if (meta.kind != "meta_prompt" && meta.kind != "meta_structure" &&
      meta.kind != "two_stage") {
    bad_field("meta.kind",
              "must be 'meta_prompt', 'meta_structure', or 'two_stage', got '" +
                  meta.kind + "'");
  }
  meta.meta_iterations =
      static_cast<int>(get_int(value, "meta_iterations", meta.meta_iterations));
  meta.meta_temperature =
      get_number(value, "meta_temperature", meta.meta_temperature);
  if (meta.meta_iterations < 1) {
    bad_field("meta.meta_iterations", "must be at least 1");
  }
  if (value.contains("inputs")) {
    if (!value.at("inputs").is_array()) {
      bad_field("meta.inputs", "must be an array");
    }
    for (const auto& entry : value.at("inputs")) {
      meta.inputs.push_back(parse_named_or_file(entry, "meta.inputs[]"));
    }
  }
  return meta;
}

BoundSection parse_bound(const json& value) {
  BoundSection bound;
  expect_object(value, "bound");
  bound.n = get_int(value, "n", bound.n);
  bound.m = get_int(value, "m", bound.m);
  bound.delta = get_number(value, "delta", bound.delta);
  bound.r_star = get_number(value, "r_star", bound.r_star);
  bound.trials = get_int(value, "trials", bound.trials);
  bound.seed = static_cast<std::uint64_t>(get_int(value, "seed", 0));
  if (value.contains("risks")) {
    if (!value.at("risks").is_array()) {
      bad_field("bound.risks", "must be an array of numbers");
    }
    for (const auto& entry : value.at("risks")) {
      if (!entry.is_number()) {
        bad_field("bound.risks", "must be an array of numbers");
      }
      bound.risks.push_back(entry.get<double>());
    }
  }
  return bound;
}

}  // namespace

nlohmann::ordered_json EngineBinding::canonical() const {
  nlohmann::ordered_json doc;
  doc["kind"] = kind;
  if (kind == "scripted") doc["transcript"] = transcript_path;
  if (kind == "http") {
    doc["base_url"] = http.base_url;
    doc["model"] = http.model;
    doc["path"] = http.path;
  }
  return doc;
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& err) {
    throw ParseError(path + ": " + err.what());
  }
}

RunConfig run_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
  static const std::set<std::string> known = {
      "run_name",   "output_dir", "seeds",      "seed",    "parallelism",
      "cache_dir",  "eval_split", "dataset",    "metric",  "program",
      "optimizer",  "meta",       "inner",      "engines", "bound",
      "report",     "prices"};
  for (const auto& item : doc.items()) {
    if (!known.count(item.key())) {
      throw ConfigError("unknown config field '" + item.key() + "'");
    }
  }

  RunConfig config;
  config.raw = doc;
  config.run_name = get_string(doc, "run_name", "");
  config.output_dir = get_string(doc, "output_dir", config.output_dir);
  config.parallelism =
      static_cast<int>(get_int(doc, "parallelism", config.parallelism));
  if (config.parallelism < 1) bad_field("parallelism", "must be at least 1");
  config.cache_dir = get_string(doc, "cache_dir", "");
  config.eval_split = get_string(doc, "eval_split", config.eval_split);

  if (doc.contains("seeds")) {
    if (!doc.at("seeds").is_array() || doc.at("seeds").empty()) {
      bad_field("seeds", "must be a non-empty array of integers");
    }
    config.seeds.clear();
    for (const auto& entry : doc.at("seeds")) {
      if (!entry.is_number_integer()) {
        bad_field("seeds", "must be a non-empty array of integers");
      }
      config.seeds.push_back(entry.get<std::uint64_t>());
    }
  } else if (doc.contains("seed")) {
    config.seeds = {static_cast<std::uint64_t>(get_int(doc, "seed", 0))};
  }

  if (doc.contains("dataset")) config.dataset = parse_dataset(doc.at("dataset"));

  if (doc.contains("metric")) {
    const auto& metric = doc.at("metric");
    if (metric.is_string()) {
      config.metric.kind = metric_kind_from_string(metric.get<std::string>());
    } else {
      expect_object(metric, "metric");
      config.metric.kind =
          metric_kind_from_string(get_string(metric, "kind", "exact_text"));
      config.metric.judge_prompt = get_string(metric, "judge_prompt", "");
    }
  }

  if (doc.contains("program")) {
    config.program = parse_named_or_file(doc.at("program"), "program");
  }
  if (doc.contains("optimizer")) {
    config.optimizer = parse_named_or_file(doc.at("optimizer"), "optimizer");
  }
  if (doc.contains("meta")) config.meta = parse_meta(doc.at("meta"));

  if (doc.contains("inner")) {
    const auto& inner = doc.at("inner");
    expect_object(inner, "inner");
    config.inner_iterations = static_cast<int>(
        get_int(inner, "iterations", config.inner_iterations));
    config.eager_init = get_bool(inner, "eager_init", config.eager_init);
    config.failure_sample = static_cast<int>(
        get_int(inner, "failure_sample", config.failure_sample));
    if (config.inner_iterations < 1) {
      bad_field("inner.iterations", "must be at least 1");
    }
  }

  if (doc.contains("engines")) {
    const auto& engines = doc.at("engines");
    expect_object(engines, "engines");
    for (const auto& item : engines.items()) {
      if (item.key() != "program" && item.key() != "optimizer" &&
          item.key() != "meta") {
        bad_field("engines", "has unknown level '" + item.key() +
                                 "' (expected program, optimizer, meta)");
      }
      config.engines[item.key()] =
          parse_engine_binding(item.value(), "engines." + item.key());
    }
  }

  if (doc.contains("bound")) config.bound = parse_bound(doc.at("bound"));

  if (doc.contains("report")) {
    const auto& report = doc.at("report");
    expect_object(report, "report");
    if (report.contains("runs")) {
      if (!report.at("runs").is_array()) {
        bad_field("report.runs", "must be an array of run directories");
      }
      for (const auto& entry : report.at("runs")) {
        if (!entry.is_string()) {
          bad_field("report.runs", "must be an array of run directories");
        }
        config.report_runs.push_back(entry.get<std::string>());
      }
    }
  }

  if (doc.contains("prices")) {
    const auto& prices = doc.at("prices");
    expect_object(prices, "prices");
    config.prices.prompt_per_million =
        get_number(prices, "prompt_per_million", 0.0);
    config.prices.completion_per_million =
        get_number(prices, "completion_per_million", 0.0);
  }

  return config;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(load_json_file(path));
}

}  // namespace metaopt
