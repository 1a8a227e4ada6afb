#include "metaopt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <vector>

#include "metaopt/bounds.hpp"
#include "metaopt/cached_engine.hpp"
#include "metaopt/dataset.hpp"
#include "metaopt/errors.hpp"
#include "metaopt/evaluate.hpp"
#include "metaopt/events.hpp"
#include "metaopt/http_engine.hpp"
#include "metaopt/meta.hpp"
#include "metaopt/optimizer.hpp"
#include "metaopt/pipeline_json.hpp"
#include "metaopt/program_library.hpp"
#include "metaopt/report.hpp"
#include "metaopt/scripted_engine.hpp"

namespace metaopt {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// All engines of one run: at most three instances (levels with identical
// bindings share one), each optionally wrapped by a response cache, all
// feeding a single usage ledger keyed by request level.
struct EngineSet {
  std::shared_ptr<UsageLedger> ledger;
  std::vector<std::shared_ptr<Engine>> keep_alive;
  Engine* program = nullptr;
  Engine* optimizer = nullptr;
  Engine* meta = nullptr;
  std::vector<CachedEngine*> caches;
  std::vector<ScriptedEngine*> scripted;
};

std::shared_ptr<Engine> make_base_engine(const EngineBinding& binding,
                                         bool live) {
  if (binding.kind == "echo") {
    return std::make_shared<EchoEngine>();
  }
  if (binding.kind == "scripted") {
    return std::make_shared<ScriptedEngine>(
        load_json_file(binding.transcript_path));
  }
  // http
  if (!live) {
    throw ConfigError(
        "engine kind 'http' makes network calls; rerun with --live to allow");
  }
  HttpEngineOptions options = binding.http;
  const char* key = std::getenv(binding.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw ConfigError("environment variable " + binding.api_key_env +
                      " is not set");
  }
  options.api_key = key;
  return std::make_shared<HttpEngine>(options);
}

EngineSet build_engines(const RunConfig& config, bool live,
                        const std::string& cache_dir, EventLog* log) {
  EngineSet set;
  set.ledger = std::make_shared<UsageLedger>();
  std::map<std::string, Engine*> by_binding;

  auto resolve = [&](const std::string& level) -> Engine* {
    EngineBinding binding;  // default: echo
    auto it = config.engines.find(level);
    if (it != config.engines.end()) binding = it->second;

    const std::string key = binding.canonical().dump();
    auto found = by_binding.find(key);
    if (found != by_binding.end()) return found->second;

    std::shared_ptr<Engine> base = make_base_engine(binding, live);
    if (auto* s = dynamic_cast<ScriptedEngine*>(base.get())) {
      set.scripted.push_back(s);
    }
    set.keep_alive.push_back(base);
    Engine* outer = base.get();
    if (!cache_dir.empty()) {
      auto cached = std::make_shared<CachedEngine>(*base, cache_dir);
      if (log != nullptr) {
        cached->set_warning_hook([log](const std::string& message) {
          log->emit("cache_degraded", {{"message", message}});
        });
      }
      set.caches.push_back(cached.get());
      set.keep_alive.push_back(cached);
      outer = cached.get();
    }
    outer->attach_ledger(set.ledger.get());
    by_binding.emplace(key, outer);
    return outer;
  };

  set.program = resolve("program");
  set.optimizer = resolve("optimizer");
  set.meta = resolve("meta");
  return set;
}

TaskDataset build_dataset(const DatasetSection& section) {
  TaskDataset dataset;
  if (!section.path.empty()) {
    dataset = load_dataset(section.path);
  } else if (section.generator == "word_sorting") {
    dataset = gen_word_sorting(static_cast<std::size_t>(section.size),
                               section.seed);
  } else {
    dataset = gen_dyck(static_cast<std::size_t>(section.size), section.seed);
  }
  if (section.train >= 0) {
    assign_splits(dataset, static_cast<std::size_t>(section.train),
                  static_cast<std::size_t>(std::max(section.val, 0)),
                  static_cast<std::size_t>(std::max(section.test, 0)));
  }
  dataset.check_splits();
  return dataset;
}

Program build_program(const NamedOrFile& ref) {
  if (ref.empty()) {
    throw ConfigError("config needs a 'program' (built-in name or file path)");
  }
  if (!ref.name.empty()) return reference_program(ref.name);
  return program_from_json(load_json_file(ref.path));
}

OptimizerSpec build_optimizer(const NamedOrFile& ref) {
  if (ref.empty()) return default_tgd_optimizer();
  if (!ref.name.empty()) {
    if (ref.name == "tgd") return default_tgd_optimizer();
    if (ref.name == "structure") return default_structure_optimizer();
    throw ConfigError("unknown optimizer name '" + ref.name +
                      "' (expected 'tgd' or 'structure')");
  }
  return optimizer_spec_from_json(load_json_file(ref.path));
}

std::vector<OptimizerSpec> build_meta_inputs(const MetaSection& meta) {
  std::vector<OptimizerSpec> inputs;
  for (const auto& ref : meta.inputs) inputs.push_back(build_optimizer(ref));
  if (inputs.empty()) {
    inputs = {default_tgd_optimizer(), default_structure_optimizer()};
  }
  return inputs;
}

void write_json_file(const fs::path& path, const ordered_json& doc) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

// Mean and population standard deviation, accumulated in ascending-seed
// order so the result does not depend on the order seeds were listed.
struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
};

Aggregate aggregate_scores(std::vector<std::pair<std::uint64_t, double>> rows) {
  std::sort(rows.begin(), rows.end());
  Aggregate agg;
  if (rows.empty()) return agg;
  for (const auto& [seed, score] : rows) agg.mean += score;
  agg.mean /= static_cast<double>(rows.size());
  double variance = 0.0;
  for (const auto& [seed, score] : rows) {
    variance += (score - agg.mean) * (score - agg.mean);
  }
  agg.stddev = std::sqrt(variance / static_cast<double>(rows.size()));
  return agg;
}

ordered_json aggregate_json(const Aggregate& agg) {
  return ordered_json{{"mean", agg.mean}, {"std", agg.stddev}};
}

// The split scored after optimization finishes: the held-out test split
// when one exists, otherwise the split optimization itself selected on.
std::string final_split(const TaskDataset& dataset) {
  if (!dataset.split("test").empty()) return "test";
  return evaluation_split(dataset);
}

InnerLoopOptions make_inner_options(const RunConfig& config,
                                    const EngineSet& engines,
                                    std::uint64_t seed, EventLog* log) {
  InnerLoopOptions options;
  options.iterations = config.inner_iterations;
  options.metric = Metric{config.metric.kind, config.metric.judge_prompt};
  options.parallelism = config.parallelism;
  options.eager_init = config.eager_init;
  options.seed = seed;
  options.failure_sample = config.failure_sample;
  options.program_engine = engines.program;
  options.optimizer_engine = engines.optimizer;
  options.log = log;
  return options;
}

double final_evaluation(const Program& program, const TaskDataset& dataset,
                        const RunConfig& config, const EngineSet& engines,
                        std::uint64_t seed, EventLog& log,
                        const std::string& split) {
  Metric metric{config.metric.kind, config.metric.judge_prompt};
  ForwardOptions forward;
  forward.seed = seed;
  EvaluationReport report = evaluate_program(
      program, dataset, split, metric, *engines.program, config.parallelism,
      forward);
  log.emit("final_evaluation",
           {{"seed", seed},
            {"split", split},
            {"mean_score", report.mean_score},
            {"n", report.n_evaluated},
            {"failed", static_cast<long long>(report.failed.size())}});
  return report.mean_score;
}

std::string run_label(const RunConfig& config, const std::string& mode) {
  return config.run_name.empty() ? mode : config.run_name;
}

void write_stats(const fs::path& run_dir, const EngineSet& engines) {
  long long hits = 0;
  long long misses = 0;
  for (const auto* cache : engines.caches) {
    hits += cache->hits();
    misses += cache->misses();
  }
  long long served = 0;
  for (const auto* s : engines.scripted) served += s->served();
  ordered_json stats;
  stats["cache"] = {{"enabled", !engines.caches.empty()},
                    {"hits", hits},
                    {"misses", misses}};
  stats["scripted_served"] = served;
  write_json_file(run_dir / "stats.json", stats);
}

int run_bound(const RunConfig& config, std::ostream& out) {
  const BoundSection& section = config.bound;
  BoundResult result =
      two_sample_bound({section.n, section.m, section.delta, section.r_star});
  ordered_json doc;
  doc["n"] = section.n;
  doc["m"] = section.m;
  doc["delta"] = section.delta;
  doc["r_star"] = section.r_star;
  doc["epsilon_n"] = result.epsilon_n;
  doc["epsilon_m"] = result.epsilon_m;
  doc["bound_rhs"] = result.bound_rhs;
  doc["decomposition_gap"] =
      result.bound_rhs - section.r_star -
      (2.0 * result.epsilon_n + result.epsilon_m);
  if (section.trials > 0) {
    BernoulliLossModel model;
    model.risks = section.risks.empty()
                      ? std::vector<double>{0.3, 0.35, 0.5, 0.6}
                      : section.risks;
    doc["trials"] = section.trials;
    doc["coverage"] = empirical_bound_check(model, section.n, section.m,
                                            section.delta, section.trials,
                                            section.seed);
  }
  out << doc.dump(2) << "\n";
  return 0;
}

int run_report(const RunConfig& config, std::ostream& out) {
  if (config.report_runs.empty()) {
    throw ConfigError("report mode needs report.runs entries");
  }
  std::vector<RunRecord> records;
  for (const auto& dir : config.report_runs) {
    records.push_back(load_run_record(dir));
  }
  out << report_render(records, config.prices);
  return 0;
}

}  // namespace

std::string next_run_dir(const std::string& output_dir) {
  const fs::path root(output_dir);
  fs::create_directories(root);
  int highest = 0;
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("run-", 0) != 0) continue;
    const std::string digits = name.substr(4);
    if (digits.empty() ||
        digits.find_first_not_of("0123456789") != std::string::npos) {
      continue;
    }
    highest = std::max(highest, std::stoi(digits));
  }
  for (int next = highest + 1;; ++next) {
    char buffer[16];
    std::snprintf(buffer, sizeof(buffer), "run-%03d", next);
    const fs::path candidate = root / buffer;
    // create_directory is atomic, so concurrent invocations cannot claim
    // the same number.
    if (fs::create_directory(candidate)) return candidate.string();
  }
}

int cli_run(const CliOptions& options, std::ostream& out, std::ostream& err) {
  try {
    RunConfig config = load_run_config(options.config_path);
    if (options.has_seed_override) {
      config.seeds = {options.seed_override};
      config.raw["seeds"] = ordered_json::array({options.seed_override});
      config.raw.erase("seed");
    }

    if (options.mode == "bound") return run_bound(config, out);
    if (options.mode == "report") return run_report(config, out);
    if (options.mode != "eval" && options.mode != "run-inner" &&
        options.mode != "run-meta") {
      throw ConfigError("unknown mode '" + options.mode + "'");
    }

    std::string cache_dir = config.cache_dir;
    if (cache_dir.empty()) {
      const char* env = std::getenv("METAOPT_CACHE_DIR");
      if (env != nullptr && *env != '\0') cache_dir = env;
    }

    const fs::path run_dir(next_run_dir(config.output_dir));
    EventLog log(run_dir / "events.jsonl");
    EngineSet engines = build_engines(config, options.live, cache_dir, &log);
    TaskDataset dataset = build_dataset(config.dataset);
    Program program = build_program(config.program);
    Metric metric{config.metric.kind, config.metric.judge_prompt};

    write_json_file(run_dir / "config.json", config.raw);
    // Event payloads never mention the run directory: logs of repeat runs
    // must be identical up to timestamps.
    log.emit("run_started",
             {{"mode", options.mode}, {"label", run_label(config, options.mode)},
              {"seeds", config.seeds}});

    ordered_json per_seed = ordered_json::array();
    std::vector<std::pair<std::uint64_t, double>> val_rows;
    std::vector<std::pair<std::uint64_t, double>> final_rows;
    std::string final_split_name;
    double best_val = -1.0;
    ordered_json best_program_doc;
    ordered_json best_optimizer_doc;

    for (std::uint64_t seed : config.seeds) {
      log.emit("seed_started", {{"seed", seed}});
      ordered_json row;
      row["seed"] = seed;

      if (options.mode == "eval") {
        ForwardOptions forward;
        forward.seed = seed;
        log.emit("evaluation_started",
                 {{"seed", seed}, {"split", config.eval_split}});
        EvaluationReport report = evaluate_program(
            program, dataset, config.eval_split, metric, *engines.program,
            config.parallelism, forward);
        log.emit("evaluation_finished",
                 {{"seed", seed},
                  {"split", config.eval_split},
                  {"mean_score", report.mean_score},
                  {"n", report.n_evaluated},
                  {"failed", static_cast<long long>(report.failed.size())}});
        row["split"] = config.eval_split;
        row["score"] = report.mean_score;
        row["n"] = report.n_evaluated;
        val_rows.emplace_back(seed, report.mean_score);
        if (report.mean_score > best_val) {
          best_val = report.mean_score;
          best_program_doc = program_to_json(program);
        }
      } else if (options.mode == "run-inner") {
        OptimizerSpec spec = build_optimizer(config.optimizer);
        InnerLoopOptions inner = make_inner_options(config, engines, seed, &log);
        InnerLoopResult result = run_inner_loop(spec, program, dataset, inner);
        const std::string split = final_split(dataset);
        const double final_score = final_evaluation(
            result.best_program, dataset, config, engines, seed, log, split);
        row["baseline"] = result.baseline_score;
        row["val"] = result.best_score;
        row["final_split"] = split;
        row["final"] = final_score;
        row["all_rejected"] = result.all_rejected;
        final_split_name = split;
        val_rows.emplace_back(seed, result.best_score);
        final_rows.emplace_back(seed, final_score);
        if (result.best_score > best_val) {
          best_val = result.best_score;
          best_program_doc = program_to_json(result.best_program);
        }
      } else {  // run-meta
        std::vector<OptimizerSpec> inputs = build_meta_inputs(config.meta);
        OuterLoopOptions outer;
        outer.meta_iterations = config.meta.meta_iterations;
        outer.meta_temperature = config.meta.meta_temperature;
        outer.inner = make_inner_options(config, engines, seed, &log);
        outer.meta_engine = engines.meta;

        OuterLoopResult result;
        if (config.meta.kind == "two_stage") {
          result = run_two_stage(inputs, program, dataset, outer).final;
        } else {
          outer.kind = meta_kind_from_string(config.meta.kind);
          result = run_outer_loop(inputs, program, dataset, outer);
        }
        const std::string split = final_split(dataset);
        const double final_score = final_evaluation(
            result.best_program, dataset, config, engines, seed, log, split);
        row["optimizer"] = result.best_optimizer.name;
        row["val"] = result.best_score;
        row["final_split"] = split;
        row["final"] = final_score;
        final_split_name = split;
        val_rows.emplace_back(seed, result.best_score);
        final_rows.emplace_back(seed, final_score);
        if (result.best_score > best_val) {
          best_val = result.best_score;
          best_program_doc = program_to_json(result.best_program);
          best_optimizer_doc = optimizer_spec_to_json(result.best_optimizer);
        }
      }
      per_seed.push_back(std::move(row));
    }

    ordered_json summary;
    summary["mode"] = options.mode;
    summary["label"] = run_label(config, options.mode);
    summary["seeds"] = config.seeds;
    summary["per_seed"] = std::move(per_seed);
    if (options.mode == "eval") {
      summary["val"] = aggregate_json(aggregate_scores(val_rows));
    } else {
      summary["val"] = aggregate_json(aggregate_scores(val_rows));
      if (final_split_name == "test") {
        summary["test"] = aggregate_json(aggregate_scores(final_rows));
      } else {
        summary["final"] = aggregate_json(aggregate_scores(final_rows));
        summary["final_split"] = final_split_name;
      }
    }

    log.emit("run_finished",
             {{"mode", options.mode},
              {"val_mean", summary["val"]["mean"].get<double>()}});

    write_json_file(run_dir / "summary.json", summary);
    write_json_file(run_dir / "usage.json", engines.ledger->to_json());
    write_stats(run_dir, engines);
    if (!best_program_doc.is_null()) {
      write_json_file(run_dir / "best_program.json", best_program_doc);
    }
    if (!best_optimizer_doc.is_null()) {
      write_json_file(run_dir / "best_optimizer.json", best_optimizer_doc);
    }

    out << "run dir: " << run_dir.string() << "\n";
    out << "val mean " << summary["val"]["mean"].get<double>();
    if (summary.contains("test")) {
      out << ", test mean " << summary["test"]["mean"].get<double>();
    }
    out << " (" << config.seeds.size() << " seed"
        << (config.seeds.size() == 1 ? "" : "s") << ")\n";
    return 0;
  } catch (const std::exception& failure) {
    err << "error: " << failure.what() << "\n";
    return 1;
  }
}

}  // namespace metaopt
