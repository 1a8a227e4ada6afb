#include "metaopt/optimizer.hpp"

#include <algorithm>

#include "metaopt/errors.hpp"
#include "metaopt/forward.hpp"
#include "metaopt/pipeline_json.hpp"
#include "metaopt/seeding.hpp"

namespace metaopt {

using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::prompt_tgd: return "prompt_tgd";
    case Strategy::structure_search: return "structure_search";
    case Strategy::composite_schedule: return "composite_schedule";
  }
  return "prompt_tgd";
}

Strategy strategy_from_string(const std::string& text) {
  if (text == "prompt_tgd") return Strategy::prompt_tgd;
  if (text == "structure_search") return Strategy::structure_search;
  if (text == "composite_schedule") return Strategy::composite_schedule;
  throw ParseError("unknown strategy '" + text + "'");
}

void OptimizerSpec::validate() const {
  if (!optimizer_prompt.learnable()) {
    throw ConfigError("optimizer_prompt must be learnable");
  }
  if (strategy == Strategy::composite_schedule) {
    if (schedule.empty()) {
      throw ConfigError("composite schedule needs at least one phase");
    }
    if (schedule.size() > kMaxSchedulePhases) {
      throw ConfigError("composite schedule exceeds " +
                        std::to_string(kMaxSchedulePhases) + " phases");
    }
    for (const SchedulePhase& phase : schedule) {
      if (phase.strategy == Strategy::composite_schedule) {
        throw ConfigError("schedules cannot nest composite strategies");
      }
      if (phase.repeats < 1) {
        throw ConfigError("schedule phase repeats must be >= 1");
      }
    }
  } else if (!schedule.empty()) {
    throw ConfigError("only composite_schedule optimizers carry a schedule");
  }
}

OptimizerSpec default_tgd_optimizer() {
  OptimizerSpec spec;
  spec.name = "tgd";
  spec.strategy = Strategy::prompt_tgd;
  spec.optimizer_prompt = TextVariable(
      "You improve the prompts of a multi-step language model program. "
      "Given one of its prompts, the prompt's role, and critiques of the "
      "program's mistakes, rewrite the prompt so the program solves its "
      "task more reliably. Keep instructions concrete and actionable.",
      "task description of the prompt-editing optimizer");
  return spec;
}

OptimizerSpec default_structure_optimizer() {
  OptimizerSpec spec;
  spec.name = "structure";
  spec.strategy = Strategy::structure_search;
  spec.optimizer_prompt = TextVariable(
      "You redesign the layout of a multi-step language model program. "
      "Given its current pipeline document, recent scores, and the node "
      "grammar, propose a revised pipeline document likely to solve the "
      "task more reliably. Reply with one complete JSON pipeline document.",
      "task description of the structure-search optimizer");
  return spec;
}

ordered_json optimizer_spec_to_json(const OptimizerSpec& spec) {
  ordered_json doc;
  doc["name"] = spec.name;
  doc["strategy"] = to_string(spec.strategy);
  doc["optimizer_prompt"] = {
      {"value", spec.optimizer_prompt.value()},
      {"role", spec.optimizer_prompt.role_description()},
      {"learnable", spec.optimizer_prompt.learnable()},
  };
  if (spec.strategy == Strategy::composite_schedule) {
    doc["schedule"] = ordered_json::array();
    for (const SchedulePhase& phase : spec.schedule) {
      ordered_json entry;
      entry["strategy"] = to_string(phase.strategy);
      entry["repeats"] = phase.repeats;
      if (!phase.prompt_override.empty()) {
        entry["prompt_override"] = phase.prompt_override;
      }
      doc["schedule"].push_back(std::move(entry));
    }
  }
  return doc;
}

OptimizerSpec optimizer_spec_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("optimizer spec is not an object");
  OptimizerSpec spec;
  spec.name = doc.value("name", std::string("optimizer"));
  if (!doc.contains("strategy")) {
    throw ParseError("optimizer spec has no 'strategy'");
  }
  spec.strategy = strategy_from_string(doc.at("strategy").get<std::string>());
  std::string value;
  std::string role = "task description of the optimizer";
  if (doc.contains("optimizer_prompt")) {
    const json& prompt = doc.at("optimizer_prompt");
    if (prompt.is_string()) {
      value = prompt.get<std::string>();
    } else if (prompt.is_object()) {
      value = prompt.value("value", std::string());
      role = prompt.value("role", role);
    } else {
      throw ParseError("'optimizer_prompt' must be a string or object");
    }
  }
  spec.optimizer_prompt = TextVariable(std::move(value), std::move(role), true);
  if (doc.contains("schedule")) {
    if (!doc.at("schedule").is_array()) {
      throw ParseError("'schedule' is not an array");
    }
    for (const json& entry : doc.at("schedule")) {
      SchedulePhase phase;
      if (!entry.contains("strategy")) {
        throw ParseError("schedule phase has no 'strategy'");
      }
      phase.strategy =
          strategy_from_string(entry.at("strategy").get<std::string>());
      phase.repeats = entry.value("repeats", 1);
      phase.prompt_override = entry.value("prompt_override", std::string());
      spec.schedule.push_back(std::move(phase));
    }
  }
  spec.validate();
  return spec;
}

std::string serialize_optimizer(const OptimizerSpec& spec) {
  return optimizer_spec_to_json(spec).dump(2);
}

OptimizerSpec deserialize_optimizer(const std::string& text) {
  try {
    return optimizer_spec_from_json(json::parse(strip_code_fence(text)));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed optimizer spec: ") + e.what(),
                     static_cast<long long>(e.byte));
  }
}

const std::string& evaluation_split(const TaskDataset& dataset) {
  static const std::string val = "val";
  static const std::string train = "train";
  return dataset.split("val").empty() ? train : val;
}

OptimizerState initialize(const OptimizerSpec& spec, const TaskDataset& dataset,
                          const Program& program,
                          const InnerLoopOptions& options) {
  spec.validate();
  program.validate();
  if (dataset.split("train").empty()) {
    throw ConfigError("optimizer initialization requires a train split");
  }
  if (options.program_engine == nullptr) {
    throw ConfigError("optimizer initialization requires a program engine");
  }
  OptimizerState state;
  state.spec = spec;
  state.best_program = program;
  if (options.eager_init) {
    EvaluationReport report = evaluate_program(
        program, dataset, evaluation_split(dataset), options.metric,
        *options.program_engine, options.parallelism);
    state.best_score = report.mean_score;
    state.baseline_score = report.mean_score;
  } else {
    state.best_score = 0.0;
    state.baseline_score = 0.0;
    state.lazy_init = true;
  }
  return state;
}

namespace {

std::string step_header(const OptimizerState& state,
                        const InnerLoopOptions& options) {
  return "Optimization step " + std::to_string(state.iteration) + " of " +
         std::to_string(options.iterations) + ".";
}

std::string between_markers(const std::string& text, const std::string& open,
                            const std::string& close) {
  std::size_t begin = text.find(open);
  if (begin == std::string::npos) return "";
  begin += open.size();
  std::size_t end = text.find(close, begin);
  if (end == std::string::npos) return "";
  std::string inner = text.substr(begin, end - begin);
  std::size_t first = inner.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  std::size_t last = inner.find_last_not_of(" \t\r\n") + 1;
  return inner.substr(first, last - first);
}

// Learnable slots in deterministic (map) order.
std::vector<std::string> learnable_slots(const Program& program) {
  std::vector<std::string> slots;
  for (const auto& [slot, variable] : program.prompts) {
    if (variable.learnable()) slots.push_back(slot);
  }
  return slots;
}

struct SampledExample {
  const TaskExample* example;
  std::string prediction;
  bool failed;
};

// Runs a shuffled prefix of the train split through the program and
// separates failures from successes for the feedback call.
std::vector<SampledExample> sample_for_feedback(
    const OptimizerState& state, const TaskDataset& dataset,
    const InnerLoopOptions& options) {
  const std::vector<std::size_t>& train = dataset.split("train");
  std::vector<std::size_t> order = train;
  std::mt19937_64 rng = seed_stream(
      options.seed, "tgd-sample#" + state.spec.name + "#" +
                        std::to_string(state.iteration));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t pick = rng() % i;
    std::swap(order[i - 1], order[pick]);
  }
  std::size_t scan_cap =
      std::min<std::size_t>(order.size(),
                            static_cast<std::size_t>(options.failure_sample) * 2 + 2);
  std::vector<SampledExample> failures;
  std::vector<SampledExample> successes;
  for (std::size_t i = 0; i < scan_cap; ++i) {
    if (failures.size() >= static_cast<std::size_t>(options.failure_sample)) {
      break;
    }
    const TaskExample& example = dataset.examples[order[i]];
    SampledExample sampled{&example, "", false};
    try {
      sampled.prediction = forward(state.best_program, example.question,
                                   *options.program_engine);
      double score = metric_evaluate(options.metric, sampled.prediction,
                                     example.answer, options.program_engine);
      sampled.failed = score < 1.0;
    } catch (const std::exception& e) {
      sampled.prediction = std::string("(execution failed: ") + e.what() + ")";
      sampled.failed = true;
    }
    (sampled.failed ? failures : successes).push_back(std::move(sampled));
  }
  if (failures.empty()) return successes;
  return failures;
}

}  // namespace

std::optional<Program> propose_tgd(OptimizerState& state,
                                   const OptimizerSpec& spec,
                                   const TaskDataset& dataset, Engine& engine,
                                   const InnerLoopOptions& options) {
  std::vector<std::string> slots = learnable_slots(state.best_program);
  if (slots.empty()) return std::nullopt;
  // Feedback attribution is uniform across slots, so ties are universal
  // and the round-robin tiebreak decides which slot each step edits.
  const std::string slot =
      slots[static_cast<std::size_t>(
                std::max(0, state.iteration - 1)) %
            slots.size()];
  const TextVariable& current = state.best_program.prompts.at(slot);

  std::vector<SampledExample> sampled =
      sample_for_feedback(state, dataset, options);
  bool any_failure =
      std::any_of(sampled.begin(), sampled.end(),
                  [](const SampledExample& s) { return s.failed; });

  std::string header = step_header(state, options);

  // Call 1: critique.
  std::string feedback_request = header;
  feedback_request += "\n\nThe program's prompt under review:\n";
  feedback_request += "Slot: " + slot + "\nRole: " +
                      current.role_description() + "\nCurrent value:\n" +
                      current.value() + "\n";
  if (any_failure) {
    feedback_request += "\nThe program got these training examples wrong:\n";
  } else {
    feedback_request +=
        "\nNo sampled training example failed. These were answered "
        "correctly; critique how the prompt could generalize further:\n";
  }
  for (const SampledExample& s : sampled) {
    feedback_request += "\nQuestion: " + s.example->question +
                        "\nModel output: " + s.prediction +
                        "\nReference: " + s.example->answer + "\n";
  }
  feedback_request +=
      "\nWrite a concise critique of the prompt: what it causes the program "
      "to get wrong and what must change.";

  EngineRequest feedback_call;
  feedback_call.system_text = spec.optimizer_prompt.value();
  feedback_call.user_text = feedback_request;
  feedback_call.level = CallLevel::optimizer;
  std::string critique = engine.call(feedback_call).text;

  // Call 2: rewrite, with the critique appended to the slot's feedback.
  Program working = state.best_program;
  working.prompts.at(slot).add_feedback(critique);

  std::string edit_request = header;
  edit_request += "\n\nRewrite this prompt.\nSlot: " + slot + "\nRole: " +
                  current.role_description() + "\nCurrent value:\n" +
                  current.value() + "\n\nAccumulated critiques:\n";
  for (const std::string& note : working.prompts.at(slot).feedback()) {
    edit_request += "- " + note + "\n";
  }
  edit_request +=
      "\nReply with the improved prompt text between <improved> and "
      "</improved> markers, and nothing else.";

  for (int attempt = 0; attempt < 4; ++attempt) {
    EngineRequest edit_call;
    edit_call.system_text = spec.optimizer_prompt.value();
    edit_call.user_text =
        attempt == 0
            ? edit_request
            : edit_request + "\n\nYour previous reply lacked the markers. "
                             "Reply again with the new prompt between "
                             "<improved> and </improved>.";
    edit_call.level = CallLevel::optimizer;
    std::string reply = engine.call(edit_call).text;
    std::string improved = between_markers(reply, "<improved>", "</improved>");
    if (!improved.empty()) {
      Program proposal = clone_with_prompt(working, slot, improved);
      return proposal;
    }
  }
  if (options.log) {
    options.log->emit("proposal_rejected",
                      {{"strategy", "prompt_tgd"},
                       {"step", state.iteration},
                       {"reason", "edit reply never contained markers"}});
  }
  return std::nullopt;
}

std::optional<Program> propose_structure(OptimizerState& state,
                                         const OptimizerSpec& spec,
                                         Engine& engine,
                                         const InnerLoopOptions& options) {
  std::string request = step_header(state, options);
  request += "\n\nCurrent pipeline document (score " +
             std::to_string(state.best_score) + "):\n" +
             serialize_program(state.best_program) + "\n";
  if (!state.history.empty()) {
    request += "\nRecent proposals:\n";
    std::size_t start = state.history.size() > 3 ? state.history.size() - 3 : 0;
    for (std::size_t i = start; i < state.history.size(); ++i) {
      const ProposalRecord& record = state.history[i];
      request += "- " + record.summary + " scored " +
                 std::to_string(record.score) +
                 (record.accepted ? " (accepted)" : " (kept incumbent)") + "\n";
    }
  }
  request += "\nDocument grammar:\n" + pipeline_grammar_reference() + "\n";
  request +=
      "\nReply with one complete pipeline document as JSON (a ``` fence is "
      "fine).";

  std::string error_note;
  for (int attempt = 0; attempt < 4; ++attempt) {
    EngineRequest call;
    call.system_text = spec.optimizer_prompt.value();
    call.user_text = error_note.empty()
                         ? request
                         : request + "\n\nYour previous document was "
                                     "rejected: " +
                               error_note + "\nReply with a corrected "
                                            "document.";
    call.level = CallLevel::optimizer;
    std::string reply = engine.call(call).text;
    try {
      Program proposal = deserialize_program(reply);
      ValidationResult validation = validate_spec(proposal.spec);
      if (!validation.ok()) {
        throw ParseError("invalid pipeline: " + validation.describe());
      }
      if (count_llm_calls(proposal.spec) == 0) {
        throw ParseError("pipeline keeps no llm_call node");
      }
      if (proposal.task_description.empty()) {
        proposal.task_description = state.best_program.task_description;
      }
      proposal.validate();
      return proposal;
    } catch (const std::exception& e) {
      error_note = e.what();
      if (options.log) {
        options.log->emit("proposal_parse_error",
                          {{"strategy", "structure_search"},
                           {"step", state.iteration},
                           {"attempt", attempt + 1},
                           {"error", error_note}});
      }
    }
  }
  if (options.log) {
    options.log->emit("proposal_rejected",
                      {{"strategy", "structure_search"},
                       {"step", state.iteration},
                       {"reason", error_note}});
  }
  return std::nullopt;
}

void update(OptimizerState& state, const Program& proposal, double score,
            const std::string& summary) {
  ProposalRecord record{summary, score, false};
  if (score > state.best_score) {
    state.best_program = proposal;
    state.best_score = score;
    record.accepted = true;
  }
  state.history.push_back(std::move(record));
}

InnerLoopResult run_inner_loop(const OptimizerSpec& spec,
                               const Program& program,
                               const TaskDataset& dataset,
                               const InnerLoopOptions& options) {
  if (options.iterations < 1) {
    throw ConfigError("inner loop needs iterations >= 1");
  }
  if (!options.program_engine || !options.optimizer_engine) {
    throw ConfigError("inner loop needs program and optimizer engines");
  }

  OptimizerState state = initialize(spec, dataset, program, options);
  if (options.log) {
    options.log->emit("inner_loop_started",
                      {{"optimizer", spec.name},
                       {"strategy", to_string(spec.strategy)},
                       {"baseline_score", state.baseline_score},
                       {"iterations", options.iterations}});
  }

  // Expanded per-step strategy sequence; composite schedules repeat each
  // phase's strategy before moving on, cycling when shorter than I.
  std::vector<const SchedulePhase*> phase_of_step;
  std::vector<SchedulePhase> flat;
  if (spec.strategy == Strategy::composite_schedule) {
    for (const SchedulePhase& phase : spec.schedule) {
      for (int r = 0; r < phase.repeats; ++r) flat.push_back(phase);
    }
  } else {
    flat.push_back(SchedulePhase{spec.strategy, 1, ""});
  }

  bool any_proposal = false;
  for (state.iteration = 1; state.iteration <= options.iterations;
       ++state.iteration) {
    const SchedulePhase& phase =
        flat[static_cast<std::size_t>(state.iteration - 1) % flat.size()];
    OptimizerSpec step_spec = spec;
    step_spec.strategy = phase.strategy;
    if (!phase.prompt_override.empty()) {
      step_spec.optimizer_prompt = TextVariable(
          phase.prompt_override, spec.optimizer_prompt.role_description());
    }

    std::optional<Program> proposal =
        phase.strategy == Strategy::prompt_tgd
            ? propose_tgd(state, step_spec, dataset,
                          *options.optimizer_engine, options)
            : propose_structure(state, step_spec, *options.optimizer_engine,
                                options);

    if (!proposal) {
      if (options.log) {
        options.log->emit("inner_step", {{"step", state.iteration},
                                         {"strategy",
                                          to_string(phase.strategy)},
                                         {"proposed", false},
                                         {"best_score", state.best_score}});
      }
      continue;
    }
    any_proposal = true;

    EvaluationReport report = evaluate_program(
        *proposal, dataset, evaluation_split(dataset), options.metric,
        *options.program_engine, options.parallelism);
    std::string summary = std::string(to_string(phase.strategy)) + " step " +
                          std::to_string(state.iteration);
    update(state, *proposal, report.mean_score, summary);

    if (options.log) {
      options.log->emit("inner_step",
                        {{"step", state.iteration},
                         {"strategy", to_string(phase.strategy)},
                         {"proposed", true},
                         {"proposal_score", report.mean_score},
                         {"accepted", state.history.back().accepted},
                         {"best_score", state.best_score}});
    }
  }

  InnerLoopResult result;
  result.best_program = state.best_program;
  result.best_score = state.best_score;
  result.baseline_score = state.baseline_score;
  result.history = state.history;
  result.all_rejected = !any_proposal;
  if (options.log) {
    options.log->emit("inner_loop_finished",
                      {{"optimizer", spec.name},
                       {"best_score", result.best_score},
                       {"baseline_score", result.baseline_score},
                       {"proposals", result.history.size()},
                       {"all_rejected", result.all_rejected}});
  }
  return result;
}

}  // namespace metaopt
