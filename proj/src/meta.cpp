#include "metaopt/meta.hpp"

#include <algorithm>

#include "metaopt/errors.hpp"
#include "metaopt/meta_prompts.hpp"
#include "metaopt/seeding.hpp"

namespace metaopt {

const char* to_string(MetaKind kind) {
  switch (kind) {
    case MetaKind::meta_prompt: return "meta_prompt";
    case MetaKind::meta_structure: return "meta_structure";
  }
  return "meta_prompt";
}

MetaKind meta_kind_from_string(const std::string& text) {
  if (text == "meta_prompt") return MetaKind::meta_prompt;
  if (text == "meta_structure") return MetaKind::meta_structure;
  throw ParseError("unknown meta kind '" + text + "'");
}

namespace {

std::string meta_header(int j, int total) {
  return "Meta iteration " + std::to_string(j) + " of " +
         std::to_string(total) + ".";
}

void require_val_split(const TaskDataset& dataset) {
  if (dataset.split("val").empty()) {
    throw ConfigError("meta optimization requires a non-empty val split");
  }
}

}  // namespace

MetaState meta_prompt_initialize(const TaskDataset& dataset,
                                 const OptimizerSpec& optimizer,
                                 const Program& program,
                                 const OuterLoopOptions& options) {
  require_val_split(dataset);
  InnerLoopResult baseline =
      run_inner_loop(optimizer, program, dataset, options.inner);
  MetaState state;
  state.best_optimizer = optimizer;
  state.best_score = baseline.best_score;
  state.best_program = baseline.best_program;
  state.input_optimizers = {optimizer};
  state.input_scores = {baseline.best_score};
  return state;
}

std::optional<OptimizerSpec> meta_prompt_propose(MetaState& state,
                                                 const TaskDataset& dataset,
                                                 const OuterLoopOptions& options,
                                                 int meta_iteration) {
  const std::vector<std::size_t>& train = dataset.split("train");
  if (train.empty()) {
    throw ConfigError("meta proposal requires a train split");
  }
  // Purpose keyed by the input's name: permuting the input list leaves
  // every per-input stream unchanged.
  std::mt19937_64 rng = seed_stream(
      options.inner.seed, "meta-sample#" + state.input_optimizers.front().name +
                              "#" + std::to_string(meta_iteration));
  const TaskExample& example =
      dataset.examples[train[rng() % train.size()]];

  std::string request = compose_prompt_meta_request(
      state.best_optimizer, dataset.question_type, example,
      meta_header(meta_iteration, options.meta_iterations));

  std::string error_note;
  for (int attempt = 0; attempt < 4; ++attempt) {
    EngineRequest call;
    call.user_text =
        error_note.empty()
            ? request
            : request + "\n\nYour previous reply could not be used: " +
                  error_note +
                  "\nReply again in the exact JSON format requested.";
    call.temperature = options.meta_temperature;
    call.level = CallLevel::meta;
    std::string reply = options.meta_engine->call(call).text;
    try {
      std::string improved = parse_improved_task_description(reply);
      OptimizerSpec proposal = state.best_optimizer;
      proposal.optimizer_prompt = TextVariable(
          improved, proposal.optimizer_prompt.role_description());
      return proposal;
    } catch (const std::exception& e) {
      error_note = e.what();
    }
  }
  if (options.inner.log) {
    options.inner.log->emit("meta_proposal_skipped",
                            {{"kind", "meta_prompt"},
                             {"meta_iteration", meta_iteration},
                             {"reason", error_note}});
  }
  return std::nullopt;
}

MetaState meta_structure_initialize(const TaskDataset& dataset,
                                    const std::vector<OptimizerSpec>& inputs,
                                    const Program& program,
                                    const OuterLoopOptions& options) {
  require_val_split(dataset);
  if (inputs.empty()) {
    throw ConfigError("structure meta optimization needs >= 1 input optimizer");
  }
  MetaState state;
  state.input_optimizers = inputs;
  bool first = true;
  for (const OptimizerSpec& input : inputs) {
    InnerLoopResult result =
        run_inner_loop(input, program, dataset, options.inner);
    state.input_scores.push_back(result.best_score);
    // argmax, first among ties
    if (first || result.best_score > state.best_score) {
      state.best_optimizer = input;
      state.best_score = result.best_score;
      state.best_program = result.best_program;
      first = false;
    }
  }
  return state;
}

std::optional<OptimizerSpec> meta_structure_propose(
    MetaState& state, const OuterLoopOptions& options, int meta_iteration) {
  std::vector<std::pair<OptimizerSpec, double>> scored;
  for (std::size_t i = 0; i < state.input_optimizers.size(); ++i) {
    scored.emplace_back(state.input_optimizers[i], state.input_scores[i]);
  }
  std::string request = compose_structure_meta_request(
      scored, state.best_optimizer,
      meta_header(meta_iteration, options.meta_iterations));

  std::string error_note;
  for (int attempt = 0; attempt < 4; ++attempt) {
    EngineRequest call;
    call.user_text =
        error_note.empty()
            ? request
            : request + "\n\nYour previous reply could not be used: " +
                  error_note +
                  "\nReply again in the exact JSON format requested.";
    call.temperature = options.meta_temperature;
    call.level = CallLevel::meta;
    std::string reply = options.meta_engine->call(call).text;
    try {
      std::vector<SchedulePhase> phases = parse_schedule_response(reply);
      // Resolve every phase to a concrete prompt now, so the composite is
      // self-contained: override > best input of that strategy > default.
      for (SchedulePhase& phase : phases) {
        if (!phase.prompt_override.empty()) continue;
        double best_input_score = -1.0;
        for (std::size_t i = 0; i < state.input_optimizers.size(); ++i) {
          if (state.input_optimizers[i].strategy == phase.strategy &&
              state.input_scores[i] > best_input_score) {
            best_input_score = state.input_scores[i];
            phase.prompt_override =
                state.input_optimizers[i].optimizer_prompt.value();
          }
        }
        if (phase.prompt_override.empty()) {
          phase.prompt_override = phase.strategy == Strategy::prompt_tgd
                                      ? default_tgd_optimizer()
                                            .optimizer_prompt.value()
                                      : default_structure_optimizer()
                                            .optimizer_prompt.value();
        }
      }
      OptimizerSpec proposal;
      proposal.name = "composite";
      proposal.strategy = Strategy::composite_schedule;
      proposal.optimizer_prompt = TextVariable(
          "Apply the scheduled strategies in order, finishing each phase's "
          "repeats before moving to the next.",
          "task description of the composite optimizer");
      proposal.schedule = std::move(phases);
      proposal.validate();
      return proposal;
    } catch (const std::exception& e) {
      error_note = e.what();
      if (options.inner.log) {
        options.inner.log->emit("meta_proposal_parse_error",
                                {{"kind", "meta_structure"},
                                 {"meta_iteration", meta_iteration},
                                 {"attempt", attempt + 1},
                                 {"error", error_note}});
      }
    }
  }
  if (options.inner.log) {
    options.inner.log->emit("meta_proposal_skipped",
                            {{"kind", "meta_structure"},
                             {"meta_iteration", meta_iteration},
                             {"reason", error_note}});
  }
  return std::nullopt;
}

void meta_update(MetaState& state, const OptimizerSpec& proposal, double score,
                 const Program& program, const std::string& summary) {
  ProposalRecord record{summary, score, false};
  if (score > state.best_score) {
    state.best_optimizer = proposal;
    state.best_score = score;
    state.best_program = program;
    record.accepted = true;
  }
  state.history.push_back(std::move(record));
}

OuterLoopResult run_outer_loop(const std::vector<OptimizerSpec>& inputs,
                               const Program& program,
                               const TaskDataset& dataset,
                               const OuterLoopOptions& options) {
  if (options.meta_iterations < 1) {
    throw ConfigError("outer loop needs meta_iterations >= 1");
  }
  if (!options.meta_engine) {
    throw ConfigError("outer loop needs a meta engine");
  }
  if (inputs.empty()) {
    throw ConfigError("outer loop needs >= 1 input optimizer");
  }

  EventLog* log = options.inner.log;
  if (log) {
    nlohmann::ordered_json names = nlohmann::ordered_json::array();
    for (const OptimizerSpec& input : inputs) names.push_back(input.name);
    log->emit("outer_loop_started", {{"kind", to_string(options.kind)},
                                     {"inputs", names},
                                     {"meta_iterations",
                                      options.meta_iterations}});
  }

  MetaState state =
      options.kind == MetaKind::meta_prompt
          ? meta_prompt_initialize(dataset, inputs.front(), program, options)
          : meta_structure_initialize(dataset, inputs, program, options);

  if (log) {
    log->emit("outer_loop_initialized",
              {{"kind", to_string(options.kind)},
               {"best_optimizer", state.best_optimizer.name},
               {"best_score", state.best_score}});
  }

  for (int j = 1; j <= options.meta_iterations; ++j) {
    std::optional<OptimizerSpec> proposal =
        options.kind == MetaKind::meta_prompt
            ? meta_prompt_propose(state, dataset, options, j)
            : meta_structure_propose(state, options, j);
    if (!proposal) {
      if (log) {
        log->emit("meta_step", {{"meta_iteration", j},
                                {"proposed", false},
                                {"best_score", state.best_score}});
      }
      continue;
    }
    proposal->name += options.kind == MetaKind::meta_prompt
                          ? "#p" + std::to_string(j)
                          : "#s" + std::to_string(j);

    InnerLoopResult result =
        run_inner_loop(*proposal, program, dataset, options.inner);
    meta_update(state, *proposal, result.best_score, result.best_program,
                proposal->name);
    if (log) {
      log->emit("meta_step", {{"meta_iteration", j},
                              {"proposed", true},
                              {"proposal", proposal->name},
                              {"sigma", result.best_score},
                              {"accepted", state.history.back().accepted},
                              {"best_score", state.best_score}});
    }
  }

  OuterLoopResult result;
  result.best_optimizer = state.best_optimizer;
  result.best_score = state.best_score;
  result.best_program = state.best_program;
  result.history = state.history;
  if (log) {
    log->emit("outer_loop_finished",
              {{"kind", to_string(options.kind)},
               {"best_optimizer", result.best_optimizer.name},
               {"best_score", result.best_score}});
  }
  return result;
}

TwoStageResult run_two_stage(const std::vector<OptimizerSpec>& inputs,
                                const Program& program,
                                const TaskDataset& dataset,
                                const OuterLoopOptions& options) {
  if (inputs.empty()) {
    throw ConfigError("two-stage meta optimization needs >= 1 input");
  }
  TwoStageResult result;

  // Stage 1: refine each input's task description independently.
  std::vector<OptimizerSpec> variants;
  for (const OptimizerSpec& input : inputs) {
    OuterLoopOptions stage1 = options;
    stage1.kind = MetaKind::meta_prompt;
    OuterLoopResult refined =
        run_outer_loop({input}, program, dataset, stage1);
    variants.push_back(refined.best_optimizer);
    result.stage1.push_back(std::move(refined));
  }

  // Stage 2: search compositions of the refined variants. When no
  // composition wins, the loop returns the best variant unchanged.
  OuterLoopOptions stage2 = options;
  stage2.kind = MetaKind::meta_structure;
  result.final = run_outer_loop(variants, program, dataset, stage2);
  return result;
}

}  // namespace metaopt
