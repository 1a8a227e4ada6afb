#include <doctest.h>

#include "metaopt/dataset.hpp"
#include "metaopt/errors.hpp"
#include "metaopt/events.hpp"
#include "metaopt/meta.hpp"
#include "metaopt/meta_prompts.hpp"
#include "metaopt/pipeline_json.hpp"
#include "metaopt/program_library.hpp"
#include "metaopt/scripted_engine.hpp"
#include "test_support.hpp"

using namespace metaopt;
using metaopt::testing::RecordingEngine;

namespace {

TaskDataset tiny_dataset() {
  TaskDataset dataset = gen_word_sorting(8, 21);
  assign_splits(dataset, 4, 4, 0);
  return dataset;
}

OptimizerSpec named_tgd(const std::string& name, const std::string& prompt) {
  OptimizerSpec spec = default_tgd_optimizer();
  spec.name = name;
  spec.optimizer_prompt =
      TextVariable(prompt, spec.optimizer_prompt.role_description());
  return spec;
}

OptimizerSpec named_structure(const std::string& name,
                              const std::string& prompt) {
  OptimizerSpec spec = default_structure_optimizer();
  spec.name = name;
  spec.optimizer_prompt =
      TextVariable(prompt, spec.optimizer_prompt.role_description());
  return spec;
}

// Program engine answering `hits` val examples correctly when the prompt
// carries `marker`.
void script_scores(ScriptedEngine& engine, const TaskDataset& dataset,
                   const std::string& marker, std::size_t hits) {
  const auto& val = dataset.split("val");
  for (std::size_t i = 0; i < hits && i < val.size(); ++i) {
    const TaskExample& example = dataset.examples[val[i]];
    engine.add({{marker, example.question}, "", false, false, example.answer});
  }
}

MetaState handmade_state(const OptimizerSpec& best, double score) {
  MetaState state;
  state.best_optimizer = best;
  state.best_score = score;
  state.best_program = reference_program("minimal");
  state.input_optimizers = {best};
  state.input_scores = {score};
  return state;
}

}  // namespace

TEST_CASE("meta kind names round-trip and reject unknowns") {
  CHECK(meta_kind_from_string("meta_prompt") == MetaKind::meta_prompt);
  CHECK(meta_kind_from_string("meta_structure") == MetaKind::meta_structure);
  CHECK(to_string(MetaKind::meta_structure) == std::string("meta_structure"));
  CHECK_THROWS_WITH_AS(meta_kind_from_string("meta_magic"),
                       doctest::Contains("meta_magic"), ParseError);
}

TEST_CASE("prompt meta request walks spec, task, and reply format") {
  OptimizerSpec spec = named_tgd("refiner", "Improve prompts carefully.");
  TaskExample example{"sort: pear apple", "apple pear"};
  std::string request = compose_prompt_meta_request(
      spec, "word sorting", example, "Meta iteration 2 of 3.");

  CHECK(request.rfind("Meta iteration 2 of 3.", 0) == 0);
  CHECK(request.find("Improve prompts carefully.") != std::string::npos);
  CHECK(request.find("word sorting") != std::string::npos);
  CHECK(request.find("sort: pear apple") != std::string::npos);
  CHECK(request.find("apple pear") != std::string::npos);
  CHECK(request.find("\"improved_task_description\"") != std::string::npos);
  // The spec document itself is included for reference.
  CHECK(request.find("prompt_tgd") != std::string::npos);

  // Header omitted -> no banner.
  std::string bare =
      compose_prompt_meta_request(spec, "word sorting", example);
  CHECK(bare.find("Meta iteration") == std::string::npos);
}

TEST_CASE("improved descriptions parse from fenced, plain, and bare replies") {
  const std::string want = "Focus on ordering rules.";
  CHECK(parse_improved_task_description(
            "```json\n{\"improved_task_description\": \"Focus on ordering "
            "rules.\"}\n```") == want);
  CHECK(parse_improved_task_description(
            "{\"improved_task_description\": \"Focus on ordering rules.\"}") ==
        want);
  CHECK(parse_improved_task_description(
            "\"improved_task_description\": \"Focus on ordering rules.\",") ==
        want);

  CHECK_THROWS_AS(parse_improved_task_description("no json here"), ParseError);
  CHECK_THROWS_AS(parse_improved_task_description("{\"other\": \"x\"}"),
                  ParseError);
  CHECK_THROWS_AS(
      parse_improved_task_description("{\"improved_task_description\": \"\"}"),
      ParseError);
  CHECK_THROWS_AS(
      parse_improved_task_description("{\"improved_task_description\": 3}"),
      ParseError);
}

TEST_CASE("structure meta request lists inputs with scores and the format") {
  OptimizerSpec a = named_tgd("alpha", "Alpha task.");
  OptimizerSpec b = named_structure("beta", "Beta task.");
  std::string request = compose_structure_meta_request(
      {{a, 0.25}, {b, 0.5}}, b, "Meta iteration 1 of 1.");

  CHECK(request.rfind("Meta iteration 1 of 1.", 0) == 0);
  CHECK(request.find("alpha") != std::string::npos);
  CHECK(request.find("beta") != std::string::npos);
  CHECK(request.find("0.25") != std::string::npos);
  CHECK(request.find("current best") != std::string::npos);
  CHECK(request.find("\"schedule\"") != std::string::npos);
  CHECK(request.find("structure_search") != std::string::npos);
  // The phase cap is stated to the model.
  CHECK(request.find(std::to_string(kMaxSchedulePhases)) != std::string::npos);
}

TEST_CASE("schedule replies parse in object, array, and tuple forms") {
  auto phases = parse_schedule_response(
      "```json\n{\"schedule\": [{\"strategy\": \"structure_search\", "
      "\"repeats\": 2, \"prompt_override\": \"first\"}, "
      "{\"strategy\": \"prompt_tgd\"}]}\n```");
  REQUIRE(phases.size() == 2);
  CHECK(phases[0].strategy == Strategy::structure_search);
  CHECK(phases[0].repeats == 2);
  CHECK(phases[0].prompt_override == "first");
  CHECK(phases[1].strategy == Strategy::prompt_tgd);
  CHECK(phases[1].repeats == 1);  // default
  CHECK(phases[1].prompt_override.empty());

  auto bare = parse_schedule_response(
      "[{\"strategy\": \"prompt_tgd\", \"repeats\": 3}]");
  REQUIRE(bare.size() == 1);
  CHECK(bare[0].repeats == 3);

  auto tuples = parse_schedule_response(
      "[[\"prompt_tgd\", 2], [\"structure_search\", 1]]");
  REQUIRE(tuples.size() == 2);
  CHECK(tuples[0].strategy == Strategy::prompt_tgd);
  CHECK(tuples[0].repeats == 2);
}

TEST_CASE("schedule replies are rejected with the reason named") {
  CHECK_THROWS_AS(parse_schedule_response("not json"), ParseError);
  CHECK_THROWS_AS(parse_schedule_response("{\"plan\": []}"), ParseError);
  CHECK_THROWS_AS(parse_schedule_response("{\"schedule\": []}"), ParseError);
  CHECK_THROWS_WITH_AS(
      parse_schedule_response(
          "{\"schedule\": [{\"strategy\": \"quantum_leap\"}]}"),
      doctest::Contains("quantum_leap"), ParseError);
  CHECK_THROWS_AS(parse_schedule_response(
                      "{\"schedule\": [{\"strategy\": \"composite_schedule\"}]}"),
                  ParseError);
  CHECK_THROWS_AS(
      parse_schedule_response(
          "{\"schedule\": [{\"strategy\": \"prompt_tgd\", \"repeats\": 0}]}"),
      ParseError);
  CHECK_THROWS_AS(parse_schedule_response(
                      "{\"schedule\": ["
                      "{\"strategy\": \"prompt_tgd\"},"
                      "{\"strategy\": \"prompt_tgd\"},"
                      "{\"strategy\": \"prompt_tgd\"},"
                      "{\"strategy\": \"prompt_tgd\"},"
                      "{\"strategy\": \"prompt_tgd\"}]}"),
                  ParseError);
  CHECK_THROWS_AS(parse_schedule_response("{\"schedule\": [42]}"), ParseError);
}

TEST_CASE("meta update is strict-improvement with history on every call") {
  OptimizerSpec incumbent = named_tgd("incumbent", "Keep me.");
  MetaState state = handmade_state(incumbent, 0.5);
  Program program = reference_program("minimal");

  OptimizerSpec challenger = named_tgd("challenger", "Replace them.");
  meta_update(state, challenger, 0.5, program, "tie");
  CHECK(state.best_optimizer.name == "incumbent");
  CHECK_FALSE(state.history.back().accepted);

  meta_update(state, challenger, 0.49, program, "worse");
  CHECK(state.best_optimizer.name == "incumbent");

  meta_update(state, challenger, 0.51, program, "better");
  CHECK(state.best_optimizer.name == "challenger");
  CHECK(state.best_score == 0.51);
  CHECK(state.history.size() == 3);
}

TEST_CASE("prompt meta proposal carries the new description and nothing else") {
  TaskDataset dataset = tiny_dataset();
  OptimizerSpec current = named_tgd("refiner", "Old description.");
  MetaState state = handmade_state(current, 0.25);

  ScriptedEngine meta_engine;
  meta_engine.add({{"Meta iteration 1 of 2.", "Old description."},
                   "", false, false,
                   "```json\n{\"improved_task_description\": \"New "
                   "description.\"}\n```"});

  OuterLoopOptions options;
  options.meta_iterations = 2;
  options.meta_temperature = 0.7;
  options.meta_engine = &meta_engine;

  std::optional<OptimizerSpec> proposal =
      meta_prompt_propose(state, dataset, options, 1);
  REQUIRE(proposal.has_value());
  CHECK(proposal->optimizer_prompt.value() == "New description.");
  CHECK(proposal->name == "refiner");  // naming happens in the outer loop
  CHECK(proposal->strategy == current.strategy);
  CHECK(proposal->optimizer_prompt.role_description() ==
        current.optimizer_prompt.role_description());
  // The incumbent is untouched by proposing.
  CHECK(state.best_optimizer.optimizer_prompt.value() == "Old description.");

  // Meta calls run at the configured temperature with no system text.
  REQUIRE(meta_engine.served() == 1);
}

TEST_CASE("prompt meta proposal samples deterministically per seed") {
  TaskDataset dataset = gen_word_sorting(30, 5);
  assign_splits(dataset, 26, 4, 0);
  OptimizerSpec current = named_tgd("refiner", "Old description.");
  MetaState state = handmade_state(current, 0.25);

  auto ask_once = [&](std::uint64_t seed) {
    RecordingEngine meta_engine([](const EngineRequest&) {
      return "{\"improved_task_description\": \"x\"}";
    });
    OuterLoopOptions options;
    options.meta_iterations = 1;
    options.meta_engine = &meta_engine;
    options.inner.seed = seed;
    meta_prompt_propose(state, dataset, options, 1);
    const EngineRequest& request = meta_engine.requests().front();
    CHECK(request.system_text.empty());
    CHECK(request.level == CallLevel::meta);
    return request.user_text;
  };

  CHECK(ask_once(3) == ask_once(3));
}

TEST_CASE("prompt meta proposal re-asks with the error then gives up") {
  TaskDataset dataset = tiny_dataset();
  MetaState state = handmade_state(named_tgd("refiner", "Old."), 0.25);

  RecordingEngine meta_engine(
      [](const EngineRequest&) { return "never valid json"; });
  EventLog log;
  OuterLoopOptions options;
  options.meta_iterations = 1;
  options.meta_engine = &meta_engine;
  options.inner.log = &log;

  CHECK_FALSE(meta_prompt_propose(state, dataset, options, 1).has_value());
  CHECK(meta_engine.requests().size() == 4);
  // Re-asks carry the rejection note.
  CHECK(meta_engine.requests()[1].user_text.find(
            "could not be used") != std::string::npos);
  CHECK(log.of_type("meta_proposal_skipped").size() == 1);
}

TEST_CASE("structure meta proposal resolves phase prompts from the inputs") {
  OptimizerSpec a = named_tgd("alpha", "Alpha task.");
  OptimizerSpec b = named_structure("beta", "Beta task.");
  MetaState state = handmade_state(b, 0.5);
  state.input_optimizers = {a, b};
  state.input_scores = {0.25, 0.5};

  ScriptedEngine meta_engine;
  meta_engine.add({{"\"schedule\""}, "", false, false,
                   "{\"schedule\": ["
                   "{\"strategy\": \"structure_search\", \"repeats\": 1},"
                   "{\"strategy\": \"prompt_tgd\", \"repeats\": 2}]}"});

  OuterLoopOptions options;
  options.meta_iterations = 1;
  options.meta_engine = &meta_engine;

  std::optional<OptimizerSpec> proposal =
      meta_structure_propose(state, options, 1);
  REQUIRE(proposal.has_value());
  CHECK(proposal->strategy == Strategy::composite_schedule);
  REQUIRE(proposal->schedule.size() == 2);
  // Unset overrides inherit the best input of the matching strategy.
  CHECK(proposal->schedule[0].prompt_override == "Beta task.");
  CHECK(proposal->schedule[1].prompt_override == "Alpha task.");
  CHECK(proposal->schedule[1].repeats == 2);
  CHECK_NOTHROW(proposal->validate());
}

TEST_CASE("structure meta proposal falls back to built-in phase prompts") {
  OptimizerSpec a = named_tgd("alpha", "Alpha task.");
  MetaState state = handmade_state(a, 0.25);

  ScriptedEngine meta_engine;
  meta_engine.add({{"\"schedule\""}, "", false, false,
                   "{\"schedule\": [{\"strategy\": \"structure_search\"}]}"});
  OuterLoopOptions options;
  options.meta_iterations = 1;
  options.meta_engine = &meta_engine;

  std::optional<OptimizerSpec> proposal =
      meta_structure_propose(state, options, 1);
  REQUIRE(proposal.has_value());
  CHECK(proposal->schedule[0].prompt_override ==
        default_structure_optimizer().optimizer_prompt.value());
}

TEST_CASE("structure meta proposal retries on bad replies and then skips") {
  OptimizerSpec a = named_tgd("alpha", "Alpha task.");
  MetaState state = handmade_state(a, 0.25);

  SUBCASE("a corrected second reply is accepted") {
    ScriptedEngine meta_engine;
    meta_engine.add({{"could not be used"}, "", false, false,
                     "{\"schedule\": [{\"strategy\": \"prompt_tgd\"}]}"});
    meta_engine.add({{"\"schedule\""}, "", false, false, "garbage"});
    EventLog log;
    OuterLoopOptions options;
    options.meta_iterations = 1;
    options.meta_engine = &meta_engine;
    options.inner.log = &log;

    std::optional<OptimizerSpec> proposal =
        meta_structure_propose(state, options, 1);
    REQUIRE(proposal.has_value());
    CHECK(log.of_type("meta_proposal_parse_error").size() == 1);
  }

  SUBCASE("four bad replies skip the iteration") {
    RecordingEngine meta_engine(
        [](const EngineRequest&) { return "{\"schedule\": \"soon\"}"; });
    EventLog log;
    OuterLoopOptions options;
    options.meta_iterations = 1;
    options.meta_engine = &meta_engine;
    options.inner.log = &log;

    CHECK_FALSE(meta_structure_propose(state, options, 1).has_value());
    CHECK(meta_engine.requests().size() == 4);
    CHECK(log.of_type("meta_proposal_parse_error").size() == 4);
    CHECK(log.of_type("meta_proposal_skipped").size() == 1);
  }
}

TEST_CASE("outer loop guards its configuration") {
  TaskDataset dataset = tiny_dataset();
  Program program = reference_program("minimal");
  RecordingEngine engine;
  OuterLoopOptions options;
  options.meta_engine = &engine;
  options.inner.program_engine = &engine;
  options.inner.optimizer_engine = &engine;

  CHECK_THROWS_AS(run_outer_loop({}, program, dataset, options), ConfigError);

  OuterLoopOptions no_engine = options;
  no_engine.meta_engine = nullptr;
  CHECK_THROWS_AS(
      run_outer_loop({default_tgd_optimizer()}, program, dataset, no_engine),
      ConfigError);

  OuterLoopOptions zero_rounds = options;
  zero_rounds.meta_iterations = 0;
  CHECK_THROWS_AS(
      run_outer_loop({default_tgd_optimizer()}, program, dataset, zero_rounds),
      ConfigError);

  TaskDataset no_val = tiny_dataset();
  no_val.splits["val"].clear();
  CHECK_THROWS_AS(run_outer_loop({default_tgd_optimizer()}, program, no_val,
                                 options),
                  ConfigError);
}

TEST_CASE("prompt refinement outer loop adopts the better description") {
  TaskDataset dataset = tiny_dataset();
  Program program = reference_program("minimal");
  OptimizerSpec input = named_tgd("refiner", "Improve prompts. V0.");

  ScriptedEngine program_engine;
  script_scores(program_engine, dataset, "PROMPT-A", 1);  // 0.25
  script_scores(program_engine, dataset, "PROMPT-B", 2);  // 0.5
  program_engine.add({{""}, "", false, false, "wrong"});

  ScriptedEngine optimizer_engine;
  optimizer_engine.add({{"Write a concise critique"}, "", false, false, "c"});
  optimizer_engine.add({{"Rewrite this prompt."}, "Improve prompts. V0.",
                        false, false, "<improved>PROMPT-A solve</improved>"});
  optimizer_engine.add({{"Rewrite this prompt."}, "Improve prompts. V1.",
                        false, false, "<improved>PROMPT-B solve</improved>"});

  ScriptedEngine meta_engine;
  meta_engine.add({{"Meta iteration 1 of 1.", "improved_task_description",
                    "Improve prompts. V0."},
                   "", false, false,
                   "{\"improved_task_description\": \"Improve prompts. "
                   "V1.\"}"});

  EventLog log;
  OuterLoopOptions options;
  options.kind = MetaKind::meta_prompt;
  options.meta_iterations = 1;
  options.inner.iterations = 1;
  options.inner.metric = Metric{MetricKind::exact_text, ""};
  options.inner.program_engine = &program_engine;
  options.inner.optimizer_engine = &optimizer_engine;
  options.inner.log = &log;
  options.meta_engine = &meta_engine;

  OuterLoopResult result =
      run_outer_loop({input}, program, dataset, options);

  CHECK(result.best_score == 0.5);
  CHECK(result.best_optimizer.name == "refiner#p1");
  CHECK(result.best_optimizer.optimizer_prompt.value() ==
        "Improve prompts. V1.");
  CHECK(result.best_program.prompts.at("executer").value() ==
        "PROMPT-B solve");
  REQUIRE(result.history.size() == 1);
  CHECK(result.history[0].accepted);

  auto started = log.of_type("outer_loop_started");
  REQUIRE(started.size() == 1);
  CHECK(started[0].at("kind") == "meta_prompt");
  auto initialized = log.of_type("outer_loop_initialized");
  REQUIRE(initialized.size() == 1);
  CHECK(initialized[0].at("best_score").get<double>() == 0.25);
  auto steps = log.of_type("meta_step");
  REQUIRE(steps.size() == 1);
  CHECK(steps[0].at("proposal") == "refiner#p1");
  CHECK(steps[0].at("sigma").get<double>() == 0.5);
  CHECK(steps[0].at("accepted") == true);
  auto finished = log.of_type("outer_loop_finished");
  REQUIRE(finished.size() == 1);
  CHECK(finished[0].at("best_score").get<double>() == 0.5);
}

TEST_CASE("structure outer loop seeds the incumbent with the input argmax") {
  TaskDataset dataset = tiny_dataset();
  Program program = reference_program("minimal");
  OptimizerSpec a = named_tgd("alpha", "Task A.");
  OptimizerSpec b = named_structure("beta", "Task B.");

  ScriptedEngine program_engine;
  script_scores(program_engine, dataset, "PROMPT-A", 1);  // 0.25
  script_scores(program_engine, dataset, "PROMPT-B", 2);  // 0.5
  program_engine.add({{""}, "", false, false, "wrong"});

  const std::string doc_b = serialize_program(
      single_call_program("PROMPT-B solve"));
  ScriptedEngine optimizer_engine;
  optimizer_engine.add({{"Write a concise critique"}, "", false, false, "c"});
  optimizer_engine.add({{"Rewrite this prompt."}, "Task A.", false, false,
                        "<improved>PROMPT-A solve</improved>"});
  optimizer_engine.add({{"pipeline document"}, "Task B.", false, false, doc_b});

  // The meta reply never parses, so the initialization argmax must win.
  RecordingEngine meta_engine(
      [](const EngineRequest&) { return "not a schedule"; });

  EventLog log;
  OuterLoopOptions options;
  options.kind = MetaKind::meta_structure;
  options.meta_iterations = 1;
  options.inner.iterations = 1;
  options.inner.metric = Metric{MetricKind::exact_text, ""};
  options.inner.program_engine = &program_engine;
  options.inner.optimizer_engine = &optimizer_engine;
  options.inner.log = &log;
  options.meta_engine = &meta_engine;

  OuterLoopResult result = run_outer_loop({a, b}, program, dataset, options);

  CHECK(result.best_optimizer.name == "beta");
  CHECK(result.best_score == 0.5);
  CHECK(result.history.empty());  // the skipped round never reaches update
  auto steps = log.of_type("meta_step");
  REQUIRE(steps.size() == 1);
  CHECK(steps[0].at("proposed") == false);
}

TEST_CASE("two-stage run refines first and keeps the variant when "
          "composition never wins") {
  TaskDataset dataset = tiny_dataset();
  Program program = reference_program("minimal");
  OptimizerSpec input = named_tgd("refiner", "Task A.");

  ScriptedEngine program_engine;
  script_scores(program_engine, dataset, "PROMPT-A1", 1);  // 0.25
  script_scores(program_engine, dataset, "PROMPT-A2", 2);  // 0.5
  program_engine.add({{""}, "", false, false, "wrong"});

  ScriptedEngine optimizer_engine;
  optimizer_engine.add({{"Write a concise critique"}, "", false, false, "c"});
  optimizer_engine.add({{"Rewrite this prompt."}, "Task A.", false, false,
                        "<improved>PROMPT-A1 solve</improved>"});
  optimizer_engine.add({{"Rewrite this prompt."}, "Task A2.", false, false,
                        "<improved>PROMPT-A2 solve</improved>"});

  ScriptedEngine meta_engine;
  meta_engine.add({{"improved_task_description", "Task A."}, "", false, false,
                   "{\"improved_task_description\": \"Task A2.\"}"});
  meta_engine.add({{"\"schedule\""}, "", false, false,
                   "{\"schedule\": [{\"strategy\": \"prompt_tgd\", "
                   "\"repeats\": 1}]}"});

  EventLog log;
  OuterLoopOptions options;
  options.meta_iterations = 1;
  options.inner.iterations = 1;
  options.inner.metric = Metric{MetricKind::exact_text, ""};
  options.inner.program_engine = &program_engine;
  options.inner.optimizer_engine = &optimizer_engine;
  options.inner.log = &log;
  options.meta_engine = &meta_engine;

  TwoStageResult result =
      run_two_stage({input}, program, dataset, options);

  // Stage 1 refined the task description and improved the score.
  REQUIRE(result.stage1.size() == 1);
  CHECK(result.stage1[0].best_score == 0.5);
  CHECK(result.stage1[0].best_optimizer.name == "refiner#p1");
  CHECK(result.stage1[0].best_optimizer.optimizer_prompt.value() ==
        "Task A2.");

  // Stage 2's composite only ties the variant, so the variant survives.
  CHECK(result.final.best_score == 0.5);
  CHECK(result.final.best_optimizer.name == "refiner#p1");
  CHECK(result.final.best_optimizer.strategy == Strategy::prompt_tgd);
  REQUIRE(result.final.history.size() == 1);
  CHECK(result.final.history[0].summary == "composite#s1");
  CHECK_FALSE(result.final.history[0].accepted);
  CHECK(result.final.best_program.prompts.at("executer").value() ==
        "PROMPT-A2 solve");

  // One outer loop per stage.
  CHECK(log.of_type("outer_loop_started").size() == 2);
  CHECK(log.of_type("outer_loop_finished").size() == 2);
}
