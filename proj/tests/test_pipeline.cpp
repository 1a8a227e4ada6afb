#include <doctest.h>

#include <algorithm>

#include "metaopt/errors.hpp"
#include "metaopt/pipeline.hpp"
#include "metaopt/pipeline_json.hpp"
#include "metaopt/program_library.hpp"
#include "metaopt/text_variable.hpp"

using namespace metaopt;

namespace {

bool has_violation(const ValidationResult& result, const std::string& code) {
  return std::any_of(result.violations.begin(), result.violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

PipelineSpec two_node_chain() {
  PipelineSpec spec;
  PipelineNode a;
  a.id = "a";
  a.kind = NodeKind::llm_call;
  a.prompt_slot = "first";
  PipelineNode b;
  b.id = "b";
  b.kind = NodeKind::llm_call;
  b.prompt_slot = "second";
  spec.nodes = {a, b};
  spec.edges = {{kPipelineInput, "a"}, {"a", "b"}};
  spec.output = "b";
  return spec;
}

}  // namespace

TEST_CASE("text variable requires a role description") {
  CHECK_THROWS_AS(TextVariable("value", ""), std::invalid_argument);
  TextVariable var("value", "role");
  CHECK(var.value() == "value");
  CHECK(var.learnable());
}

TEST_CASE("text variable feedback is append-only and restorable") {
  TextVariable var("v", "role");
  var.add_feedback("first");
  var.add_feedback("second");
  REQUIRE(var.feedback().size() == 2);
  CHECK(var.feedback()[0] == "first");

  TextVariable loaded("v", "role");
  loaded.restore_feedback({"first", "second"});
  CHECK(loaded == var);

  var.set_value("changed");
  CHECK(var.value() == "changed");
  CHECK(var.feedback().size() == 2);
}

TEST_CASE("validate_spec accepts a well-formed chain") {
  CHECK(validate_spec(two_node_chain()).ok());
}

TEST_CASE("validate_spec flags duplicate node ids") {
  PipelineSpec spec = two_node_chain();
  spec.nodes.push_back(spec.nodes[0]);
  CHECK(has_violation(validate_spec(spec), "duplicate-id"));
}

TEST_CASE("validate_spec flags a missing or unknown output node") {
  PipelineSpec spec = two_node_chain();
  spec.output = "ghost";
  CHECK(has_violation(validate_spec(spec), "bad-output"));
  spec.output.clear();
  CHECK(has_violation(validate_spec(spec), "bad-output"));
}

TEST_CASE("validate_spec flags llm_call nodes without a prompt slot") {
  PipelineSpec spec = two_node_chain();
  spec.nodes[0].prompt_slot.clear();
  CHECK(has_violation(validate_spec(spec), "dangling-slot"));
}

TEST_CASE("validate_spec flags invalid regex patterns") {
  PipelineSpec spec = two_node_chain();
  PipelineNode bad;
  bad.id = "x";
  bad.kind = NodeKind::extract;
  bad.pattern = "([unclosed";
  spec.nodes.push_back(bad);
  spec.edges.push_back({"b", "x"});
  spec.output = "x";
  CHECK(has_violation(validate_spec(spec), "bad-pattern"));
}

TEST_CASE("validate_spec flags edges naming unknown nodes") {
  PipelineSpec spec = two_node_chain();
  spec.edges.push_back({"ghost", "b"});
  CHECK(has_violation(validate_spec(spec), "bad-edge"));
}

TEST_CASE("validate_spec flags nodes with no input feed") {
  PipelineSpec spec = two_node_chain();
  spec.edges.erase(spec.edges.begin());  // drop $input -> a
  CHECK(has_violation(validate_spec(spec), "unfed-input"));
}

TEST_CASE("validate_spec flags cycles") {
  PipelineSpec spec = two_node_chain();
  spec.edges.push_back({"b", "a"});
  CHECK(has_violation(validate_spec(spec), "cycle"));
}

TEST_CASE("validate_spec rejects nested foreach") {
  PipelineSpec spec;
  PipelineNode inner;
  inner.id = "inner";
  inner.kind = NodeKind::foreach;
  PipelineNode leaf;
  leaf.id = "leaf";
  leaf.kind = NodeKind::llm_call;
  leaf.prompt_slot = "p";
  inner.body = {leaf};
  PipelineNode outer;
  outer.id = "outer";
  outer.kind = NodeKind::foreach;
  outer.body = {inner};
  spec.nodes = {outer};
  spec.edges = {{kPipelineInput, "outer"}};
  spec.output = "outer";
  CHECK(has_violation(validate_spec(spec), "nested-foreach"));
}

TEST_CASE("prompt_slots lists slots in first-reference order") {
  Program program = reference_program("word_sorting");
  std::vector<std::string> slots = prompt_slots(program.spec);
  REQUIRE(slots.size() == 3);
  CHECK(slots[0] == "planner");
  CHECK(slots[1] == "subsolver");  // inside the foreach body
  CHECK(slots[2] == "final");
}

TEST_CASE("count_llm_calls includes foreach bodies") {
  CHECK(count_llm_calls(reference_program("word_sorting").spec) == 3);
  CHECK(count_llm_calls(reference_program("minimal").spec) == 1);
}

TEST_CASE("clone_with_prompt leaves the original untouched") {
  Program original = reference_program("minimal");
  const std::string slot = prompt_slots(original.spec).front();
  const std::string before = original.prompts.at(slot).value();
  Program clone = clone_with_prompt(original, slot, "replacement text");
  CHECK(original.prompts.at(slot).value() == before);
  CHECK(clone.prompts.at(slot).value() == "replacement text");
  CHECK(clone.spec == original.spec);
  CHECK_THROWS_AS(clone_with_prompt(original, "no-such-slot", "x"),
                  std::invalid_argument);
}

TEST_CASE("program validate rejects prompts that do not cover the slots") {
  Program program = reference_program("minimal");
  program.prompts.clear();
  CHECK_THROWS_AS(program.validate(), std::invalid_argument);
}

TEST_CASE("program JSON round-trip preserves every field") {
  for (const std::string& name : reference_program_names()) {
    Program original = reference_program(name);
    original.prompts.begin()->second.add_feedback("remember this critique");
    Program reloaded = program_from_json(program_to_json(original));
    CHECK(reloaded == original);
  }
}

TEST_CASE("serialized documents survive a serialize/deserialize cycle") {
  for (const std::string& name : reference_program_names()) {
    Program original = reference_program(name);
    const std::string text = serialize_program(original);
    Program reloaded = deserialize_program(text);
    CHECK(serialize_program(reloaded) == text);
  }
}

TEST_CASE("deserialize_program tolerates code fences") {
  Program original = reference_program("minimal");
  const std::string body = serialize_program(original);
  CHECK(deserialize_program("```json\n" + body + "\n```") == original);
  CHECK(deserialize_program("```\n" + body + "\n```") == original);
}

TEST_CASE("deserialize errors carry a reason") {
  CHECK_THROWS_AS(deserialize_spec("{\"edges\": []}"), ParseError);
  CHECK_THROWS_WITH_AS(
      deserialize_spec(
          R"({"nodes": [{"id": "x", "kind": "teleport"}], "edges": [], "output": "x"})"),
      doctest::Contains("teleport"), ParseError);
  CHECK_THROWS_AS(deserialize_program("not json at all"), ParseError);
}

TEST_CASE("grammar reference documents every node kind") {
  const std::string grammar = pipeline_grammar_reference();
  for (const char* kind :
       {"llm_call", "split", "aggregate", "extract", "foreach"}) {
    CHECK(grammar.find(kind) != std::string::npos);
  }
  CHECK(grammar.find(kPipelineInput) != std::string::npos);
}
