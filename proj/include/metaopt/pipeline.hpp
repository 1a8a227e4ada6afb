#pragma once

#include <map>
#include <string>
#include <vector>

#include "metaopt/text_variable.hpp"

namespace metaopt {

// Source name for edges fed by the pipeline input.
inline constexpr const char* kPipelineInput = "$input";

enum class NodeKind { llm_call, split, aggregate, extract, foreach };

const char* to_string(NodeKind kind);
// Throws ParseError naming the unknown kind.
NodeKind node_kind_from_string(const std::string& name);

// One operator in a pipeline graph. Field usage depends on `kind`:
//   llm_call  — prompt_slot names the prompt variable sent with the input
//   split     — pattern is the separator regex; output is a list
//   aggregate — joins its inputs (lists are flattened) with `separator`
//   extract   — pattern's first capture group, or the full text if no match
//   foreach   — body holds exactly one inner node mapped over a list input
struct PipelineNode {
  std::string id;
  NodeKind kind = NodeKind::llm_call;
  std::string prompt_slot;
  std::string pattern;
  std::string separator = "\n";
  std::vector<PipelineNode> body;

  friend bool operator==(const PipelineNode&, const PipelineNode&) = default;
};

struct Edge {
  std::string from;  // node id or kPipelineInput
  std::string to;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// A pipeline graph: nodes, directed producer->consumer links, and one
// designated output node. Prompt values live on Program, not here.
struct PipelineSpec {
  std::vector<PipelineNode> nodes;
  std::vector<Edge> edges;
  std::string output;

  friend bool operator==(const PipelineSpec&, const PipelineSpec&) = default;
};

struct Violation {
  std::string code;     // "cycle", "dangling-slot", "bad-pattern", ...
  std::string node_id;  // offending node, possibly several joined by ','
  std::string detail;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string describe() const;
};

// Structural well-formedness check. Violations are returned, never thrown.
ValidationResult validate_spec(const PipelineSpec& spec);

// Prompt slots referenced by llm_call nodes (foreach bodies included), in
// first-reference order, deduplicated.
std::vector<std::string> prompt_slots(const PipelineSpec& spec);

size_t count_llm_calls(const PipelineSpec& spec);

// An executable program: a pipeline plus the prompt values bound to its
// slots and the task description sent as system text on every model call.
struct Program {
  PipelineSpec spec;
  std::map<std::string, TextVariable> prompts;
  std::string task_description;

  // Throws std::invalid_argument when prompts do not cover exactly the
  // slots referenced by the spec, or when the spec itself fails validation.
  void validate() const;

  friend bool operator==(const Program&, const Program&) = default;
};

// Deep copy differing only in the named prompt's value. The original is
// untouched. Throws std::invalid_argument for an unknown slot.
Program clone_with_prompt(const Program& program, const std::string& slot,
                          std::string new_value);

}  // namespace metaopt
