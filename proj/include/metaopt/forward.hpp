#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "metaopt/engine.hpp"
#include "metaopt/pipeline.hpp"

namespace metaopt {

// Intermediate node output: scalar text or a list (from split/foreach).
using Value = std::variant<std::string, std::vector<std::string>>;

std::string to_scalar(const Value& value, const std::string& joiner = "\n");
std::vector<std::string> to_list(const Value& value);

struct ForwardOptions {
  CallLevel level = CallLevel::program;
  double temperature = 0.0;
  int max_tokens = 0;
  std::uint64_t seed = 0;
};

struct ForwardResult {
  std::string output;
  std::map<std::string, Value> node_values;
  long long llm_calls = 0;  // engine calls issued (foreach multiplies)
};

// Executes every node in topological order and returns the output node's
// text. llm_call sends (task_description as system text, prompt value +
// blank line + upstream text as user content). The program is never
// mutated; engine failures surface as ExecutionError carrying the node id.
ForwardResult run_program(const Program& program, const std::string& input,
                          Engine& engine, const ForwardOptions& options = {});

// Convenience wrapper returning only the output text.
std::string forward(const Program& program, const std::string& input,
                    Engine& engine, const ForwardOptions& options = {});

}  // namespace metaopt
