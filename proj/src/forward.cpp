#include "metaopt/forward.hpp"

#include <algorithm>
#include <regex>

#include "metaopt/errors.hpp"

namespace metaopt {

namespace {

std::string trim(const std::string& text) {
  size_t begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  size_t end = text.find_last_not_of(" \t\r\n") + 1;
  return text.substr(begin, end - begin);
}

// Kahn's algorithm, stable on spec order, over the top-level nodes.
std::vector<size_t> topo_order(const PipelineSpec& spec) {
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < spec.nodes.size(); ++i) index[spec.nodes[i].id] = i;
  std::vector<int> indegree(spec.nodes.size(), 0);
  std::vector<std::vector<size_t>> consumers(spec.nodes.size());
  for (const Edge& edge : spec.edges) {
    if (edge.from == kPipelineInput) continue;
    consumers[index.at(edge.from)].push_back(index.at(edge.to));
    ++indegree[index.at(edge.to)];
  }
  std::vector<size_t> order;
  std::vector<bool> queued(spec.nodes.size(), false);
  while (order.size() < spec.nodes.size()) {
    bool advanced = false;
    for (size_t i = 0; i < spec.nodes.size(); ++i) {
      if (queued[i] || indegree[i] > 0) continue;
      queued[i] = true;
      order.push_back(i);
      for (size_t consumer : consumers[i]) --indegree[consumer];
      advanced = true;
    }
    if (!advanced) {
      throw ExecutionError("pipeline graph contains a cycle", "");
    }
  }
  return order;
}

struct Executor {
  const Program& program;
  Engine& engine;
  const ForwardOptions& options;
  long long llm_calls = 0;

  std::string call_model(const PipelineNode& node, const std::string& input) {
    auto it = program.prompts.find(node.prompt_slot);
    if (it == program.prompts.end()) {
      throw ExecutionError("no prompt bound to slot '" + node.prompt_slot + "'",
                           node.id);
    }
    EngineRequest request;
    request.system_text = program.task_description;
    request.user_text = input.empty()
                            ? it->second.value()
                            : it->second.value() + "\n\n" + input;
    request.temperature = options.temperature;
    request.max_tokens = options.max_tokens;
    request.seed = options.seed;
    request.level = options.level;
    try {
      EngineResponse response = engine.call(request);
      ++llm_calls;
      return response.text;
    } catch (const ExecutionError&) {
      throw;
    } catch (const std::exception& e) {
      throw ExecutionError(std::string("engine call failed: ") + e.what(),
                           node.id);
    }
  }

  Value apply(const PipelineNode& node, const std::vector<Value>& inputs) {
    switch (node.kind) {
      case NodeKind::llm_call: {
        std::string input = inputs.empty() ? "" : to_scalar(inputs.front());
        return call_model(node, input);
      }
      case NodeKind::split: {
        std::string input = inputs.empty() ? "" : to_scalar(inputs.front());
        std::regex pattern(node.pattern);
        std::vector<std::string> pieces;
        std::sregex_token_iterator it(input.begin(), input.end(), pattern, -1);
        for (std::sregex_token_iterator end; it != end; ++it) {
          std::string piece = trim(*it);
          if (!piece.empty()) pieces.push_back(std::move(piece));
        }
        return pieces;
      }
      case NodeKind::aggregate: {
        std::vector<std::string> parts;
        for (const Value& value : inputs) {
          for (std::string& part : to_list(value)) {
            parts.push_back(std::move(part));
          }
        }
        std::string joined;
        for (size_t i = 0; i < parts.size(); ++i) {
          if (i > 0) joined += node.separator;
          joined += parts[i];
        }
        return joined;
      }
      case NodeKind::extract: {
        std::string input = inputs.empty() ? "" : to_scalar(inputs.front());
        std::regex pattern(node.pattern);
        std::smatch match;
        if (std::regex_search(input, match, pattern)) {
          return match.size() > 1 ? match[1].str() : match[0].str();
        }
        return input;  // lenient fallback: formatting drift must not kill runs
      }
      case NodeKind::foreach: {
        const PipelineNode& body = node.body.front();
        std::vector<std::string> outputs;
        for (const std::string& element :
             inputs.empty() ? std::vector<std::string>{}
                            : to_list(inputs.front())) {
          outputs.push_back(to_scalar(apply(body, {Value(element)})));
        }
        return outputs;
      }
    }
    throw ExecutionError("unhandled node kind", node.id);
  }
};

}  // namespace

std::string to_scalar(const Value& value, const std::string& joiner) {
  if (const std::string* text = std::get_if<std::string>(&value)) return *text;
  const auto& list = std::get<std::vector<std::string>>(value);
  std::string joined;
  for (size_t i = 0; i < list.size(); ++i) {
    if (i > 0) joined += joiner;
    joined += list[i];
  }
  return joined;
}

std::vector<std::string> to_list(const Value& value) {
  if (const std::string* text = std::get_if<std::string>(&value)) {
    return {*text};
  }
  return std::get<std::vector<std::string>>(value);
}

ForwardResult run_program(const Program& program, const std::string& input,
                          Engine& engine, const ForwardOptions& options) {
  ValidationResult validation = validate_spec(program.spec);
  if (!validation.ok()) {
    throw ExecutionError("invalid pipeline: " + validation.describe(), "");
  }
  program.validate();

  // Inbound values per node, in spec edge order.
  std::map<std::string, std::vector<Value>> inbound;
  ForwardResult result;
  Executor executor{program, engine, options};

  for (size_t i : topo_order(program.spec)) {
    const PipelineNode& node = program.spec.nodes[i];
    std::vector<Value> inputs;
    for (const Edge& edge : program.spec.edges) {
      if (edge.to != node.id) continue;
      if (edge.from == kPipelineInput) {
        inputs.push_back(Value(input));
      } else {
        auto it = result.node_values.find(edge.from);
        if (it == result.node_values.end()) {
          throw ExecutionError("input from '" + edge.from + "' not yet computed",
                               node.id);
        }
        inputs.push_back(it->second);
      }
    }
    result.node_values[node.id] = executor.apply(node, inputs);
  }

  result.llm_calls = executor.llm_calls;
  result.output = to_scalar(result.node_values.at(program.spec.output));
  return result;
}

std::string forward(const Program& program, const std::string& input,
                    Engine& engine, const ForwardOptions& options) {
  return run_program(program, input, engine, options).output;
}

}  // namespace metaopt
