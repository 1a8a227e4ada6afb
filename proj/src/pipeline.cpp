#include "metaopt/pipeline.hpp"

#include <algorithm>
#include <deque>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "metaopt/errors.hpp"

namespace metaopt {

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::llm_call:
      return "llm_call";
    case NodeKind::split:
      return "split";
    case NodeKind::aggregate:
      return "aggregate";
    case NodeKind::extract:
      return "extract";
    case NodeKind::foreach:
      return "foreach";
  }
  return "unknown";
}

NodeKind node_kind_from_string(const std::string& name) {
  if (name == "llm_call") return NodeKind::llm_call;
  if (name == "split") return NodeKind::split;
  if (name == "aggregate") return NodeKind::aggregate;
  if (name == "extract") return NodeKind::extract;
  if (name == "foreach") return NodeKind::foreach;
  throw ParseError("unknown node kind '" + name + "'");
}

std::string ValidationResult::describe() const {
  std::ostringstream out;
  for (size_t i = 0; i < violations.size(); ++i) {
    if (i) out << "; ";
    out << violations[i].code << " at " << violations[i].node_id;
    if (!violations[i].detail.empty()) out << " (" << violations[i].detail << ")";
  }
  return out.str();
}

namespace {

bool pattern_compiles(const std::string& pattern, std::string* error) {
  try {
    std::regex re(pattern);
    return true;
  } catch (const std::regex_error& e) {
    *error = e.what();
    return false;
  }
}

void check_node_local(const PipelineNode& node, ValidationResult* out) {
  switch (node.kind) {
    case NodeKind::llm_call:
      if (node.prompt_slot.empty()) {
        out->violations.push_back(
            {"dangling-slot", node.id, "llm_call must reference a prompt slot"});
      }
      break;
    case NodeKind::split:
    case NodeKind::extract: {
      std::string err;
      if (!pattern_compiles(node.pattern, &err)) {
        out->violations.push_back({"bad-pattern", node.id, err});
      }
      break;
    }
    case NodeKind::aggregate:
      break;
    case NodeKind::foreach:
      if (node.body.size() != 1) {
        out->violations.push_back(
            {"bad-foreach", node.id, "foreach wraps exactly one inner node"});
      } else {
        const PipelineNode& inner = node.body.front();
        if (inner.kind == NodeKind::foreach) {
          out->violations.push_back(
              {"nested-foreach", node.id, "foreach body may not be a foreach"});
        } else {
          check_node_local(inner, out);
        }
      }
      break;
  }
}

void collect_ids(const PipelineNode& node, std::vector<std::string>* ids) {
  ids->push_back(node.id);
  for (const PipelineNode& inner : node.body) collect_ids(inner, ids);
}

}  // namespace

ValidationResult validate_spec(const PipelineSpec& spec) {
  ValidationResult result;

  std::vector<std::string> all_ids;
  for (const PipelineNode& node : spec.nodes) collect_ids(node, &all_ids);
  std::unordered_set<std::string> seen;
  for (const std::string& id : all_ids) {
    if (id.empty()) {
      result.violations.push_back({"bad-id", "<empty>", "node id is empty"});
    } else if (!seen.insert(id).second) {
      result.violations.push_back({"duplicate-id", id, "node id appears twice"});
    }
  }

  std::unordered_set<std::string> top_level;
  for (const PipelineNode& node : spec.nodes) top_level.insert(node.id);

  if (spec.output.empty() || !top_level.count(spec.output)) {
    result.violations.push_back(
        {"bad-output", spec.output.empty() ? "<empty>" : spec.output,
         "output must name a top-level node"});
  }

  for (const PipelineNode& node : spec.nodes) check_node_local(node, &result);

  std::unordered_map<std::string, int> in_degree;
  for (const PipelineNode& node : spec.nodes) in_degree[node.id] = 0;
  for (const Edge& edge : spec.edges) {
    if (edge.from != kPipelineInput && !top_level.count(edge.from)) {
      result.violations.push_back(
          {"bad-edge", edge.from, "edge source is not a node"});
      continue;
    }
    if (!top_level.count(edge.to)) {
      result.violations.push_back(
          {"bad-edge", edge.to, "edge target is not a node"});
      continue;
    }
    ++in_degree[edge.to];
  }

  for (const PipelineNode& node : spec.nodes) {
    const int fan_in = in_degree[node.id];
    if (node.kind == NodeKind::aggregate) {
      if (fan_in < 1) {
        result.violations.push_back(
            {"unfed-input", node.id, "aggregate requires at least one input"});
      }
    } else if (fan_in != 1) {
      result.violations.push_back(
          {"unfed-input", node.id,
           std::string(to_string(node.kind)) + " requires exactly one input, has " +
               std::to_string(fan_in)});
    }
  }

  // Cycle check over node-to-node edges (pipeline-input edges cannot cycle).
  std::unordered_map<std::string, int> pending;
  std::unordered_map<std::string, std::vector<std::string>> downstream;
  for (const PipelineNode& node : spec.nodes) pending[node.id] = 0;
  for (const Edge& edge : spec.edges) {
    if (edge.from == kPipelineInput) continue;
    if (!top_level.count(edge.from) || !top_level.count(edge.to)) continue;
    ++pending[edge.to];
    downstream[edge.from].push_back(edge.to);
  }
  std::deque<std::string> ready;
  for (const PipelineNode& node : spec.nodes) {
    if (pending[node.id] == 0) ready.push_back(node.id);
  }
  size_t processed = 0;
  while (!ready.empty()) {
    std::string id = ready.front();
    ready.pop_front();
    ++processed;
    for (const std::string& next : downstream[id]) {
      if (--pending[next] == 0) ready.push_back(next);
    }
  }
  if (processed < spec.nodes.size()) {
    std::string members;
    for (const PipelineNode& node : spec.nodes) {
      if (pending[node.id] > 0) {
        if (!members.empty()) members += ",";
        members += node.id;
      }
    }
    result.violations.push_back({"cycle", members, "nodes form a cycle"});
  }

  return result;
}

namespace {

void collect_slots(const PipelineNode& node, std::vector<std::string>* slots,
                   std::set<std::string>* seen) {
  if (node.kind == NodeKind::llm_call && !node.prompt_slot.empty() &&
      seen->insert(node.prompt_slot).second) {
    slots->push_back(node.prompt_slot);
  }
  for (const PipelineNode& inner : node.body) collect_slots(inner, slots, seen);
}

size_t count_llm_calls(const PipelineNode& node) {
  size_t n = node.kind == NodeKind::llm_call ? 1 : 0;
  for (const PipelineNode& inner : node.body) n += count_llm_calls(inner);
  return n;
}

}  // namespace

std::vector<std::string> prompt_slots(const PipelineSpec& spec) {
  std::vector<std::string> slots;
  std::set<std::string> seen;
  for (const PipelineNode& node : spec.nodes) collect_slots(node, &slots, &seen);
  return slots;
}

size_t count_llm_calls(const PipelineSpec& spec) {
  size_t n = 0;
  for (const PipelineNode& node : spec.nodes) n += count_llm_calls(node);
  return n;
}

void Program::validate() const {
  ValidationResult check = validate_spec(spec);
  if (!check.ok()) {
    throw std::invalid_argument("invalid pipeline spec: " + check.describe());
  }
  std::vector<std::string> slots = prompt_slots(spec);
  for (const std::string& slot : slots) {
    if (!prompts.count(slot)) {
      throw std::invalid_argument("program is missing prompt for slot '" + slot + "'");
    }
  }
  if (prompts.size() != slots.size()) {
    for (const auto& [slot, var] : prompts) {
      if (std::find(slots.begin(), slots.end(), slot) == slots.end()) {
        throw std::invalid_argument("program binds unreferenced prompt slot '" +
                                    slot + "'");
      }
    }
  }
}

Program clone_with_prompt(const Program& program, const std::string& slot,
                          std::string new_value) {
  auto it = program.prompts.find(slot);
  if (it == program.prompts.end()) {
    throw std::invalid_argument("unknown prompt slot '" + slot + "'");
  }
  Program copy = program;
  copy.prompts.at(slot).set_value(std::move(new_value));
  return copy;
}

}  // namespace metaopt
