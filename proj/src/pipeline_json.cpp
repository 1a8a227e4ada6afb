#include "metaopt/pipeline_json.hpp"

#include <nlohmann/json.hpp>

#include "metaopt/errors.hpp"

namespace metaopt {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json node_to_json(const PipelineNode& node) {
  ordered_json out;
  out["id"] = node.id;
  out["kind"] = to_string(node.kind);
  switch (node.kind) {
    case NodeKind::llm_call:
      out["prompt_slot"] = node.prompt_slot;
      break;
    case NodeKind::split:
    case NodeKind::extract:
      out["pattern"] = node.pattern;
      break;
    case NodeKind::aggregate:
      out["separator"] = node.separator;
      break;
    case NodeKind::foreach:
      if (!node.body.empty()) out["body"] = node_to_json(node.body.front());
      break;
  }
  return out;
}

std::string require_string(const json& obj, const char* key,
                           const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_string()) {
    throw ParseError("missing or non-string '" + std::string(key) + "' in " +
                     where);
  }
  return obj.at(key).get<std::string>();
}

PipelineNode node_from_json(const json& obj) {
  if (!obj.is_object()) throw ParseError("node entry is not an object");
  PipelineNode node;
  node.id = require_string(obj, "id", "node");
  node.kind = node_kind_from_string(require_string(obj, "kind", "node '" + node.id + "'"));
  switch (node.kind) {
    case NodeKind::llm_call:
      node.prompt_slot = require_string(obj, "prompt_slot", "node '" + node.id + "'");
      break;
    case NodeKind::split:
    case NodeKind::extract:
      node.pattern = require_string(obj, "pattern", "node '" + node.id + "'");
      break;
    case NodeKind::aggregate:
      node.separator = obj.value("separator", std::string("\n"));
      break;
    case NodeKind::foreach:
      if (!obj.contains("body")) {
        throw ParseError("foreach node '" + node.id + "' has no body");
      }
      node.body.push_back(node_from_json(obj.at("body")));
      break;
  }
  return node;
}

json parse_document(const std::string& text) {
  const std::string body = strip_code_fence(text);
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed pipeline document: ") + e.what(),
                     static_cast<long long>(e.byte));
  }
}

}  // namespace

std::string strip_code_fence(const std::string& text) {
  size_t begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  size_t end = text.find_last_not_of(" \t\r\n") + 1;
  std::string body = text.substr(begin, end - begin);
  if (body.rfind("```", 0) == 0) {
    size_t nl = body.find('\n');
    if (nl != std::string::npos) {
      size_t close = body.rfind("```");
      if (close > nl) {
        body = body.substr(nl + 1, close - nl - 1);
      }
    }
  }
  // A response may embed the fenced document in surrounding prose.
  else if (body.front() != '{' && body.front() != '[') {
    size_t fence = body.find("```");
    if (fence != std::string::npos) {
      return strip_code_fence(body.substr(fence));
    }
  }
  return body;
}

ordered_json spec_to_json(const PipelineSpec& spec) {
  ordered_json doc;
  doc["nodes"] = ordered_json::array();
  for (const PipelineNode& node : spec.nodes) {
    doc["nodes"].push_back(node_to_json(node));
  }
  doc["edges"] = ordered_json::array();
  for (const Edge& edge : spec.edges) {
    doc["edges"].push_back(ordered_json{{"from", edge.from}, {"to", edge.to}});
  }
  doc["output"] = spec.output;
  return doc;
}

PipelineSpec spec_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("pipeline document is not an object");
  PipelineSpec spec;
  if (!doc.contains("nodes") || !doc.at("nodes").is_array()) {
    throw ParseError("pipeline document has no 'nodes' array");
  }
  for (const json& entry : doc.at("nodes")) {
    spec.nodes.push_back(node_from_json(entry));
  }
  if (doc.contains("edges")) {
    if (!doc.at("edges").is_array()) {
      throw ParseError("'edges' is not an array");
    }
    for (const json& entry : doc.at("edges")) {
      spec.edges.push_back(Edge{require_string(entry, "from", "edge"),
                                require_string(entry, "to", "edge")});
    }
  }
  if (!doc.contains("output")) throw ParseError("pipeline document has no 'output'");
  spec.output = doc.at("output").get<std::string>();
  return spec;
}

std::string serialize_spec(const PipelineSpec& spec) {
  return spec_to_json(spec).dump(2);
}

PipelineSpec deserialize_spec(const std::string& text) {
  return spec_from_json(parse_document(text));
}

ordered_json program_to_json(const Program& program) {
  ordered_json doc = spec_to_json(program.spec);
  doc["task_description"] = program.task_description;
  ordered_json prompts = ordered_json::object();
  for (const auto& [slot, var] : program.prompts) {
    ordered_json entry;
    entry["value"] = var.value();
    entry["role"] = var.role_description();
    entry["learnable"] = var.learnable();
    if (!var.feedback().empty()) entry["feedback"] = var.feedback();
    prompts[slot] = std::move(entry);
  }
  doc["prompts"] = std::move(prompts);
  return doc;
}

Program program_from_json(const json& doc) {
  Program program;
  program.spec = spec_from_json(doc);
  program.task_description = doc.value("task_description", std::string());
  std::map<std::string, TextVariable> provided;
  if (doc.contains("prompts")) {
    if (!doc.at("prompts").is_object()) throw ParseError("'prompts' is not an object");
    for (const auto& [slot, entry] : doc.at("prompts").items()) {
      std::string value;
      std::string role = "prompt for " + slot;
      bool learnable = true;
      if (entry.is_string()) {
        value = entry.get<std::string>();
      } else if (entry.is_object()) {
        value = entry.value("value", std::string());
        role = entry.value("role", role);
        learnable = entry.value("learnable", true);
      } else {
        throw ParseError("prompt entry for '" + slot + "' must be a string or object");
      }
      TextVariable var(std::move(value), std::move(role), learnable);
      if (entry.is_object() && entry.contains("feedback")) {
        var.restore_feedback(entry.at("feedback").get<std::vector<std::string>>());
      }
      provided.emplace(slot, std::move(var));
    }
  }
  for (const std::string& slot : prompt_slots(program.spec)) {
    auto it = provided.find(slot);
    if (it != provided.end()) {
      program.prompts.emplace(slot, it->second);
    } else {
      program.prompts.emplace(slot, TextVariable("", "prompt for " + slot, true));
    }
  }
  return program;
}

std::string serialize_program(const Program& program) {
  return program_to_json(program).dump(2);
}

Program deserialize_program(const std::string& text) {
  return program_from_json(parse_document(text));
}

const std::string& pipeline_grammar_reference() {
  static const std::string text = R"(A pipeline document is a JSON object:
{
  "nodes": [ ... ],        // processing steps, see kinds below
  "edges": [{"from": ID-or-"$input", "to": ID}, ...],
  "output": ID,            // node whose text is the program's answer
  "task_description": "...",           // system text for every model call
  "prompts": {SLOT: {"value": "...", "role": "..."}, ...}
}
Node kinds:
  {"id": ID, "kind": "llm_call", "prompt_slot": SLOT}
      sends the slot's prompt plus the incoming text to the model
  {"id": ID, "kind": "split", "pattern": REGEX}
      splits incoming text on the regex; produces a list
  {"id": ID, "kind": "aggregate", "separator": TEXT}
      joins all incoming values with the separator
  {"id": ID, "kind": "extract", "pattern": REGEX}
      first capture group of the regex, or the full text when no match
  {"id": ID, "kind": "foreach", "body": NODE}
      applies the single body node to each element of a list input
Rules: the graph must be acyclic; every node except aggregate takes exactly
one incoming edge (aggregate takes one or more); the document must keep at
least one llm_call node; every prompt_slot needs an entry under "prompts".)";
  return text;
}

}  // namespace metaopt
