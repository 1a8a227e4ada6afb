#include "metaopt/meta_prompts.hpp"

#include "metaopt/errors.hpp"
#include "metaopt/pipeline_json.hpp"

namespace metaopt {

using nlohmann::json;

std::string compose_prompt_meta_request(const OptimizerSpec& current_best,
                                        const std::string& question_type,
                                        const TaskExample& example,
                                        const std::string& header) {
  std::string request;
  if (!header.empty()) request += header + "\n\n";
  request +=
      "# Task Requirement\n\n"
      "An optimizer improves a language model pipeline so that the pipeline "
      "can generate better outputs based on inputs.\n\n"
      "A pipeline consists of several agents, each with a specific role "
      "defined by its prompt.\n\n"
      "You will be given a general task description of an optimizer and the "
      "specific task the pipeline aims to solve.\n\n"
      "Your task is to propose an improved optimizer task description so "
      "that the optimizer can better optimize the pipeline for the given "
      "task.\n\n"
      "# Optimizer Code\n\n"
      "Here is the source code of the optimizer: (just for reference)\n\n";
  request += serialize_optimizer(current_best);
  request +=
      "\n\n# The task of the optimizer\n\n"
      "Specifically, the pipeline aims to solve this kind of question: ";
  request += question_type;
  request +=
      ".\n\nAn example of the task is provided here:\n\n"
      "Question: ";
  request += example.question;
  request += "\n\nAnswer: ";
  request += example.answer;
  request +=
      "\n\nThe optimizer wants to improve the pipeline to solve such kind "
      "of problems.\n\n"
      "# Current Task Description\n\n"
      "Here is the current task description of the optimizer, which you can "
      "improve:\n";
  request += current_best.optimizer_prompt.value();
  request +=
      "\n\n# Your task\n\n"
      "You should identify what the optimizer should pay attention to in "
      "order to improve the ";
  request += to_string(current_best.strategy);
  request +=
      " behavior of the pipeline optimizer for solving the given task.\n\n"
      "Conduct a detailed analysis of the given example, and respond in the "
      "following format:\n\n"
      "```json\n"
      "{\"improved_task_description\": \"...\"}\n"
      "```\n";
  return request;
}

std::string parse_improved_task_description(const std::string& response) {
  std::string body = strip_code_fence(response);
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error&) {
    // Tolerate a bare field without braces, as in
    //   "improved_task_description": "...",
    std::string wrapped = "{" + body + "}";
    if (!wrapped.empty() && wrapped[wrapped.size() - 2] == ',') {
      wrapped = wrapped.substr(0, wrapped.size() - 2) + "}";
    }
    try {
      doc = json::parse(wrapped);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("unparseable meta response: ") + e.what());
    }
  }
  if (!doc.is_object() || !doc.contains("improved_task_description") ||
      !doc.at("improved_task_description").is_string()) {
    throw ParseError(
        "meta response lacks a string field 'improved_task_description'");
  }
  std::string improved = doc.at("improved_task_description").get<std::string>();
  if (improved.empty()) {
    throw ParseError("'improved_task_description' is empty");
  }
  return improved;
}

std::string compose_structure_meta_request(
    const std::vector<std::pair<OptimizerSpec, double>>& inputs,
    const OptimizerSpec& current_best, const std::string& header) {
  std::string request;
  if (!header.empty()) request += header + "\n\n";
  request +=
      "# Task Requirement\n\n"
      "An optimizer improves a language model pipeline so that the pipeline "
      "can generate better outputs based on inputs.\n\n"
      "The structure and prompts of the available optimizers are fixed, and "
      "you will be given their specifications.\n\n"
      "Your task is to propose an improved optimizer to better optimize the "
      "pipeline. This is achieved by integrating the given optimizers and "
      "merging them into a new one.\n\n"
      "# Task Details\n\n"
      "You will be provided with the specifications of several optimizers, "
      "each annotated with its purpose and its measured validation score.\n\n"
      "Carefully read through them, then combine their strategies into a "
      "more effective schedule. A step applies a single strategy once, "
      "because the critique context of one step is not reusable by the "
      "next.\n\n"
      "Different strategies suit different purposes and should be applied "
      "in a specific order. For example, a structure change overwrites the "
      "prompts of previously optimized components, so structure "
      "optimization should come before prompt optimization when both are "
      "used.\n\n"
      "Your schedule applies strategies sequentially, each strategy being "
      "applied its repeat count of times before moving to the next one.\n\n"
      "Current task description of the best optimizer so far:\n";
  request += current_best.optimizer_prompt.value();
  request += "\n\n# Available optimizers\n";
  for (const auto& [spec, score] : inputs) {
    request += "\n- ";
    request += spec.name;
    request += " (validation score " + std::to_string(score);
    if (spec == current_best) request += ", current best";
    request += "):\n";
    request += serialize_optimizer(spec);
    request += "\n";
  }
  request +=
      "\n# Response format\n\n"
      "Reply with one JSON object:\n\n"
      "```json\n"
      "{\"schedule\": [{\"strategy\": \"structure_search\", \"repeats\": 1, "
      "\"prompt_override\": \"...\"}]}\n"
      "```\n\n"
      "Allowed strategies: \"prompt_tgd\" and \"structure_search\". Use 1 "
      "to " +
      std::to_string(kMaxSchedulePhases) +
      " phases; every \"repeats\" must be at least 1; \"prompt_override\" "
      "is optional.\n";
  return request;
}

std::vector<SchedulePhase> parse_schedule_response(
    const std::string& response) {
  std::string body = strip_code_fence(response);
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("unparseable schedule response: ") + e.what());
  }
  const json* list = nullptr;
  if (doc.is_object() && doc.contains("schedule") &&
      doc.at("schedule").is_array()) {
    list = &doc.at("schedule");
  } else if (doc.is_array()) {
    list = &doc;
  } else {
    throw ParseError("schedule response lacks a 'schedule' array");
  }
  std::vector<SchedulePhase> phases;
  for (const json& entry : *list) {
    SchedulePhase phase;
    if (entry.is_array() && entry.size() >= 2) {
      // Tolerate the tuple form [strategy, repeats].
      phase.strategy = strategy_from_string(entry.at(0).get<std::string>());
      phase.repeats = entry.at(1).get<int>();
    } else if (entry.is_object()) {
      if (!entry.contains("strategy")) {
        throw ParseError("schedule phase has no 'strategy'");
      }
      phase.strategy =
          strategy_from_string(entry.at("strategy").get<std::string>());
      phase.repeats = entry.value("repeats", 1);
      phase.prompt_override = entry.value("prompt_override", std::string());
    } else {
      throw ParseError("schedule phase must be an object or [strategy, n]");
    }
    if (phase.strategy == Strategy::composite_schedule) {
      throw ParseError("schedules cannot nest 'composite_schedule'");
    }
    if (phase.repeats < 1) {
      throw ParseError("schedule phase repeats must be >= 1");
    }
    phases.push_back(std::move(phase));
  }
  if (phases.empty()) throw ParseError("schedule has no phases");
  if (phases.size() > kMaxSchedulePhases) {
    throw ParseError("schedule exceeds " +
                     std::to_string(kMaxSchedulePhases) + " phases");
  }
  return phases;
}

}  // namespace metaopt
