#include "metaopt/program_library.hpp"

#include "metaopt/errors.hpp"

namespace metaopt {

namespace {

PipelineNode llm(std::string id, std::string slot) {
  PipelineNode node;
  node.id = std::move(id);
  node.kind = NodeKind::llm_call;
  node.prompt_slot = std::move(slot);
  return node;
}

PipelineNode split(std::string id, std::string pattern) {
  PipelineNode node;
  node.id = std::move(id);
  node.kind = NodeKind::split;
  node.pattern = std::move(pattern);
  return node;
}

PipelineNode aggregate(std::string id, std::string separator = "\n\n") {
  PipelineNode node;
  node.id = std::move(id);
  node.kind = NodeKind::aggregate;
  node.separator = std::move(separator);
  return node;
}

PipelineNode extract(std::string id, std::string pattern) {
  PipelineNode node;
  node.id = std::move(id);
  node.kind = NodeKind::extract;
  node.pattern = std::move(pattern);
  return node;
}

PipelineNode foreach_node(std::string id, PipelineNode body) {
  PipelineNode node;
  node.id = std::move(id);
  node.kind = NodeKind::foreach;
  node.body.push_back(std::move(body));
  return node;
}

Program word_sorting_program() {
  Program program;
  program.task_description = default_task_description();
  PipelineSpec& spec = program.spec;
  spec.nodes = {
      llm("plan", "planner"),
      split("steps", "\\n+"),
      foreach_node("sub_solutions", llm("subsolver_call", "subsolver")),
      aggregate("reasoning", "\n"),
      aggregate("context"),
      llm("final", "final"),
  };
  spec.edges = {
      {kPipelineInput, "plan"},   {"plan", "steps"},
      {"steps", "sub_solutions"}, {kPipelineInput, "context"},
      {"sub_solutions", "reasoning"}, {"reasoning", "context"},
      {"context", "final"},
  };
  spec.output = "final";
  program.prompts = {
      {"planner",
       TextVariable("Create a step by step plan for the question. Provide "
                    "each step on a new line.",
                    "planner prompt")},
      {"subsolver",
       TextVariable("Solve this sub-step in detail, without giving the final "
                    "answer.",
                    "sub-step solver prompt")},
      {"final",
       TextVariable("Combine all reasoning into a coherent final response, "
                    "ending with the format: Answer: $VALUE",
                    "final answer prompt")},
  };
  return program;
}

Program dyck_program() {
  Program program;
  program.task_description = default_task_description();
  PipelineSpec& spec = program.spec;
  spec.nodes = {
      llm("plan", "planner"),
      // The plan decomposition is produced but feeds nothing downstream;
      // the learned layout keeps it, and execution tolerates unused nodes.
      split("analysis_steps", "\\d\\)"),
      llm("type_analysis", "type_analyzer"),
      aggregate("stack_context"),
      llm("stack_validation", "stack_validator"),
      aggregate("nesting_context"),
      llm("nesting_analysis", "nesting_analyzer"),
      aggregate("depth_context"),
      llm("depth_analysis", "depth_checker"),
      aggregate("sequence_context"),
      llm("sequence_validation", "sequence_validator"),
      aggregate("final_context"),
      llm("final_result", "final_evaluator"),
      extract("answer", "Answer: (.+)"),
  };
  spec.edges = {
      {kPipelineInput, "plan"},
      {"plan", "analysis_steps"},
      {kPipelineInput, "type_analysis"},
      {kPipelineInput, "stack_context"},
      {"type_analysis", "stack_context"},
      {"stack_context", "stack_validation"},
      {kPipelineInput, "nesting_context"},
      {"stack_validation", "nesting_context"},
      {"nesting_context", "nesting_analysis"},
      {kPipelineInput, "depth_context"},
      {"nesting_analysis", "depth_context"},
      {"depth_context", "depth_analysis"},
      {kPipelineInput, "sequence_context"},
      {"depth_analysis", "sequence_context"},
      {"sequence_context", "sequence_validation"},
      {kPipelineInput, "final_context"},
      {"stack_validation", "final_context"},
      {"nesting_analysis", "final_context"},
      {"depth_analysis", "final_context"},
      {"sequence_validation", "final_context"},
      {"final_context", "final_result"},
      {"final_result", "answer"},
  };
  spec.output = "answer";
  program.prompts = {
      {"planner",
       TextVariable("Break down the Dyck sequence validation into detailed "
                    "steps. Format as numbered steps: 1), 2), etc.",
                    "creates detailed analysis plan")},
      {"type_analyzer",
       TextVariable("Identify and categorize all bracket types. List each "
                    "type and its corresponding closing bracket. Format: "
                    "'Types: [pairs]'",
                    "analyzes bracket types and pairs")},
      {"stack_validator",
       TextVariable("Simulate stack operations for bracket matching. Show "
                    "stack state after each operation. End with 'Answer: "
                    "Valid/Invalid'",
                    "performs stack-based validation")},
      {"nesting_analyzer",
       TextVariable("Analyze nesting hierarchy. Check if inner brackets close "
                    "before outer brackets. End with 'Answer: "
                    "Proper/Improper'",
                    "validates nesting hierarchy")},
      {"depth_checker",
       TextVariable("Calculate maximum nesting depth and verify balanced "
                    "structure. End with 'Answer: Depth=X,Balanced=Yes/No'",
                    "checks nesting depth and balance")},
      {"sequence_validator",
       TextVariable("Validate sequence completeness and correctness. End "
                    "with 'Answer: Complete/Incomplete'",
                    "validates sequence completeness")},
      {"final_evaluator",
       TextVariable("Synthesize all analysis results and determine if this "
                    "is a valid Dyck sequence. End with 'Answer: Yes/No'",
                    "makes final validity determination")},
  };
  return program;
}

Program algebra_program() {
  Program program = single_call_program(
      "You will answer a multiple choice question. Analyze each statement "
      "separately and provide your reasoning. Use clear, logical steps, "
      "verifying each sub-component of the problem systematically. Present "
      "each statement distinctly using bullet points or numbers, ensuring "
      "the final conclusion is clearly separated from the statement "
      "evaluations. Include any assumptions or context necessary for each "
      "conclusion. After evaluating each statement, reexamine your "
      "conclusions to confirm their correctness. Introduce a summary "
      "verification step before concluding. The last line of your response "
      "should be of the following format: 'Answer: $VALUE' where VALUE is "
      "one of ABCD.");
  return program;
}

Program science_program() {
  Program program = single_call_program(
      "You will answer a multiple choice question. Begin by identifying and "
      "listing all key details and constraints from the problem statement. "
      "Use explicit reasoning steps to outline the solution, incorporating "
      "relevant scientific principles such as reaction mechanisms or "
      "stereochemistry. Verify your initial conclusions by cross-checking "
      "each step against the problem's requirements. Consider alternative "
      "answers and evaluate why they might be correct or incorrect. Provide "
      "a clear justification for your answer choice, and rate your "
      "confidence in the final answer on a scale from 1 to 10, explaining "
      "your rationale. The last line of your response should be of the "
      "following format: 'Answer: $VALUE' where VALUE is one of ABCD.");
  return program;
}

}  // namespace

const std::string& default_task_description() {
  static const std::string text =
      "You will answer a reasoning question. Think step by step. The last "
      "line of your response should be of the following format: 'Answer: "
      "$VALUE' where VALUE is the answer to the question.";
  return text;
}

Program single_call_program(std::string prompt_text) {
  Program program;
  program.task_description = default_task_description();
  program.spec.nodes = {llm("executer", "executer")};
  program.spec.edges = {{kPipelineInput, "executer"}};
  program.spec.output = "executer";
  program.prompts = {
      {"executer",
       TextVariable(std::move(prompt_text),
                    "prompt for the executer, which aims to solve the task")},
  };
  return program;
}

std::vector<std::string> reference_program_names() {
  return {"minimal", "word_sorting", "dyck_languages", "abstract_algebra",
          "gpqa_diamond"};
}

Program reference_program(const std::string& name) {
  if (name == "minimal") {
    return single_call_program(
        "Answer the question. Reason step by step, then give the final "
        "answer on its own last line as 'Answer: $VALUE'.");
  }
  if (name == "word_sorting") return word_sorting_program();
  if (name == "dyck_languages") return dyck_program();
  if (name == "abstract_algebra") return algebra_program();
  if (name == "gpqa_diamond") return science_program();
  throw ConfigError("unknown reference program '" + name + "'");
}

}  // namespace metaopt
