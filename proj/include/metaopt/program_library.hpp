#pragma once

#include <string>
#include <vector>

#include "metaopt/pipeline.hpp"

namespace metaopt {

// Built-in reference programs, named after the benchmark each layout was
// learned for:
//   "minimal"          — one model call, generic step-by-step prompt
//   "word_sorting"     — plan, split into steps, solve each, combine
//   "dyck_languages"   — seven specialist calls over bracket analyses
//   "abstract_algebra" — one call, statement-by-statement choice prompt
//   "gpqa_diamond"     — one call, scientific-reasoning choice prompt
std::vector<std::string> reference_program_names();

// Throws ConfigError for an unknown name.
Program reference_program(const std::string& name);

// Single llm_call bound to slot "executer" with the given prompt text.
Program single_call_program(std::string prompt_text);

// System text shared by the reference programs: answer with reasoning and
// a final "Answer: $VALUE" line.
const std::string& default_task_description();

}  // namespace metaopt
