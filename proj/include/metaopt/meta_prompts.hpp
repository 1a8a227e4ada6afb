#pragma once

#include <string>
#include <utility>
#include <vector>

#include "metaopt/dataset.hpp"
#include "metaopt/optimizer.hpp"

namespace metaopt {

// Request sent by the prompt meta-optimizer: walks the reviewer through
// the optimizer's spec, the task (type + one worked example), and the
// current task description, then asks for an improved description as a
// JSON field "improved_task_description". `header` (e.g. the meta
// iteration banner) is prepended when non-empty.
std::string compose_prompt_meta_request(const OptimizerSpec& current_best,
                                        const std::string& question_type,
                                        const TaskExample& example,
                                        const std::string& header = "");

// Extracts "improved_task_description" from a response; tolerates code
// fences and a bare field without surrounding braces. Throws ParseError.
std::string parse_improved_task_description(const std::string& response);

// Request sent by the structure meta-optimizer: presents every input
// optimizer's spec and measured score plus the current best, explains the
// phase-ordering considerations, and asks for a schedule as JSON
// {"schedule": [{"strategy", "repeats", "prompt_override"?}, ...]}.
std::string compose_structure_meta_request(
    const std::vector<std::pair<OptimizerSpec, double>>& inputs,
    const OptimizerSpec& current_best, const std::string& header = "");

// Parses the schedule reply. Throws ParseError naming an unknown
// strategy, a non-positive repeat count, or a phase count outside
// [1, kMaxSchedulePhases].
std::vector<SchedulePhase> parse_schedule_response(const std::string& response);

}  // namespace metaopt
