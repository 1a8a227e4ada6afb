#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "metaopt/pipeline.hpp"

namespace metaopt {

// Pipeline DSL documents are JSON with top-level keys `nodes`, `edges`,
// `output`, and (for full programs) `prompts` and `task_description`.
// See docs/pipeline-dsl.md for the schema.

std::string serialize_spec(const PipelineSpec& spec);

// Accepts either a bare spec document or a full program document; prompt
// sections are ignored. Throws ParseError with a byte position for
// malformed JSON and with the offending name for semantic errors.
PipelineSpec deserialize_spec(const std::string& text);

std::string serialize_program(const Program& program);

// Parses a full program document. Slots the document does not provide a
// prompt for are bound to empty learnable variables so the program still
// satisfies its coverage invariant.
Program deserialize_program(const std::string& text);

nlohmann::ordered_json spec_to_json(const PipelineSpec& spec);
nlohmann::ordered_json program_to_json(const Program& program);
PipelineSpec spec_from_json(const nlohmann::json& doc);
Program program_from_json(const nlohmann::json& doc);

// Strips a leading ``` fence (with optional language tag) and trailing
// fence if present; otherwise returns the trimmed input. Model responses
// often wrap documents this way.
std::string strip_code_fence(const std::string& text);

// Compact description of the pipeline document grammar, suitable for
// inclusion in requests that ask a model to emit a pipeline document.
const std::string& pipeline_grammar_reference();

}  // namespace metaopt
