#pragma once

#include <optional>
#include <string>

#include "metaopt/engine.hpp"
#include "metaopt/events.hpp"

namespace metaopt {

enum class MetricKind { exact_choice, exact_text, judge };

const char* to_string(MetricKind kind);
MetricKind metric_kind_from_string(const std::string& text);

// Scoring rule mapping (prediction, reference) to [0,1]. Exact kinds
// return only 0 or 1; judge asks an engine for a yes/no verdict.
struct Metric {
  MetricKind kind = MetricKind::exact_text;
  // Judge template; {prediction} and {reference} are substituted. Empty
  // selects the built-in template.
  std::string judge_prompt;
};

// Answer letter from the final "Answer:" marker: the last case-sensitive
// occurrence wins, optional space/'*'/'(' padding is skipped, and the
// letter must be A-D (either case) not followed by another alphanumeric.
std::optional<char> extract_choice_letter(const std::string& text);

// Lowercased, whitespace runs collapsed to single spaces, trimmed.
std::string normalize_text(const std::string& text);

// Judge verdicts re-ask up to 3 times on an unparseable response, then
// score 0 with a warning event (when a log is given).
double metric_evaluate(const Metric& metric, const std::string& prediction,
                       const std::string& reference, Engine* engine = nullptr,
                       EventLog* log = nullptr);

}  // namespace metaopt
