#include "metaopt/metrics.hpp"

#include <cctype>
#include <stdexcept>

#include "metaopt/errors.hpp"

namespace metaopt {

const char* to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::exact_choice: return "exact_choice";
    case MetricKind::exact_text: return "exact_text";
    case MetricKind::judge: return "judge";
  }
  return "exact_text";
}

MetricKind metric_kind_from_string(const std::string& text) {
  if (text == "exact_choice") return MetricKind::exact_choice;
  if (text == "exact_text") return MetricKind::exact_text;
  if (text == "judge") return MetricKind::judge;
  throw std::invalid_argument("unknown metric kind '" + text + "'");
}

std::optional<char> extract_choice_letter(const std::string& text) {
  std::size_t marker = text.rfind("Answer:");
  if (marker == std::string::npos) return std::nullopt;
  std::size_t pos = marker + 7;
  while (pos < text.size() &&
         (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '*' ||
          text[pos] == '(')) {
    ++pos;
  }
  if (pos >= text.size()) return std::nullopt;
  char letter = text[pos];
  if (letter >= 'a' && letter <= 'd') letter = char(letter - 'a' + 'A');
  if (letter < 'A' || letter > 'D') return std::nullopt;
  // "Answer: AB" is not a choice; a letter glued to more word characters
  // does not count.
  if (pos + 1 < text.size() &&
      std::isalnum(static_cast<unsigned char>(text[pos + 1]))) {
    return std::nullopt;
  }
  return letter;
}

std::string normalize_text(const std::string& text) {
  std::string out;
  bool in_space = true;  // swallows leading whitespace
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(
        static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

namespace {

std::optional<char> reference_letter(const std::string& reference) {
  for (char c : reference) {
    char letter = c;
    if (letter >= 'a' && letter <= 'd') letter = char(letter - 'a' + 'A');
    if (letter >= 'A' && letter <= 'D') return letter;
    if (std::isalnum(static_cast<unsigned char>(c))) return std::nullopt;
  }
  return std::nullopt;
}

std::string substitute(std::string text, const std::string& placeholder,
                       const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
  }
  return text;
}

const char* kDefaultJudgeTemplate =
    "Decide whether the prediction reaches the same final answer as the "
    "reference.\n\nPrediction:\n{prediction}\n\nReference:\n{reference}\n\n"
    "Reply with exactly one word: yes or no.";

// "yes"/"no" as a standalone word, case-insensitive, first occurrence.
std::optional<bool> parse_verdict(const std::string& text) {
  auto is_word_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c));
  };
  std::string lower;
  lower.reserve(text.size());
  for (char c : text) {
    lower.push_back(
        static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  for (std::size_t pos = 0; pos < lower.size(); ++pos) {
    for (const std::string& word : {std::string("yes"), std::string("no")}) {
      if (lower.compare(pos, word.size(), word) != 0) continue;
      bool start_ok = pos == 0 || !is_word_char(lower[pos - 1]);
      bool end_ok = pos + word.size() >= lower.size() ||
                    !is_word_char(lower[pos + word.size()]);
      if (start_ok && end_ok) return word == "yes";
    }
  }
  return std::nullopt;
}

double judge_score(const Metric& metric, const std::string& prediction,
                   const std::string& reference, Engine* engine,
                   EventLog* log) {
  if (!engine) {
    throw ConfigError("judge metric requires an engine");
  }
  std::string base = metric.judge_prompt.empty() ? kDefaultJudgeTemplate
                                                 : metric.judge_prompt;
  std::string prompt = substitute(
      substitute(base, "{prediction}", prediction), "{reference}", reference);
  for (int attempt = 0; attempt < 4; ++attempt) {
    EngineRequest request;
    request.user_text =
        attempt == 0
            ? prompt
            : prompt + "\n\nYour previous reply was not a clear verdict. "
                       "Reply with exactly one word: yes or no.";
    request.level = CallLevel::program;
    EngineResponse response = engine->call(request);
    if (std::optional<bool> verdict = parse_verdict(response.text)) {
      return *verdict ? 1.0 : 0.0;
    }
  }
  if (log) {
    log->emit("judge_verdict_unparseable",
              {{"prediction_preview", prediction.substr(0, 80)}});
  }
  return 0.0;
}

}  // namespace

double metric_evaluate(const Metric& metric, const std::string& prediction,
                       const std::string& reference, Engine* engine,
                       EventLog* log) {
  switch (metric.kind) {
    case MetricKind::exact_choice: {
      std::optional<char> predicted = extract_choice_letter(prediction);
      std::optional<char> expected = reference_letter(reference);
      if (!predicted || !expected) return 0.0;
      return *predicted == *expected ? 1.0 : 0.0;
    }
    case MetricKind::exact_text:
      return normalize_text(prediction) == normalize_text(reference) ? 1.0
                                                                     : 0.0;
    case MetricKind::judge:
      return judge_score(metric, prediction, reference, engine, log);
  }
  return 0.0;
}

}  // namespace metaopt
