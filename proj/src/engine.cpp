#include "metaopt/engine.hpp"

#include <stdexcept>

namespace metaopt {

const char* to_string(CallLevel level) {
  switch (level) {
    case CallLevel::program: return "program";
    case CallLevel::optimizer: return "optimizer";
    case CallLevel::meta: return "meta";
  }
  return "program";
}

CallLevel call_level_from_string(const std::string& text) {
  if (text == "program") return CallLevel::program;
  if (text == "optimizer") return CallLevel::optimizer;
  if (text == "meta") return CallLevel::meta;
  throw std::invalid_argument("unknown call level '" + text + "'");
}

UsageCounters& UsageCounters::operator+=(const UsageCounters& other) {
  requests += other.requests;
  prompt_tokens += other.prompt_tokens;
  completion_tokens += other.completion_tokens;
  return *this;
}

void UsageLedger::record(CallLevel level, long long prompt_tokens,
                         long long completion_tokens) {
  std::lock_guard<std::mutex> lock(mutex_);
  UsageCounters& c = levels_[static_cast<int>(level)];
  c.requests += 1;
  c.prompt_tokens += prompt_tokens;
  c.completion_tokens += completion_tokens;
}

UsageCounters UsageLedger::level_totals(CallLevel level) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return levels_[static_cast<int>(level)];
}

UsageCounters UsageLedger::grand_total() const {
  std::lock_guard<std::mutex> lock(mutex_);
  UsageCounters total;
  for (const UsageCounters& c : levels_) total += c;
  return total;
}

void UsageLedger::merge(const UsageLedger& other) {
  for (CallLevel level :
       {CallLevel::program, CallLevel::optimizer, CallLevel::meta}) {
    UsageCounters theirs = other.level_totals(level);
    std::lock_guard<std::mutex> lock(mutex_);
    levels_[static_cast<int>(level)] += theirs;
  }
}

nlohmann::ordered_json UsageLedger::to_json() const {
  auto entry = [](const UsageCounters& c) {
    return nlohmann::ordered_json{{"requests", c.requests},
                                  {"prompt_tokens", c.prompt_tokens},
                                  {"completion_tokens", c.completion_tokens},
                                  {"total_tokens", c.total_tokens()}};
  };
  nlohmann::ordered_json doc;
  for (CallLevel level :
       {CallLevel::program, CallLevel::optimizer, CallLevel::meta}) {
    doc[to_string(level)] = entry(level_totals(level));
  }
  doc["total"] = entry(grand_total());
  return doc;
}

nlohmann::ordered_json usage_report(const UsageLedger& ledger) {
  return ledger.to_json();
}

long long estimate_tokens(const std::string& text) {
  return static_cast<long long>((text.size() + 3) / 4);
}

EngineResponse Engine::call(const EngineRequest& request) {
  EngineResponse response = complete(request);
  if (ledger_) {
    ledger_->record(request.level, response.prompt_tokens,
                    response.completion_tokens);
  }
  return response;
}

EngineResponse EchoEngine::complete(const EngineRequest& request) {
  EngineResponse response;
  response.text = request.user_text;
  response.prompt_tokens =
      estimate_tokens(request.system_text) + estimate_tokens(request.user_text);
  response.completion_tokens = estimate_tokens(response.text);
  return response;
}

}  // namespace metaopt
