#pragma once

#include <cstdint>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

namespace metaopt {

// Which tier issued a model call; drives token accounting.
enum class CallLevel { program, optimizer, meta };

const char* to_string(CallLevel level);
CallLevel call_level_from_string(const std::string& text);

struct EngineRequest {
  std::string system_text;
  std::string user_text;
  double temperature = 0.0;
  int max_tokens = 0;  // 0 = provider default
  std::uint64_t seed = 0;  // 0 = unset
  CallLevel level = CallLevel::program;
};

struct EngineResponse {
  std::string text;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  bool cached = false;
};

struct UsageCounters {
  long long requests = 0;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;

  long long total_tokens() const { return prompt_tokens + completion_tokens; }
  UsageCounters& operator+=(const UsageCounters& other);
};

// Per-level running totals. Totals only grow; the grand total is the sum
// over levels by construction.
class UsageLedger {
 public:
  void record(CallLevel level, long long prompt_tokens,
              long long completion_tokens);
  UsageCounters level_totals(CallLevel level) const;
  UsageCounters grand_total() const;
  void merge(const UsageLedger& other);
  nlohmann::ordered_json to_json() const;

 private:
  mutable std::mutex mutex_;
  UsageCounters levels_[3];
};

nlohmann::ordered_json usage_report(const UsageLedger& ledger);

// Rough token estimate for engines that do not meter usage themselves
// (scripted, echo): one token per four characters, rounded up.
long long estimate_tokens(const std::string& text);

// Black-box completion interface. Callers go through call(), which
// delegates to the engine-specific complete() and records usage in the
// attached ledger; wrapper engines (cache) invoke inner complete()
// directly so each request is accounted exactly once, at the outermost
// layer.
class Engine {
 public:
  virtual ~Engine() = default;
  virtual std::string id() const = 0;
  virtual EngineResponse complete(const EngineRequest& request) = 0;

  EngineResponse call(const EngineRequest& request);

  void attach_ledger(UsageLedger* ledger) { ledger_ = ledger; }
  UsageLedger* ledger() const { return ledger_; }

 private:
  UsageLedger* ledger_ = nullptr;
};

// Returns the user text verbatim; the identity engine for plumbing tests.
class EchoEngine : public Engine {
 public:
  std::string id() const override { return "echo"; }
  EngineResponse complete(const EngineRequest& request) override;
};

}  // namespace metaopt
