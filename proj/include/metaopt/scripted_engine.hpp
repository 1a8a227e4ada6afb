#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaopt/engine.hpp"

namespace metaopt {

// One transcript record. A request matches when every `match` substring
// occurs in its user text (or, in exact mode, the user text equals
// `match` verbatim) and, when given, `match_system` occurs in its system
// text. Entries are tried in order; the first match wins.
struct TranscriptEntry {
  std::vector<std::string> match;  // all must occur in user_text
  std::string match_system;        // optional substring of system_text
  bool exact = false;              // single match string compared verbatim
  bool once = false;               // consumed after first hit
  std::string response;
  long long prompt_tokens = -1;      // -1 = estimate from request
  long long completion_tokens = -1;  // -1 = estimate from response
  bool used = false;
};

// Replays a fixed transcript; raises UnscriptedRequestError instead of
// ever fabricating text. Token counts default to length-based estimates
// so scripted runs still exercise the usage ledger.
class ScriptedEngine : public Engine {
 public:
  ScriptedEngine() = default;
  explicit ScriptedEngine(const nlohmann::json& transcript);
  static ScriptedEngine from_file(const std::filesystem::path& path);

  void add(TranscriptEntry entry);

  std::string id() const override { return "scripted"; }
  EngineResponse complete(const EngineRequest& request) override;

  // Requests served so far; lets tests assert replay counts.
  long long served() const;

 private:
  mutable std::mutex mutex_;
  std::vector<TranscriptEntry> entries_;
  long long served_ = 0;
};

// Parses one transcript record from its JSON form:
//   {"match": "sub" | ["sub", ...], "match_system"?: "sub",
//    "exact"?: bool, "once"?: bool, "response": "text",
//    "prompt_tokens"?: N, "completion_tokens"?: N}
TranscriptEntry transcript_entry_from_json(const nlohmann::json& doc);

}  // namespace metaopt
