#include "metaopt/scripted_engine.hpp"

#include <fstream>

#include "metaopt/errors.hpp"

namespace metaopt {

using nlohmann::json;

TranscriptEntry transcript_entry_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("transcript entry is not an object");
  TranscriptEntry entry;
  if (doc.contains("match")) {
    const json& m = doc.at("match");
    if (m.is_string()) {
      entry.match.push_back(m.get<std::string>());
    } else if (m.is_array()) {
      for (const json& part : m) entry.match.push_back(part.get<std::string>());
    } else {
      throw ParseError("transcript 'match' must be a string or array");
    }
  }
  entry.match_system = doc.value("match_system", std::string());
  entry.exact = doc.value("exact", false);
  entry.once = doc.value("once", false);
  if (entry.exact && entry.match.size() != 1) {
    throw ParseError("exact transcript entry needs exactly one 'match' string");
  }
  if (!doc.contains("response") || !doc.at("response").is_string()) {
    throw ParseError("transcript entry has no 'response' string");
  }
  entry.response = doc.at("response").get<std::string>();
  entry.prompt_tokens = doc.value("prompt_tokens", -1ll);
  entry.completion_tokens = doc.value("completion_tokens", -1ll);
  return entry;
}

ScriptedEngine::ScriptedEngine(const json& transcript) {
  if (!transcript.is_array()) throw ParseError("transcript is not an array");
  for (const json& doc : transcript) {
    entries_.push_back(transcript_entry_from_json(doc));
  }
}

ScriptedEngine ScriptedEngine::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open transcript file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ParseError("malformed transcript " + path.string() + ": " + e.what(),
                     static_cast<long long>(e.byte));
  }
  return ScriptedEngine(doc);
}

void ScriptedEngine::add(TranscriptEntry entry) {
  std::lock_guard<std::mutex> lock(mutex_);
  entries_.push_back(std::move(entry));
}

long long ScriptedEngine::served() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return served_;
}

EngineResponse ScriptedEngine::complete(const EngineRequest& request) {
  std::lock_guard<std::mutex> lock(mutex_);
  for (TranscriptEntry& entry : entries_) {
    if (entry.once && entry.used) continue;
    bool hit = true;
    if (entry.exact) {
      hit = request.user_text == entry.match.front();
    } else {
      for (const std::string& part : entry.match) {
        if (request.user_text.find(part) == std::string::npos) {
          hit = false;
          break;
        }
      }
    }
    if (hit && !entry.match_system.empty() &&
        request.system_text.find(entry.match_system) == std::string::npos) {
      hit = false;
    }
    if (!hit) continue;
    entry.used = true;
    ++served_;
    EngineResponse response;
    response.text = entry.response;
    response.prompt_tokens =
        entry.prompt_tokens >= 0
            ? entry.prompt_tokens
            : estimate_tokens(request.system_text) +
                  estimate_tokens(request.user_text);
    response.completion_tokens = entry.completion_tokens >= 0
                                     ? entry.completion_tokens
                                     : estimate_tokens(response.text);
    return response;
  }
  std::string preview = request.user_text.substr(0, 160);
  throw UnscriptedRequestError("no transcript entry matches request (level " +
                               std::string(to_string(request.level)) +
                               "): \"" + preview + "\"");
}

}  // namespace metaopt
