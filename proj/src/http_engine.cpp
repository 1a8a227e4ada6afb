#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "metaopt/http_engine.hpp"

#include <chrono>
#include <thread>

#include <nlohmann/json.hpp>

#include "metaopt/errors.hpp"

namespace metaopt {

using nlohmann::json;
using nlohmann::ordered_json;

HttpEngine::HttpEngine(HttpEngineOptions options)
    : options_(std::move(options)) {
  if (options_.base_url.empty()) {
    throw ConfigError("http engine requires a base_url");
  }
  if (options_.model.empty()) {
    throw ConfigError("http engine requires a model name");
  }
}

std::string HttpEngine::id() const {
  return "http:" + options_.model;
}

namespace {

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

EngineResponse HttpEngine::complete(const EngineRequest& request) {
  ordered_json body;
  body["model"] = options_.model;
  body["messages"] = ordered_json::array();
  if (!request.system_text.empty()) {
    body["messages"].push_back(
        {{"role", "system"}, {"content", request.system_text}});
  }
  body["messages"].push_back({{"role", "user"}, {"content", request.user_text}});
  body["temperature"] = request.temperature;
  if (request.max_tokens > 0) body["max_tokens"] = request.max_tokens;
  if (request.seed != 0) body["seed"] = request.seed;
  const std::string payload = body.dump();

  httplib::Client client(options_.base_url);
  client.set_connection_timeout(options_.timeout_seconds, 0);
  client.set_read_timeout(options_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!options_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options_.api_key);
  }

  std::string last_failure = "no attempt made";
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      int slot = attempt - 1;
      int delay = slot < static_cast<int>(options_.backoff_ms.size())
                      ? options_.backoff_ms[slot]
                      : options_.backoff_ms.empty() ? 1000
                                                    : options_.backoff_ms.back();
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    httplib::Result result =
        client.Post(options_.path, headers, payload, "application/json");
    if (!result) {
      last_failure = "transport failure: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status < 200 || result->status >= 300) {
      if (retryable_status(result->status)) {
        last_failure = "status " + std::to_string(result->status);
        continue;
      }
      throw ProtocolError("engine returned status " +
                              std::to_string(result->status) + ": " +
                              result->body.substr(0, 400),
                          result->status);
    }
    json doc;
    try {
      doc = json::parse(result->body);
    } catch (const json::parse_error& e) {
      throw ProtocolError(std::string("unparseable engine response: ") +
                              e.what(),
                          result->status);
    }
    EngineResponse response;
    try {
      response.text =
          doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
      throw ProtocolError(std::string("engine response missing content: ") +
                              e.what(),
                          result->status);
    }
    if (doc.contains("usage")) {
      response.prompt_tokens = doc["usage"].value("prompt_tokens", 0ll);
      response.completion_tokens = doc["usage"].value("completion_tokens", 0ll);
    }
    return response;
  }
  throw TransportError("engine unreachable after " +
                       std::to_string(options_.max_retries + 1) +
                       " attempts; last failure: " + last_failure);
}

}  // namespace metaopt
