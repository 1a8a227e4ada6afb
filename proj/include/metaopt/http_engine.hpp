#pragma once

#include <string>
#include <vector>

#include "metaopt/engine.hpp"

namespace metaopt {

struct HttpEngineOptions {
  std::string base_url;                // e.g. "https://api.openai.com"
  std::string model;                   // e.g. "gpt-4o-mini"
  std::string api_key;                 // usually from METAOPT_API_KEY
  std::string path = "/v1/chat/completions";
  int max_retries = 3;
  std::vector<int> backoff_ms = {1000, 2000, 4000};
  int timeout_seconds = 120;
};

// Chat-completions client: messages = [system, user], reads
// usage.prompt_tokens / usage.completion_tokens from the response.
// Timeouts, 429, and 5xx are retried with backoff up to max_retries;
// other non-2xx statuses raise ProtocolError immediately.
class HttpEngine : public Engine {
 public:
  explicit HttpEngine(HttpEngineOptions options);

  std::string id() const override;
  EngineResponse complete(const EngineRequest& request) override;

 private:
  HttpEngineOptions options_;
};

}  // namespace metaopt
