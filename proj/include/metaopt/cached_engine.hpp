#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <string>

#include "metaopt/engine.hpp"

namespace metaopt {

// Hex SHA-256 of the canonical encoding of (engine id, system_text,
// user_text, temperature, max_tokens, seed). Identical canonical requests
// always map to the same key.
std::string cache_key(const std::string& engine_id,
                      const EngineRequest& request);

// Directory-backed response cache in front of another engine. A hit
// returns the stored response with cached=true and issues no inner call;
// a miss delegates and stores. Store I/O failure degrades to uncached
// operation and reports through the warning hook instead of failing the
// run.
class CachedEngine : public Engine {
 public:
  CachedEngine(Engine& inner, std::filesystem::path dir,
               bool count_cached_usage = true);

  std::string id() const override { return inner_.id(); }
  EngineResponse complete(const EngineRequest& request) override;

  long long hits() const;
  long long misses() const;

  void set_warning_hook(std::function<void(const std::string&)> hook) {
    warn_ = std::move(hook);
  }

 private:
  Engine& inner_;
  std::filesystem::path dir_;
  bool count_cached_usage_;
  mutable std::mutex mutex_;  // serializes store I/O and counters
  bool warned_ = false;  // one warning per engine, however it degrades
  long long hits_ = 0;
  long long misses_ = 0;
  bool degraded_ = false;
  std::function<void(const std::string&)> warn_;

  void warn(const std::string& message);
};

}  // namespace metaopt
