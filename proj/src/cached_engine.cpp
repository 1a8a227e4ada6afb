#include "metaopt/cached_engine.hpp"

#include <openssl/evp.h>

#include <fstream>

#include <nlohmann/json.hpp>

namespace metaopt {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0x0f]);
  }
  return out;
}

}  // namespace

std::string cache_key(const std::string& engine_id,
                      const EngineRequest& request) {
  // ordered_json with fixed insertion order gives a canonical encoding.
  ordered_json canonical;
  canonical["engine"] = engine_id;
  canonical["system"] = request.system_text;
  canonical["user"] = request.user_text;
  canonical["temperature"] = request.temperature;
  canonical["max_tokens"] = request.max_tokens;
  canonical["seed"] = request.seed;
  return sha256_hex(canonical.dump());
}

CachedEngine::CachedEngine(Engine& inner, std::filesystem::path dir,
                           bool count_cached_usage)
    : inner_(inner), dir_(std::move(dir)),
      count_cached_usage_(count_cached_usage) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) {
    degraded_ = true;
  }
}

void CachedEngine::warn(const std::string& message) {
  if (warn_) warn_(message);
}

long long CachedEngine::hits() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return hits_;
}

long long CachedEngine::misses() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return misses_;
}

EngineResponse CachedEngine::complete(const EngineRequest& request) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (degraded_ && !warned_) {
      warned_ = true;
      warn("cache store not usable at " + dir_.string() +
           "; continuing uncached");
    }
  }
  const std::string key = cache_key(inner_.id(), request);
  const std::filesystem::path entry_path = dir_ / (key + ".json");

  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!degraded_) {
      std::ifstream in(entry_path);
      if (in) {
        try {
          json doc;
          in >> doc;
          EngineResponse response;
          response.text = doc.at("text").get<std::string>();
          response.cached = true;
          if (count_cached_usage_) {
            response.prompt_tokens = doc.value("prompt_tokens", 0ll);
            response.completion_tokens = doc.value("completion_tokens", 0ll);
          }
          ++hits_;
          return response;
        } catch (const std::exception& e) {
          warn("unreadable cache entry " + entry_path.string() + ": " +
               e.what());
        }
      }
    }
  }

  // Inner call happens outside the lock; a concurrent miss on the same key
  // at worst duplicates one upstream call and rewrites identical content.
  EngineResponse response = inner_.complete(request);

  std::lock_guard<std::mutex> lock(mutex_);
  ++misses_;
  if (!degraded_) {
    ordered_json doc;
    doc["text"] = response.text;
    doc["prompt_tokens"] = response.prompt_tokens;
    doc["completion_tokens"] = response.completion_tokens;
    std::ofstream out(entry_path);
    if (out) {
      out << doc.dump(2) << "\n";
    }
    if (!out) {
      degraded_ = true;
      if (!warned_) {
        warned_ = true;
        warn("cache store not writable at " + dir_.string() +
             "; continuing uncached");
      }
    }
  }
  return response;
}

}  // namespace metaopt
