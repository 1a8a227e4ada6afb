#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "metaopt/engine.hpp"

namespace metaopt::testing {

// Engine that captures every request and answers via a caller-supplied
// function (defaults to echoing the user text). Lets tests assert on the
// exact request stream without transcripts.
class RecordingEngine : public Engine {
 public:
  using Responder = std::function<std::string(const EngineRequest&)>;

  RecordingEngine() = default;
  explicit RecordingEngine(Responder responder)
      : responder_(std::move(responder)) {}

  std::string id() const override { return "recording"; }

  EngineResponse complete(const EngineRequest& request) override {
    std::lock_guard<std::mutex> guard(mutex_);
    requests_.push_back(request);
    EngineResponse response;
    response.text = responder_ ? responder_(request) : request.user_text;
    response.prompt_tokens =
        estimate_tokens(request.system_text) + estimate_tokens(request.user_text);
    response.completion_tokens = estimate_tokens(response.text);
    return response;
  }

  const std::vector<EngineRequest>& requests() const { return requests_; }

 private:
  Responder responder_;
  mutable std::mutex mutex_;
  std::vector<EngineRequest> requests_;
};

// Unique scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("metaopt-test-" + std::to_string(rd()) + "-" +
            std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace metaopt::testing
