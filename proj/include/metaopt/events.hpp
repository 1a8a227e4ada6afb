#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace metaopt {

// Append-only event stream: one JSON object per line, strictly ordered by
// `seq`. Events are kept in memory and, when a file path is given,
// mirrored to disk as they are emitted. Two streams of the same run are
// comparable after stripping the `time` field.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(const std::filesystem::path& file);

  void emit(std::string_view event, nlohmann::ordered_json payload = {});

  const std::vector<nlohmann::ordered_json>& events() const { return events_; }

  std::vector<nlohmann::ordered_json> of_type(std::string_view event) const;

  static std::vector<nlohmann::ordered_json> read_file(
      const std::filesystem::path& file);

  // Drops volatile fields (`time`) so logs from reruns compare equal.
  static nlohmann::ordered_json stable_view(
      const std::vector<nlohmann::ordered_json>& events);

 private:
  mutable std::mutex mutex_;  // emit may be reached from worker threads
  std::vector<nlohmann::ordered_json> events_;
  std::ofstream out_;
  long long seq_ = 0;
};

std::string iso8601_now();

}  // namespace metaopt
