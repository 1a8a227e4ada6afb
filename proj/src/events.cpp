#include "metaopt/events.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include "metaopt/errors.hpp"

namespace metaopt {

using nlohmann::ordered_json;

std::string iso8601_now() {
  using namespace std::chrono;
  auto now = system_clock::now();
  std::time_t seconds = system_clock::to_time_t(now);
  auto millis = duration_cast<milliseconds>(now.time_since_epoch()) % 1000;
  std::tm utc{};
  gmtime_r(&seconds, &utc);
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                utc.tm_year + 1900, utc.tm_mon + 1, utc.tm_mday, utc.tm_hour,
                utc.tm_min, utc.tm_sec, static_cast<int>(millis.count()));
  return buffer;
}

EventLog::EventLog(const std::filesystem::path& file) {
  if (!file.empty()) {
    out_.open(file, std::ios::out | std::ios::trunc);
    if (!out_) {
      throw ConfigError("cannot open event log " + file.string());
    }
  }
}

void EventLog::emit(std::string_view event, ordered_json payload) {
  std::lock_guard<std::mutex> guard(mutex_);
  ordered_json record;
  record["seq"] = seq_++;
  record["event"] = std::string(event);
  record["time"] = iso8601_now();
  if (payload.is_object()) {
    for (auto& [key, value] : payload.items()) {
      record[key] = std::move(value);
    }
  }
  if (out_.is_open()) {
    out_ << record.dump() << "\n";
    out_.flush();
  }
  events_.push_back(std::move(record));
}

std::vector<ordered_json> EventLog::of_type(std::string_view event) const {
  std::vector<ordered_json> out;
  for (const ordered_json& record : events_) {
    if (record.at("event").get<std::string>() == event) out.push_back(record);
  }
  return out;
}

std::vector<ordered_json> EventLog::read_file(
    const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open event log " + file.string());
  std::vector<ordered_json> out;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(ordered_json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("malformed event at line " + std::to_string(line_no) +
                           ": " + e.what(),
                       line_no);
    }
  }
  return out;
}

ordered_json EventLog::stable_view(const std::vector<ordered_json>& events) {
  ordered_json out = ordered_json::array();
  for (const ordered_json& record : events) {
    ordered_json copy = record;
    copy.erase("time");
    out.push_back(std::move(copy));
  }
  return out;
}

}  // namespace metaopt
