#include "metaopt/report.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "metaopt/errors.hpp"

namespace metaopt {

namespace {

std::string fmt_score(const nlohmann::json& summary, const char* block) {
  if (!summary.contains(block)) return "-";
  const auto& stats = summary.at(block);
  std::ostringstream out;
  out << std::fixed << std::setprecision(4)
      << stats.value("mean", 0.0) << " +/- " << stats.value("std", 0.0);
  return out.str();
}

long long usage_field(const nlohmann::json& usage, const std::string& level,
                      const std::string& field) {
  if (!usage.contains(level)) return 0;
  return usage.at(level).value(field, 0LL);
}

// Minimal fixed-width table printer; first column left-aligned, the rest
// right-aligned.
std::string render_table(const std::string& heading,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) {
      widths[i] = std::max(widths[i], row[i].size());
    }
  }
  std::ostringstream out;
  out << heading << "\n";
  for (const auto& row : rows) {
    out << " ";
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << " ";
      if (i == 0) {
        out << row[i] << std::string(widths[i] - row[i].size(), ' ');
      } else {
        out << std::string(widths[i] - row[i].size(), ' ') << row[i];
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace

RunRecord load_run_record(const std::string& run_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(run_dir);
  const fs::path summary_path = dir / "summary.json";
  const fs::path usage_path = dir / "usage.json";
  if (!fs::exists(summary_path)) {
    throw ConfigError("run directory has no summary.json: " + run_dir);
  }
  if (!fs::exists(usage_path)) {
    throw ConfigError("run directory has no usage.json: " + run_dir);
  }
  RunRecord record;
  record.summary = load_json_file(summary_path.string());
  record.usage = load_json_file(usage_path.string());
  record.label = record.summary.value("label", dir.filename().string());
  if (record.label.empty()) record.label = dir.filename().string();
  return record;
}

std::string report_render(const std::vector<RunRecord>& records,
                          const PriceSection& prices) {
  if (records.empty()) {
    throw ConfigError("report has no runs to render");
  }

  std::vector<std::vector<std::string>> score_rows;
  score_rows.push_back({"run", "val", "test", "seeds"});
  for (const auto& record : records) {
    std::string seeds = "-";
    if (record.summary.contains("seeds")) {
      seeds = std::to_string(record.summary.at("seeds").size());
    }
    score_rows.push_back({record.label, fmt_score(record.summary, "val"),
                          fmt_score(record.summary, "test"), seeds});
  }

  std::vector<std::vector<std::string>> usage_rows;
  usage_rows.push_back(
      {"run", "level", "requests", "prompt", "completion", "total"});
  for (const auto& record : records) {
    bool first = true;
    for (const char* level : {"program", "optimizer", "meta", "total"}) {
      usage_rows.push_back(
          {first ? record.label : "",
           level,
           std::to_string(usage_field(record.usage, level, "requests")),
           std::to_string(usage_field(record.usage, level, "prompt_tokens")),
           std::to_string(usage_field(record.usage, level, "completion_tokens")),
           std::to_string(usage_field(record.usage, level, "total_tokens"))});
      first = false;
    }
  }

  std::vector<std::vector<std::string>> cost_rows;
  cost_rows.push_back({"run", "tokens", "cost_usd", "test_mean"});
  for (const auto& record : records) {
    const double cost =
        usage_field(record.usage, "total", "prompt_tokens") *
            prices.prompt_per_million / 1e6 +
        usage_field(record.usage, "total", "completion_tokens") *
            prices.completion_per_million / 1e6;
    std::ostringstream cost_text;
    cost_text << std::fixed << std::setprecision(4) << cost;
    std::string test_mean = "-";
    if (record.summary.contains("test")) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(4)
        << record.summary.at("test").value("mean", 0.0);
      test_mean = s.str();
    }
    cost_rows.push_back(
        {record.label,
         std::to_string(usage_field(record.usage, "total", "total_tokens")),
         cost_text.str(), test_mean});
  }

  std::ostringstream out;
  out << render_table("Scores (mean +/- population std over seeds)",
                      score_rows)
      << "\n"
      << render_table("Token usage by accounting level", usage_rows) << "\n"
      << render_table("Cost versus final score", cost_rows);
  return out.str();
}

}  // namespace metaopt
