#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "swarical/metrics.hpp"

namespace swarical::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kUsage = 2 };

struct RunManifest {
  std::string command;
  std::string config_path;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::optional<std::uint64_t> seed;
  std::string version;
  std::string started_at;  // UTC, ISO 8601

  [[nodiscard]] nlohmann::json to_json() const;
};

/// Writes `manifest.json` into `dir`, replacing any earlier one.
void write_manifest(const RunManifest& m, const std::filesystem::path& dir);

std::string version_string();

struct SeriesSummary {
  std::string label;
  double final_hd_mm = 0.0;
  double final_cd_mm2 = 0.0;
  double total_distance_mm = 0.0;
  long moves = 0;
  double steady_hd_mm = 0.0;
  std::optional<double> time_to_threshold_ms;  // first sample with hd <= threshold

  [[nodiscard]] nlohmann::json to_json() const;
};

SeriesSummary summarize_series(const std::string& label, const MetricSeries& series, double hd_threshold_mm);

/// Long format: label column followed by the series columns.
void write_joined_csv(const std::vector<std::pair<std::string, MetricSeries>>& groups, std::ostream& out);

/// Full command line without the program name. Messages go to `out` and `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace swarical::cli
