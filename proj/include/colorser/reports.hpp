#pragma once

// CSV + JSON plot data and metric tables for experiment runs and label stats.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "colorser/experiment.hpp"
#include "colorser/labels.hpp"

namespace colorser::reports {

/// Agreement summary plus per-emotion hue histogram and S/V quartiles.
nlohmann::json stats_to_json(std::span<const AggregatedLabel> aggregates, std::span<const UtteranceMeta> metas);

/// hue_histogram.{csv,json} and sv_distribution.{csv,json}.
std::vector<std::filesystem::path> write_label_stats(std::span<const AggregatedLabel> aggregates,
                                                     std::span<const UtteranceMeta> metas,
                                                     const std::filesystem::path& out_dir);

/// Metric table with one line per setting and aggregation mode. Empty cells are "-".
std::string metrics_csv(const experiment::RunReport& report);
std::string confusion_csv(const experiment::RunReport& report);
/// attribute is "hue", "saturation" or "value".
std::string scatter_csv(const experiment::RunReport& report, std::string_view attribute);

/// report.json, metrics, confusion, scatter files and the label stats.
/// Throws IoError when out_dir cannot be created or written.
std::vector<std::filesystem::path> emit_reports(const experiment::RunReport& report,
                                                std::span<const AggregatedLabel> aggregates,
                                                std::span<const UtteranceMeta> metas,
                                                const std::filesystem::path& out_dir);

/// Byte-stable serialization used for every JSON file we write.
std::string dump(const nlohmann::json& j);

}  // namespace colorser::reports
