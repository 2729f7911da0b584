#pragma once

#include <string>
#include <vector>

#include "hmimo/simulate.hpp"

namespace hmimo {

// Shortest decimal text that round-trips; "nan", "inf" and "-inf" otherwise.
std::string format_number(double v);

// Header plus one row per cell, columns in the fixed schema order.
std::string metrics_csv(const std::vector<MetricsRecord>& metrics);

// One row per (cell, trial, target).
std::string trials_csv(const std::vector<TrialResult>& trials);

struct RunManifest {
  std::string config_path;
  std::string resolved_config;  // JSON text from config_to_json
  std::string output_dir;
  std::string tool_version;
  double wall_seconds = 0.0;
  bool verbose = false;
};

std::string manifest_json(const RunManifest& manifest, const SimConfig& config);

// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

// Renders every artifact first, then writes metrics.csv, manifest.json and
// (when verbose) trials.csv into `dir`, creating it if needed.
void write_outputs(const std::string& dir, const ExperimentResult& result,
                   const RunManifest& manifest, const SimConfig& config);

}  // namespace hmimo
