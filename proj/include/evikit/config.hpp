#pragma once

#include <evikit/quality.hpp>
#include <evikit/refid.hpp>
#include <evikit/simulator.hpp>

#include <json.hpp>

#include <filesystem>

namespace evikit {

struct PhysicalConfig {
  double c = 0.2;
};

struct VoxelConfig {
  int n = 3;
  int exposure_bins = 6;
};

struct TrainConfig {
  std::size_t steps = 500;
  double lr = 1e-3;
};

struct EvalConfig {
  double peak = 1.0;
};

/// Whole-pipeline settings. Every section and field is optional; unknown keys
/// and out-of-range values are rejected with the JSON path of the offender.
struct PipelineConfig {
  SimConfig simulate;
  BlurProtocol blur;
  PhysicalConfig physical;
  VoxelConfig voxel;
  RefidConfig model;
  TrainConfig train;
  EvalConfig eval;
};

PipelineConfig parse_pipeline_config(const nlohmann::json& doc);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

nlohmann::json to_json(const SimConfig& cfg);
nlohmann::json to_json(const RefidConfig& cfg);
RefidConfig refid_config_from_json(const nlohmann::json& doc, const std::string& path = "/model");

} // namespace evikit
