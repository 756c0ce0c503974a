#pragma once

#include <evikit/refid.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace evikit {

struct NamedArray {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

/// RWT1 weight file: magic, u32-length-prefixed config JSON, then arrays of
/// {u32 name length, name, u32 rank, u32 dims..., f32 data} until end of file.
struct WeightFile {
  nlohmann::json config;
  std::vector<NamedArray> arrays;
};

std::vector<std::uint8_t> encode_rwt1(const WeightFile& file);
WeightFile decode_rwt1(std::span<const std::uint8_t> bytes);

WeightFile weights_from_model(const Refid& model);
/// Rebuilds the model from the embedded config and copies every array in by
/// name; missing, extra or mis-shaped arrays are format errors.
Refid model_from_weights(const WeightFile& file);

void save_weights(const Refid& model, const std::filesystem::path& path);
Refid load_weights(const std::filesystem::path& path);

} // namespace evikit
