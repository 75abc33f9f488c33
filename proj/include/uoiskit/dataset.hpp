#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "uoiskit/synthgen.hpp"

namespace uoiskit {

inline constexpr const char* kDatasetFormat = "uoiskit-dataset";
inline constexpr const char* kPredictionFormat = "uoiskit-predictions";
inline constexpr int kManifestVersion = 1;

/// A dataset on disk: `manifest.json` plus one binary PPM per scene.
struct Dataset {
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t global_seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<Scene> scenes;
};

/// Instance masks of one scene, as read from either a dataset or a prediction
/// manifest.
struct InstanceSet {
  ImageSize size;
  std::vector<BinaryMask> masks;
};

nlohmann::json mask_to_json(const BinaryMask& mask);
/// Throws DatasetError on a malformed record, CorruptMask on a bad run sum.
BinaryMask mask_from_json(const nlohmann::json& record);

nlohmann::json to_json(const SceneConfig& config);
SceneConfig scene_config_from_json(const nlohmann::json& j);

void write_ppm(const RgbImage& image, const std::filesystem::path& path);
RgbImage read_ppm(const std::filesystem::path& path);

/// Writes `manifest.json` and `scene_<idx>.ppm` files into dir (created if
/// missing). Returns the manifest that was written.
nlohmann::json write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// Reads per-scene instance masks from a dataset directory, a dataset manifest
/// or a prediction manifest.
std::vector<InstanceSet> read_instance_sets(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes JSON with a trailing newline; output is byte-stable for equal input.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path, int indent = 1);

}  // namespace uoiskit
