#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "uoiskit/error.hpp"
#include "uoiskit/hpghead.hpp"
#include "uoiskit/metrics.hpp"
#include "uoiskit/pipeline.hpp"
#include "uoiskit/proposer.hpp"
#include "uoiskit/synthgen.hpp"
#include "uoiskit/tinynn.hpp"

namespace uoiskit {

/// Everything a run needs, resolved from a config file plus flag overrides.
/// Config files are TOML with the sections [run], [scene], [oracle],
/// [pipeline], [hpg] and [hdnet]; keys match the JSON field names.
struct RunConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  int scene_count = 100;
  SceneConfig scene;
  OracleConfig oracle;
  PipelineConfig pipeline;

  TrainConfig hpg_train;
  std::vector<int> hpg_hidden{256, 256};
  int pixels_per_image = 4096;
  HpgLossWeights hpg_weights;

  TrainConfig hdnet_train;
  int hdnet_hidden = 256;
  int prompts_per_scene = 30;
  double bg_fraction = 1.0 / 3.0;

  void validate() const;
  HpgTrainOptions hpg_options() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown sections or keys raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Reads a TOML config file. A missing or malformed file raises ConfigError
/// naming the path.
RunConfig load_run_config(const std::filesystem::path& path);
/// Parses TOML text into {section: {key: value}}.
nlohmann::json parse_toml(const std::string& text, const std::string& origin);

/// Exit status for a library error: 2 config, 3 data, 4 numerical.
int exit_code(ErrorKind kind) noexcept;

enum class LogLevel { Quiet = 0, Error = 1, Warn = 2, Info = 3, Debug = 4 };
/// Level from UOISKIT_LOG (quiet, error, warn, info, debug); info when unset.
LogLevel log_level_from_env();
/// Writes one JSON object per line to stderr when `level` is enabled.
void log_event(LogLevel level, std::string_view event, nlohmann::json fields = nlohmann::json::object());

/// Generates scene_count scenes and writes the dataset; the manifest echoes the
/// resolved config.
nlohmann::json cmd_gen(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Trains a head on the dataset, writes the checkpoint at the best validation
/// epoch and a training log next to it (`<out>.log.json`).
TrainResult cmd_train_hpg(const RunConfig& cfg, const std::filesystem::path& data_dir,
                          const std::filesystem::path& out);
TrainResult cmd_train_hdnet(const RunConfig& cfg, const std::filesystem::path& data_dir,
                            const std::filesystem::path& out);

/// Runs the configured pipeline variant on every scene and writes a
/// prediction manifest. When `record` is set, the proposals used are saved
/// there for later replay.
nlohmann::json cmd_infer(const RunConfig& cfg, const std::filesystem::path& data_dir, const std::filesystem::path& out,
                         const std::filesystem::path& record = {});

/// Scores a prediction manifest against ground truth and writes the report.
/// With an ablation other than none, that variant is also run on the
/// ground-truth dataset and reported as a second row.
nlohmann::json cmd_eval(const RunConfig& cfg, const std::filesystem::path& predictions,
                        const std::filesystem::path& ground_truth, const std::filesystem::path& out);

/// Table of every row of one or more report files.
std::string cmd_report(const std::vector<std::filesystem::path>& reports);

}  // namespace uoiskit
