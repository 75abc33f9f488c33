#include "uoiskit/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "uoiskit/dataset.hpp"
#include "uoiskit/hdnet.hpp"
#include "uoiskit/parallel.hpp"
#include "uoiskit/rng.hpp"

namespace uoiskit {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Independent seed streams derived from the global seed.
constexpr std::uint64_t kHpgStream = 0x48504721;
constexpr std::uint64_t kHdnetStream = 0x48444e54;
constexpr std::uint64_t kPromptStream = 0x50524f4d;
constexpr std::uint64_t kInferStream = 0x494e4652;

constexpr const char* kReportFormat = "uoiskit-report";

json hpg_section(const RunConfig& c) {
  json j = to_json(c.hpg_train);
  j.erase("seed");
  j["hidden"] = c.hpg_hidden;
  j["pixels_per_image"] = c.pixels_per_image;
  j["fg_weight"] = c.hpg_weights.foreground;
  j["heat_weight"] = c.hpg_weights.heatmap;
  return j;
}

json hdnet_section(const RunConfig& c) {
  json j = to_json(c.hdnet_train);
  j.erase("seed");
  j["hidden"] = c.hdnet_hidden;
  j["prompts_per_scene"] = c.prompts_per_scene;
  j["bg_fraction"] = c.bg_fraction;
  return j;
}

void reject_unknown(const json& given, const json& known, const std::string& where) {
  if (!given.is_object()) fail(ErrorKind::ConfigError, "config section [" + where + "] must be a table");
  for (const auto& [key, value] : given.items()) {
    if (!known.contains(key)) fail(ErrorKind::ConfigError, "unknown config key '" + key + "' in [" + where + "]");
  }
}

json scalar_from_text(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  if (!text.empty()) {
    char* end = nullptr;
    errno = 0;
    const long long i = std::strtoll(text.c_str(), &end, 10);
    if (errno == 0 && *end == '\0') return i;
    errno = 0;
    const double d = std::strtod(text.c_str(), &end);
    if (errno == 0 && *end == '\0') return d;
  }
  return text;
}

TrainConfig seeded(TrainConfig t, std::uint64_t seed, std::uint64_t stream) {
  t.seed = derive_seed(seed, stream);
  return t;
}

void write_training_log(const fs::path& out, const RunConfig& cfg, const TrainResult& r) {
  json history = json::array();
  for (const EpochRecord& e : r.history) {
    history.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  }
  write_json_file({{"config", to_json(cfg)},
                   {"history", std::move(history)},
                   {"best_epoch", r.best_epoch},
                   {"best_val_loss", r.best_val_loss}},
                  fs::path(out.string() + ".log.json"));
}

EpochCallback epoch_logger(std::string_view head) {
  return [head = std::string(head)](const EpochRecord& e) {
    log_event(LogLevel::Info, "epoch",
              {{"head", head}, {"epoch", e.epoch}, {"lr", e.lr}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  };
}

std::unique_ptr<MaskProposer> make_proposer(const RunConfig& cfg) {
  if (cfg.pipeline.proposer == "replay") {
    if (cfg.pipeline.replay_path.empty()) fail(ErrorKind::ConfigError, "replay proposer needs pipeline.replay_path");
    return std::make_unique<ReplayProposer>(cfg.pipeline.replay_path);
  }
  return std::make_unique<OracleProposer>(cfg.oracle);
}

std::vector<std::vector<Detection>> run_pipeline(const RunConfig& cfg, const Dataset& data,
                                                 const MaskProposer& proposer) {
  const PipelineModels models = load_models(cfg.pipeline);
  const Mlp* hdnet = models.hdnet ? &*models.hdnet : nullptr;
  const std::uint64_t seed = derive_seed(cfg.seed, kInferStream);
  std::vector<std::vector<Detection>> out(data.scenes.size());
  parallel_for(data.scenes.size(), cfg.jobs, [&](std::size_t i) {
    out[i] = infer_scene(data.scenes[i], i, models.hpg, hdnet, proposer, cfg.pipeline, derive_seed(seed, i));
  });
  return out;
}

std::vector<InstanceSet> as_instance_sets(const Dataset& data, const std::vector<std::vector<Detection>>& dets) {
  std::vector<InstanceSet> out;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    InstanceSet s{data.scenes[i].size(), {}};
    for (const Detection& d : dets[i]) s.masks.push_back(d.mask);
    out.push_back(std::move(s));
  }
  return out;
}

json report_row(const std::string& label, const MetricsReport& r) { return {{"label", label}, {"metrics", to_json(r)}}; }

Prf prf_from_json(const json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f").get<double>()};
}

}  // namespace

void RunConfig::validate() const {
  if (jobs < 1) fail(ErrorKind::ConfigError, "jobs must be at least 1");
  if (scene_count < 1) fail(ErrorKind::ConfigError, "scene count must be at least 1");
  scene.validate();
  oracle.validate();
  pipeline.validate();
  hpg_train.validate();
  hdnet_train.validate();
  if (hpg_hidden.empty() || std::any_of(hpg_hidden.begin(), hpg_hidden.end(), [](int w) { return w < 1; })) {
    fail(ErrorKind::ConfigError, "hpg.hidden must list positive layer widths");
  }
  if (pixels_per_image < 1) fail(ErrorKind::ConfigError, "hpg.pixels_per_image must be positive");
  if (hdnet_hidden < 1) fail(ErrorKind::ConfigError, "hdnet.hidden must be positive");
  if (prompts_per_scene < 1) fail(ErrorKind::ConfigError, "hdnet.prompts_per_scene must be positive");
  if (bg_fraction < 0.0 || bg_fraction > 1.0) fail(ErrorKind::ConfigError, "hdnet.bg_fraction must lie in [0, 1]");
}

HpgTrainOptions RunConfig::hpg_options() const {
  HpgTrainOptions o;
  o.spec.sigma = pipeline.sigma;
  o.weights = hpg_weights;
  o.pixels_per_image = pixels_per_image;
  o.hidden = hpg_hidden;
  return o;
}

json to_json(const RunConfig& c) {
  return {{"run", {{"seed", c.seed}, {"jobs", c.jobs}, {"count", c.scene_count}}},
          {"scene", to_json(c.scene)},
          {"oracle", to_json(c.oracle)},
          {"pipeline", to_json(c.pipeline)},
          {"hpg", hpg_section(c)},
          {"hdnet", hdnet_section(c)}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  const json defaults = to_json(c);
  reject_unknown(j, defaults, "top level");
  for (const auto& [section, body] : j.items()) reject_unknown(body, defaults.at(section), section);
  try {
    const json run = j.value("run", json::object());
    c.seed = run.value("seed", c.seed);
    c.jobs = run.value("jobs", c.jobs);
    c.scene_count = run.value("count", c.scene_count);

    json scene = defaults.at("scene");
    scene.update(j.value("scene", json::object()));
    c.scene = scene_config_from_json(scene);
    c.oracle = oracle_config_from_json(j.value("oracle", json::object()));
    c.pipeline = pipeline_config_from_json(j.value("pipeline", json::object()));

    const json hpg = j.value("hpg", json::object());
    c.hpg_train = train_config_from_json(hpg);
    if (hpg.contains("hidden")) {
      const json& h = hpg["hidden"];
      c.hpg_hidden = h.is_array() ? h.get<std::vector<int>>() : std::vector<int>{h.get<int>()};
    }
    c.pixels_per_image = hpg.value("pixels_per_image", c.pixels_per_image);
    c.hpg_weights.foreground = hpg.value("fg_weight", c.hpg_weights.foreground);
    c.hpg_weights.heatmap = hpg.value("heat_weight", c.hpg_weights.heatmap);

    const json hdnet = j.value("hdnet", json::object());
    c.hdnet_train = train_config_from_json(hdnet);
    c.hdnet_hidden = hdnet.value("hidden", c.hdnet_hidden);
    c.prompts_per_scene = hdnet.value("prompts_per_scene", c.prompts_per_scene);
    c.bg_fraction = hdnet.value("bg_fraction", c.bg_fraction);
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

json parse_toml(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    fail(ErrorKind::ConfigError, "cannot parse " + origin + ": " + e.what());
  }
  json out = json::object();
  for (const CLI::ConfigItem& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (item.parents.size() > 1) fail(ErrorKind::ConfigError, origin + ": nested table " + item.fullname());
    json* target = &out;
    if (!item.parents.empty()) target = &out[item.parents.front()];
    json value;
    if (item.inputs.size() == 1) {
      value = scalar_from_text(item.inputs.front());
    } else {
      value = json::array();
      for (const std::string& s : item.inputs) value.push_back(scalar_from_text(s));
    }
    (*target)[item.name] = std::move(value);
  }
  return out;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ConfigError, "cannot read config file " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  const json parsed = parse_toml(text.str(), path.string());
  try {
    return run_config_from_json(parsed);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ConfigError) throw;
    std::string what = e.what();
    const std::string prefix = std::string(to_string(ErrorKind::ConfigError)) + ": ";
    if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
    fail(ErrorKind::ConfigError, path.string() + ": " + what);
  }
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::PlacementFailure:
      return 2;
    case ErrorKind::NumericalError:
      return 4;
    default:
      return 3;
  }
}

LogLevel log_level_from_env() {
  const char* v = std::getenv("UOISKIT_LOG");
  if (!v) return LogLevel::Info;
  const std::string s(v);
  if (s == "quiet" || s == "off") return LogLevel::Quiet;
  if (s == "error") return LogLevel::Error;
  if (s == "warn") return LogLevel::Warn;
  if (s == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

void log_event(LogLevel level, std::string_view event, json fields) {
  static const LogLevel threshold = log_level_from_env();
  static std::mutex mutex;
  if (level == LogLevel::Quiet || level > threshold) return;
  static constexpr const char* names[] = {"quiet", "error", "warn", "info", "debug"};
  json line = {{"level", names[static_cast<int>(level)]}, {"event", std::string(event)}};
  line.update(fields);
  std::lock_guard lock(mutex);
  std::cerr << line.dump() << '\n';
}

json cmd_gen(const RunConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  Dataset ds;
  ds.config = to_json(cfg);
  ds.global_seed = cfg.seed;
  ds.scenes = generate_scenes(cfg.scene, cfg.seed, cfg.scene_count, cfg.jobs);
  for (int i = 0; i < cfg.scene_count; ++i) ds.seeds.push_back(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
  const json manifest = write_dataset(ds, out_dir);
  log_event(LogLevel::Info, "gen", {{"scenes", cfg.scene_count}, {"out", out_dir.generic_string()}});
  return manifest;
}

TrainResult cmd_train_hpg(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out) {
  cfg.validate();
  const Dataset data = read_dataset(data_dir);
  const TrainResult r = train_hpg_head(data.scenes, seeded(cfg.hpg_train, cfg.seed, kHpgStream), cfg.hpg_options(),
                                       epoch_logger("hpg"));
  save_checkpoint(r.best, out);
  write_training_log(out, cfg, r);
  log_event(LogLevel::Info, "trained", {{"head", "hpg"}, {"best_epoch", r.best_epoch}, {"best_val_loss", r.best_val_loss}});
  return r;
}

TrainResult cmd_train_hdnet(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out) {
  cfg.validate();
  const Dataset data = read_dataset(data_dir);
  const auto samples = build_training_set(data.scenes, cfg.prompts_per_scene, cfg.bg_fraction, cfg.oracle,
                                          derive_seed(cfg.seed, kPromptStream), cfg.jobs);
  log_event(LogLevel::Info, "samples", {{"head", "hdnet"}, {"count", samples.size()}});
  const TrainResult r =
      train_hdnet(samples, seeded(cfg.hdnet_train, cfg.seed, kHdnetStream), cfg.hdnet_hidden, epoch_logger("hdnet"));
  save_checkpoint(r.best, out);
  write_training_log(out, cfg, r);
  log_event(LogLevel::Info, "trained",
            {{"head", "hdnet"}, {"best_epoch", r.best_epoch}, {"best_val_loss", r.best_val_loss}});
  return r;
}

json cmd_infer(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out, const fs::path& record) {
  cfg.validate();
  const Dataset data = read_dataset(data_dir);
  const std::unique_ptr<MaskProposer> base = make_proposer(cfg);
  std::unique_ptr<RecordingProposer> recorder;
  if (!record.empty()) recorder = std::make_unique<RecordingProposer>(*base);
  const MaskProposer& proposer = recorder ? static_cast<const MaskProposer&>(*recorder) : *base;

  const auto detections = run_pipeline(cfg, data, proposer);
  json scenes = json::array();
  std::size_t total = 0;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const ImageSize size = data.scenes[i].size();
    json masks = json::array();
    for (const Detection& d : detections[i]) masks.push_back(mask_to_json(d.mask));
    total += detections[i].size();
    scenes.push_back({{"index", i},
                      {"size", {{"h", size.h}, {"w", size.w}}},
                      {"instances", std::move(masks)},
                      {"detections", detections_to_json(detections[i])}});
  }
  const json manifest = {{"format", kPredictionFormat},
                         {"version", kManifestVersion},
                         {"config", to_json(cfg)},
                         {"seed", cfg.seed},
                         {"scenes", std::move(scenes)}};
  write_json_file(manifest, out);
  if (recorder) recorder->write(record);
  log_event(LogLevel::Info, "infer", {{"scenes", detections.size()}, {"detections", total}});
  return manifest;
}

json cmd_eval(const RunConfig& cfg, const fs::path& predictions, const fs::path& ground_truth, const fs::path& out) {
  cfg.validate();
  const auto preds = read_instance_sets(predictions);
  const auto gts = read_instance_sets(ground_truth);
  EvalOptions options;
  options.jobs = cfg.jobs;

  const json pred_manifest = read_json_file(fs::is_directory(predictions) ? predictions / "manifest.json" : predictions);
  std::string label = "none";
  if (pred_manifest.contains("config")) {
    label = pred_manifest["config"].value("pipeline", json::object()).value("ablation", label);
  }
  json rows = json::array({report_row(label, evaluate_dataset(preds, gts, options))});

  if (cfg.pipeline.ablation != Ablation::None && std::string(to_string(cfg.pipeline.ablation)) != label) {
    const Dataset data = read_dataset(ground_truth);
    const std::unique_ptr<MaskProposer> proposer = make_proposer(cfg);
    const auto dets = run_pipeline(cfg, data, *proposer);
    rows.push_back(report_row(std::string(to_string(cfg.pipeline.ablation)),
                              evaluate_dataset(as_instance_sets(data, dets), gts, options)));
  }
  const json report = {{"format", kReportFormat}, {"version", kManifestVersion}, {"config", to_json(cfg)},
                       {"rows", rows}};
  write_json_file(report, out);
  log_event(LogLevel::Info, "eval", {{"rows", rows.size()}, {"scenes", gts.size()}});
  return report;
}

std::string cmd_report(const std::vector<fs::path>& reports) {
  std::vector<std::pair<std::string, MetricsReport>> rows;
  for (const fs::path& path : reports) {
    const json doc = read_json_file(path);
    try {
      if (doc.value("format", std::string()) != kReportFormat) {
        fail(ErrorKind::DatasetError, path.string() + " is not an evaluation report");
      }
      for (const json& row : doc.at("rows")) {
        const json& m = row.at("metrics");
        MetricsReport r;
        r.overlap = prf_from_json(m.at("overlap"));
        r.boundary = prf_from_json(m.at("boundary"));
        r.f75 = m.at("f75").get<double>();
        std::string label = row.at("label").get<std::string>();
        if (reports.size() > 1) label = path.stem().string() + ":" + label;
        rows.emplace_back(std::move(label), r);
      }
    } catch (const json::exception& e) {
      fail(ErrorKind::DatasetError, "malformed report " + path.string() + ": " + e.what());
    }
  }
  return format_table(rows);
}

}  // namespace uoiskit
