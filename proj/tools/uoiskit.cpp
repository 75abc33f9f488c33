#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "uoiskit/cli.hpp"

namespace fs = std::filesystem;
using namespace uoiskit;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<int> count;
  std::string proposer;
  std::string ablation;
  std::string hpg;
  std::string hdnet;
  std::string replay;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "TOML run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Global seed (overrides [run] seed)");
  cmd->add_option("--jobs", c.jobs, "Worker threads for per-scene work")->check(CLI::PositiveNumber);
}

void add_pipeline(CLI::App* cmd, Common& c) {
  cmd->add_option("--proposer", c.proposer, "Mask proposer")->check(CLI::IsMember({"oracle", "replay"}));
  cmd->add_option("--ablation", c.ablation, "Pipeline variant")
      ->check(CLI::IsMember({"none", "no-hdnet", "no-heatmap", "no-foreground"}));
  cmd->add_option("--hpg", c.hpg, "HPG head checkpoint");
  cmd->add_option("--hdnet", c.hdnet, "HDNet checkpoint");
  cmd->add_option("--replay", c.replay, "Recorded proposals for --proposer replay");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.jobs) cfg.jobs = *c.jobs;
  if (c.count) cfg.scene_count = *c.count;
  if (!c.proposer.empty()) cfg.pipeline.proposer = c.proposer;
  if (!c.ablation.empty()) cfg.pipeline.ablation = ablation_from_string(c.ablation);
  if (!c.hpg.empty()) cfg.pipeline.hpg_checkpoint = c.hpg;
  if (!c.hdnet.empty()) cfg.pipeline.hdnet_checkpoint = c.hdnet;
  if (!c.replay.empty()) cfg.pipeline.replay_path = c.replay;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale unseen object instance segmentation toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string data, out, pred, gt, record;
  std::vector<std::string> reports;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  add_common(gen, common);
  gen->add_option("--count", common.count, "Number of scenes (overrides [run] count)")->check(CLI::PositiveNumber);
  gen->add_option("--out", out, "Output dataset directory")->required();

  auto* train_hpg = app.add_subcommand("train-hpg", "Train the heatmap prompt generator head");
  add_common(train_hpg, common);
  train_hpg->add_option("--data", data, "Training dataset directory")->required();
  train_hpg->add_option("--out", out, "Output checkpoint")->required();

  auto* train_hdnet = app.add_subcommand("train-hdnet", "Train the hierarchy discrimination head");
  add_common(train_hdnet, common);
  train_hdnet->add_option("--data", data, "Training dataset directory")->required();
  train_hdnet->add_option("--out", out, "Output checkpoint")->required();

  auto* infer = app.add_subcommand("infer", "Run the pipeline and write a prediction manifest");
  add_common(infer, common);
  add_pipeline(infer, common);
  infer->add_option("--data", data, "Dataset directory")->required();
  infer->add_option("--out", out, "Output prediction manifest")->required();
  infer->add_option("--record", record, "Save the proposals used, for later replay");

  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  add_common(eval, common);
  add_pipeline(eval, common);
  eval->add_option("--pred", pred, "Prediction manifest")->required();
  eval->add_option("--gt", gt, "Ground-truth dataset directory or manifest")->required();
  eval->add_option("--out", out, "Output report")->required();

  auto* report = app.add_subcommand("report", "Print the tables of evaluation reports");
  report->add_option("reports", reports, "Report files")->required()->check(CLI::ExistingFile);
  report->add_option("--out", out, "Also write the table to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      cmd_gen(resolve(common), out);
    } else if (*train_hpg) {
      cmd_train_hpg(resolve(common), data, out);
    } else if (*train_hdnet) {
      cmd_train_hdnet(resolve(common), data, out);
    } else if (*infer) {
      cmd_infer(resolve(common), data, out, record);
    } else if (*eval) {
      cmd_eval(resolve(common), pred, gt, out);
      std::cout << cmd_report({fs::path(out)});
    } else if (*report) {
      std::vector<fs::path> paths(reports.begin(), reports.end());
      const std::string table = cmd_report(paths);
      std::cout << table;
      if (!out.empty()) std::ofstream(out) << table;
    }
  } catch (const Error& e) {
    log_event(LogLevel::Error, "failure", {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}});
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
