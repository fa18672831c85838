#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "acdc/config.hpp"
#include "acdc/harness.hpp"
#include "acdc/log.hpp"
#include "acdc/metrics.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"acdc: goal-conditioned RL with diversity/quality curriculum and contrastive replay"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "runs/run", mode_text, log_level = "info";
  std::uint64_t seed = 0;
  int workers = 0;
  auto* train = app.add_subcommand("train", "run one training job");
  train->add_option("--config", config_path, "key = value config file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = train->add_option("--seed", seed, "overrides the config seed");
  train->add_option("--out", out_dir, "run output directory");
  train->add_option("--mode", mode_text, "acdc | her_uniform | ac_only | ac_d_only | ac_q_only | fixed_lambda(v)");
  train->add_option("--workers", workers, "rollout worker threads");
  train->add_option("--log-level", log_level)->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

  std::string checkpoint;
  int episodes = 100;
  std::uint64_t eval_seed = 12345;
  auto* eval = app.add_subcommand("eval", "evaluate a saved agent");
  eval->add_option("--checkpoint", checkpoint, "checkpoints/epoch_<k> file")->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "evaluation episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "goal seed");

  std::string runs_dir;
  double threshold = 0.9;
  auto* metrics = app.add_subcommand("metrics", "TTT and regret table for run directories");
  metrics->add_option("--runs", runs_dir, "a run directory or a directory of runs")->required()->check(CLI::ExistingDirectory);
  metrics->add_option("--threshold", threshold, "success threshold")->check(CLI::Range(0.0, 1.0));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const std::map<std::string, acdc::LogLevel> levels = {{"debug", acdc::LogLevel::debug},
                                                            {"info", acdc::LogLevel::info},
                                                            {"warn", acdc::LogLevel::warn},
                                                            {"error", acdc::LogLevel::error},
                                                            {"off", acdc::LogLevel::off}};
      acdc::set_log_level(levels.at(log_level));
      auto config = acdc::RunConfig::load(config_path);
      if (*seed_opt) config.seed = seed;
      if (!mode_text.empty()) config.mode = acdc::ModeSpec::parse(mode_text);
      if (workers > 0) config.workers = workers;
      const auto result = acdc::harness::run_training(config, out_dir);
      const auto rates = result.metrics.success_rates();
      std::printf("final success %.3f  TTT(0.9) %s  regret %.3f  wall %.1fs  -> %s\n", rates.back(),
                  acdc::harness::format_ttt(acdc::harness::time_to_threshold(rates, 0.9)).c_str(),
                  acdc::harness::cumulative_regret(rates), result.wall_seconds, out_dir.c_str());
    } else if (*eval) {
      const auto loaded = acdc::harness::load_agent(checkpoint);
      const double rate = acdc::harness::evaluate(loaded.agent, *loaded.env, episodes, eval_seed);
      std::printf("success_rate %s over %d episodes\n", acdc::harness::format_number(rate).c_str(), episodes);
    } else if (*metrics) {
      const auto runs = acdc::harness::summarize_runs(runs_dir, threshold);
      if (runs.empty()) {
        std::cerr << "no metrics.csv found under " << runs_dir << "\n";
        return 1;
      }
      std::cout << acdc::harness::format_summary_table(runs, threshold);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
