#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace acdc::harness {

// One row per epoch. Columns that a mode does not compute hold NaN.
struct MetricsRow {
  int epoch = 0;
  std::int64_t episodes_seen = 0;
  double success_rate = 0.0;
  double lambda = 0.0;
  double eta = 0.0;
  double mean_F = 0.0;
  double mu_pos_norm = 0.0;
  double mu_neg_norm = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double encoder_loss = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "epoch,episodes_seen,success_rate,lambda,eta,mean_F,mu_pos_norm,mu_neg_norm,actor_loss,"
    "critic_loss,encoder_loss";

struct RunMetrics {
  std::vector<MetricsRow> rows;

  std::vector<double> success_rates() const;
};

// Sum over epochs of (1 - success rate).
double cumulative_regret(std::span<const double> success_rates);

// 1-based index of the first epoch with success >= theta; nullopt if never.
std::optional<int> time_to_threshold(std::span<const double> success_rates, double theta);

// "-" for a threshold that was never reached.
std::string format_ttt(std::optional<int> ttt);

// Shortest round-trip decimal form; NaN prints as "nan".
std::string format_number(double value);

std::string format_metrics_csv(const RunMetrics& metrics);
void write_metrics_csv(const std::filesystem::path& path, const RunMetrics& metrics);
RunMetrics read_metrics_csv(const std::filesystem::path& path);

struct RunSummary {
  std::filesystem::path dir;
  std::string mode;
  std::uint64_t seed = 0;
  int epochs = 0;
  double final_success = 0.0;  // mean of the last min(5, epochs) epochs
  std::optional<int> ttt;
  double regret = 0.0;
};

// Every directory holding a metrics.csv at `root` or one level below it.
std::vector<RunSummary> summarize_runs(const std::filesystem::path& root, double theta);

// Per-run rows, then per-mode medians ordered by median regret (ascending).
std::string format_summary_table(const std::vector<RunSummary>& runs, double theta);

double median(std::vector<double> values);

}  // namespace acdc::harness
