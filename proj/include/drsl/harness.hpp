#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drsl/analysis.hpp"
#include "drsl/config.hpp"

namespace drsl {

// Everything measured for one loss arm, indexed [seed][epoch] or
// [seed][epsilon]. Epoch index 0 is the untrained (freshly initialized)
// model; training epochs are 1..epochs.
struct ArmMetrics {
  LossSpec spec;
  std::string label;

  std::vector<std::vector<double>> train_loss;  // [seed][epoch], epoch >= 1
  std::vector<std::vector<double>> test_acc;    // [seed][epoch 0..E]
  std::vector<std::vector<double>> stoch_mean;  // [seed][epoch 0..E]

  std::vector<std::vector<double>> attack_clean_acc;   // [seed][eps]
  std::vector<std::vector<double>> robust_acc;         // [seed][eps]
  std::vector<std::vector<double>> asr;                // [seed][eps]
  std::vector<std::vector<double>> second_rate;        // [seed][eps]
  std::vector<std::vector<std::uint8_t>> second_empty; // [seed][eps]

  std::vector<std::vector<double>> noise_test_acc;  // [seed][epoch 0..E]

  // analyze-stage payloads (first seed's final model)
  std::vector<std::size_t> stoch_histogram;
  double stoch_hist_max = 0.0;
  std::vector<double> pca_points;       // (N, 2) row-major
  std::vector<std::size_t> pca_classes; // (N)
  std::vector<double> pca_adv_points;   // (M, 2)
  std::vector<double> pca_explained;    // (2)
  double pca_epsilon = 0.0;
};

struct MetricsReport {
  std::string run_id;  // hash of the canonical config; carried by every CSV row
  std::string canonical_config;
  std::vector<double> epsilon_grid;
  std::vector<std::uint64_t> seeds;
  std::size_t epochs = 0;
  double noise_rate = 0.0;
  bool has_attack = false;
  bool has_analyze = false;
  std::vector<ArmMetrics> arms;
  std::vector<std::string> warnings;
};

struct RunOptions {
  bool train = true;   // always required; later stages reuse saved results
  bool attack = true;
  bool analyze = true;
  bool plots = true;
  bool quiet = false;
};

// Runs the experiment described by cfg: per seed and loss arm, init -> train
// with Adam -> freeze -> clean/stochasticity evals -> attack grid ->
// optional noise-retrain arm. Writes metrics.csv, summary.json, checkpoints
// and plots under cfg.output_dir. Re-running an identical config reproduces
// bit-identical outputs.
MetricsReport run_experiment(const ExperimentConfig& cfg);
MetricsReport run_pipeline(const ExperimentConfig& cfg, const RunOptions& opts);

// CSV with the fixed column order:
// run_id, seed, loss_kind, tau, metric, epoch_or_eps, phase, clean_acc,
// robust_acc, asr, stoch_mean, second_argmax_rate, noise_rate.
// Aggregate rows carry seed = "mean" / "std".
std::string metrics_csv(const MetricsReport& report);

void save_report(const MetricsReport& report, const std::string& dir);
MetricsReport load_report(const std::string& dir);
bool report_exists(const std::string& dir);

// Emits the figure-shaped SVG charts; returns the file names written.
// An empty report produces nothing but a warning.
std::vector<std::string> emit_plots(const MetricsReport& report, const std::string& dir);

struct CompareEntry {
  std::string arm_a;
  std::string arm_b;
  double epsilon = 0.0;
  double mean_robust_a = 0.0;
  double mean_robust_b = 0.0;
  double diff = 0.0;  // mean_a - mean_b
  std::size_t wins_a = 0;
  std::size_t wins_b = 0;
  std::size_t ties = 0;
};

struct CompareTable {
  std::vector<CompareEntry> entries;

  std::string to_csv() const;
  std::string to_text() const;
};

// Per-epsilon mean robust-accuracy differences with per-seed sign counts.
// Requires identical epsilon grids, seed sets and arm counts.
CompareTable compare_runs(const MetricsReport& a, const MetricsReport& b);

// Shortest round-trip decimal form, used for every number the harness writes.
std::string format_value(double v);

}  // namespace drsl
