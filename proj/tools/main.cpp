#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "drsl/data.hpp"
#include "drsl/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string output_dir;
  long long seed_override = -1;
  bool full_data = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")->required();
  cmd->add_option("--output", args.output_dir, "output directory (overrides output.dir)");
  cmd->add_option("--seed-override", args.seed_override, "run a single seed instead of the list");
  cmd->add_flag("--full-data", args.full_data, "ignore data.subset_size and use the full dataset");
  cmd->add_flag("--quiet", args.quiet, "suppress progress logging");
}

drsl::ExperimentConfig load_config(const CommonArgs& args) {
  drsl::ExperimentConfig cfg = drsl::parse_config_file(args.config_path);
  if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
  if (args.seed_override >= 0) cfg.seeds = {static_cast<std::uint64_t>(args.seed_override)};
  if (args.full_data) {
    cfg.subset_size = 0;
    cfg.test_subset_size = 0;
  }
  cfg.validate(/*check_files=*/true);
  return cfg;
}

int run_stage(const CommonArgs& args, const drsl::RunOptions& opts) {
  drsl::ExperimentConfig cfg;
  try {
    cfg = load_config(args);
  } catch (const drsl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  try {
    drsl::RunOptions run_opts = opts;
    run_opts.quiet = args.quiet;
    const drsl::MetricsReport report = drsl::run_pipeline(cfg, run_opts);
    std::printf("run %s: %zu arm(s), %zu seed(s); outputs in %s\n", report.run_id.c_str(),
                report.arms.size(), report.seeds.size(), cfg.output_dir.c_str());
    return 0;
  } catch (const drsl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DRSL robustness laboratory"};
  app.require_subcommand(1);

  CommonArgs train_args, attack_args, analyze_args, plot_args, run_args;
  auto* cmd_train = app.add_subcommand("train", "train models and record per-epoch metrics");
  add_common(cmd_train, train_args);
  auto* cmd_attack = app.add_subcommand("attack", "evaluate the attack grid on trained models");
  add_common(cmd_attack, attack_args);
  auto* cmd_analyze =
      app.add_subcommand("analyze", "stochasticity histogram and softmax PCA projections");
  add_common(cmd_analyze, analyze_args);
  auto* cmd_plot = app.add_subcommand("plot", "emit SVG charts from a finished run");
  add_common(cmd_plot, plot_args);
  auto* cmd_run = app.add_subcommand("run", "full pipeline: train, attack, analyze, plot");
  add_common(cmd_run, run_args);

  std::string cmp_a, cmp_b, cmp_out, cmp_config;
  auto* cmd_compare = app.add_subcommand("compare", "robust-accuracy table for two finished runs");
  cmd_compare->add_option("--run-a", cmp_a, "output directory of the first run")->required();
  cmd_compare->add_option("--run-b", cmp_b, "output directory of the second run")->required();
  cmd_compare->add_option("--output", cmp_out, "directory to write comparison.csv into");
  cmd_compare->add_option("--config", cmp_config, "config file (accepted for symmetry; unused)");

  std::string gen_out = "data/synthetic";
  std::string gen_dataset = "mnist";
  std::size_t gen_train = 10000, gen_test = 2000;
  std::uint64_t gen_seed = 0;
  auto* cmd_datagen =
      app.add_subcommand("datagen", "generate synthetic datasets in the official file formats");
  cmd_datagen->add_option("--out", gen_out, "destination directory");
  cmd_datagen->add_option("--dataset", gen_dataset, "mnist or cifar10")
      ->check(CLI::IsMember({"mnist", "cifar10"}));
  cmd_datagen->add_option("--train-n", gen_train, "training examples");
  cmd_datagen->add_option("--test-n", gen_test, "test examples");
  cmd_datagen->add_option("--seed", gen_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (cmd_train->parsed()) {
    return run_stage(train_args, {.train = true, .attack = false, .analyze = false, .plots = false});
  }
  if (cmd_attack->parsed()) {
    return run_stage(attack_args, {.train = true, .attack = true, .analyze = false, .plots = false});
  }
  if (cmd_analyze->parsed()) {
    return run_stage(analyze_args,
                     {.train = true, .attack = false, .analyze = true, .plots = false});
  }
  if (cmd_run->parsed()) {
    return run_stage(run_args, {.train = true, .attack = true, .analyze = true, .plots = true});
  }
  if (cmd_plot->parsed()) {
    drsl::ExperimentConfig cfg;
    try {
      cfg = load_config(plot_args);
    } catch (const drsl::ConfigError& e) {
      std::fprintf(stderr, "config error: %s\n", e.what());
      return 2;
    }
    try {
      if (!drsl::report_exists(cfg.output_dir)) {
        std::fprintf(stderr, "error: no summary.json under %s; run the pipeline first\n",
                     cfg.output_dir.c_str());
        return 3;
      }
      const drsl::MetricsReport report = drsl::load_report(cfg.output_dir);
      const auto files = drsl::emit_plots(report, cfg.output_dir);
      for (const std::string& f : files) std::printf("wrote %s\n", f.c_str());
      return 0;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 3;
    }
  }
  if (cmd_compare->parsed()) {
    try {
      const drsl::MetricsReport a = drsl::load_report(cmp_a);
      const drsl::MetricsReport b = drsl::load_report(cmp_b);
      const drsl::CompareTable table = drsl::compare_runs(a, b);
      std::printf("%s", table.to_text().c_str());
      if (!cmp_out.empty()) {
        fs::create_directories(cmp_out);
        std::ofstream os(fs::path(cmp_out) / "comparison.csv");
        os << table.to_csv();
        std::printf("wrote %s/comparison.csv\n", cmp_out.c_str());
      }
      return 0;
    } catch (const drsl::ValueError& e) {
      std::fprintf(stderr, "comparison error: %s\n", e.what());
      return 2;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 3;
    }
  }
  if (cmd_datagen->parsed()) {
    try {
      if (gen_dataset == "mnist") {
        drsl::generate_synthetic_mnist_files(gen_out, gen_train, gen_test, gen_seed);
      } else {
        drsl::generate_synthetic_cifar10_files(gen_out, gen_train, gen_test, gen_seed);
      }
      std::printf("wrote synthetic %s (%zu train / %zu test) under %s\n", gen_dataset.c_str(),
                  gen_train, gen_test, gen_out.c_str());
      return 0;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 3;
    }
  }
  return 2;
}
