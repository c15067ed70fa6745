#include "drsl/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "drsl/optim.hpp"
#include "drsl/rng.hpp"
#include "drsl/svg.hpp"

namespace drsl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_value(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw FormatError("cannot write " + tmp.string());
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  fs::rename(tmp, path);
}

std::string arm_dir_name(std::size_t index, const LossSpec& spec) {
  std::string kind = to_string(spec.kind);
  std::transform(kind.begin(), kind.end(), kind.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  std::string name = "arm" + std::to_string(index) + "_" + kind;
  if (spec.kind == LossKind::DRSL) {
    name += "_tau" + format_value(spec.tau) + "_" + to_string(spec.metric);
  }
  return name;
}

fs::path checkpoint_path(const ExperimentConfig& cfg, std::size_t arm_index,
                         const LossSpec& spec, std::uint64_t seed, bool noise_arm) {
  return fs::path(cfg.output_dir) / "checkpoints" / arm_dir_name(arm_index, spec) /
         ("seed" + std::to_string(seed) + (noise_arm ? "_noise" : "") + ".drsl");
}

struct TrainedModel {
  Model model;
  std::vector<double> train_loss;  // per epoch 1..E
  std::vector<double> test_acc;    // epoch 0..E
  std::vector<double> stoch;       // epoch 0..E
};

// One training run: He-init at `seed`, Adam with the config hyperparameters,
// identical batch order across arms (the shuffle stream ignores the arm).
TrainedModel train_model(const ExperimentConfig& cfg, const LossSpec& spec,
                         const Dataset& train, const Dataset& test, std::uint64_t seed,
                         bool record_curves) {
  Model model(cfg.model, seed);
  AdamState adam(model.parameters(), AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps});

  TrainedModel out{std::move(model), {}, {}, {}};
  if (record_curves) {
    out.test_acc.push_back(accuracy(out.model, test));
    out.stoch.push_back(stochasticity(out.model, test, cfg.metric).mean);
  }
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    BatchIter iter(train, cfg.batch_size, seed, epoch);
    BatchIter::Batch batch;
    double loss_sum = 0.0;
    while (iter.next(batch)) {
      out.model.zero_grad();
      Tape tape;
      Tensor logits = out.model.forward(&tape, batch.images);
      Tensor loss = loss_forward(&tape, spec, logits, batch.labels);
      tape.backward(loss);
      adam_step(out.model.parameters(), adam);
      loss_sum += loss.item() * static_cast<double>(batch.labels.size());
    }
    if (record_curves) {
      out.train_loss.push_back(loss_sum / static_cast<double>(train.size()));
      out.test_acc.push_back(accuracy(out.model, test));
      out.stoch.push_back(stochasticity(out.model, test, cfg.metric).mean);
    }
  }
  out.model.freeze();
  return out;
}

Dataset load_train(const ExperimentConfig& cfg) {
  Dataset ds = load_dataset(cfg.data_name, cfg.data_dir, Split::Train);
  return ds.subset(cfg.subset_size);
}

Dataset load_test(const ExperimentConfig& cfg) {
  Dataset ds = load_dataset(cfg.data_name, cfg.data_dir, Split::Test);
  return ds.subset(cfg.test_subset_size);
}

void log_line(const RunOptions& opts, const std::string& msg) {
  if (!opts.quiet) std::fprintf(stderr, "[drsl-lab] %s\n", msg.c_str());
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  return std::sqrt(var / static_cast<double>(v.size()));
}

}  // namespace

MetricsReport run_pipeline(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate(/*check_files=*/true);
  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);
  const fs::path marker = out_dir / ".partial";
  {
    std::ofstream m(marker);
    m << "run in progress\n";
  }

  const std::vector<LossSpec> arms = cfg.arms();
  MetricsReport report;

  // Reuse a finished training stage when this exact config already ran.
  bool reuse = false;
  if (report_exists(cfg.output_dir)) {
    try {
      MetricsReport prior = load_report(cfg.output_dir);
      if (prior.canonical_config == cfg.canonical_text()) {
        bool checkpoints_ok = true;
        for (std::size_t ai = 0; ai < arms.size() && checkpoints_ok; ++ai) {
          for (std::uint64_t seed : cfg.seeds) {
            if (!fs::exists(checkpoint_path(cfg, ai, arms[ai], seed, false))) {
              checkpoints_ok = false;
              break;
            }
          }
        }
        if (checkpoints_ok) {
          report = std::move(prior);
          reuse = true;
        }
      }
    } catch (const Error&) {
      reuse = false;  // unreadable summary: recompute from scratch
    }
  }

  if (!reuse) {
    report = MetricsReport{};
    report.run_id = cfg.config_hash();
    report.canonical_config = cfg.canonical_text();
    report.epsilon_grid = cfg.epsilon_grid;
    report.seeds = cfg.seeds;
    report.epochs = cfg.epochs;
    report.noise_rate = cfg.noise_rate;
    report.arms.resize(arms.size());
  }

  const Dataset train = load_train(cfg);
  const Dataset test = load_test(cfg);
  const Dataset attack_set = test.subset(cfg.attack_subset_size);

  // ---- training stage -------------------------------------------------------
  if (!reuse) {
    for (std::size_t ai = 0; ai < arms.size(); ++ai) {
      ArmMetrics& arm = report.arms[ai];
      arm.spec = arms[ai];
      arm.label = arms[ai].label();
      for (std::uint64_t seed : cfg.seeds) {
        log_line(opts, "train " + arm.label + " seed " + std::to_string(seed));
        TrainedModel tm = train_model(cfg, arms[ai], train, test, seed, true);
        arm.train_loss.push_back(std::move(tm.train_loss));
        arm.test_acc.push_back(std::move(tm.test_acc));
        arm.stoch_mean.push_back(std::move(tm.stoch));
        const fs::path ckpt = checkpoint_path(cfg, ai, arms[ai], seed, false);
        fs::create_directories(ckpt.parent_path());
        tm.model.save_checkpoint(ckpt.string());

        if (cfg.noise_rate > 0.0 && cfg.epochs > 0) {
          NoiseSpec noise{cfg.noise_rate, mix_seed(cfg.noise_seed, seed)};
          auto [noisy, flipped] = inject_label_noise(train, noise);
          log_line(opts, "noise-train " + arm.label + " seed " + std::to_string(seed) +
                             " (flipped " + std::to_string(flipped.size()) + ")");
          TrainedModel nm = train_model(cfg, arms[ai], noisy, test, seed, true);
          arm.noise_test_acc.push_back(std::move(nm.test_acc));
          nm.model.save_checkpoint(checkpoint_path(cfg, ai, arms[ai], seed, true).string());
        }
      }
    }

    // Matched-accuracy protocol: equal epochs, post-hoc deviation check.
    if (arms.size() > 1 && cfg.epochs > 0) {
      std::vector<double> finals;
      for (const ArmMetrics& arm : report.arms) {
        std::vector<double> last;
        for (const auto& curve : arm.test_acc) last.push_back(curve.back());
        finals.push_back(mean_of(last));
      }
      const auto [lo, hi] = std::minmax_element(finals.begin(), finals.end());
      if (*hi - *lo > 0.005) {
        report.warnings.push_back(
            "clean accuracy deviation between loss arms exceeds 0.5%: " + format_value(*hi - *lo));
      }
    }
  }

  // ---- attack stage ----------------------------------------------------------
  if (opts.attack && cfg.epochs > 0 && !report.has_attack) {
    for (std::size_t ai = 0; ai < arms.size(); ++ai) {
      ArmMetrics& arm = report.arms[ai];
      for (std::uint64_t seed : cfg.seeds) {
        log_line(opts, "attack " + arm.label + " seed " + std::to_string(seed));
        const Model model =
            Model::load_checkpoint(checkpoint_path(cfg, ai, arms[ai], seed, false).string());
        std::vector<double> clean_row, robust_row, asr_row, second_row;
        std::vector<std::uint8_t> empty_row;
        for (double eps : cfg.epsilon_grid) {
          const AttackAnalysis eval =
              evaluate_attack(model, attack_set, cfg.attack_at(eps, arms[ai]));
          if (eval.robust_accuracy !=
              eval.clean_accuracy * (1.0 - eval.attack_success_rate)) {
            throw NumericError("robust_accuracy identity violated");  // by construction
          }
          clean_row.push_back(eval.clean_accuracy);
          robust_row.push_back(eval.robust_accuracy);
          asr_row.push_back(eval.attack_success_rate);
          second_row.push_back(eval.second_argmax.overall_rate);
          empty_row.push_back(eval.second_argmax.empty_denominator ? 1 : 0);
          if (eval.asr_denominator_empty) {
            report.warnings.push_back("attack at eps=" + format_value(eps) + " on " + arm.label +
                                      ": no clean-correct examples; ASR reported as 0");
          }
        }
        arm.attack_clean_acc.push_back(std::move(clean_row));
        arm.robust_acc.push_back(std::move(robust_row));
        arm.asr.push_back(std::move(asr_row));
        arm.second_rate.push_back(std::move(second_row));
        arm.second_empty.push_back(std::move(empty_row));

        if (cfg.attack_dump_adv && !cfg.epsilon_grid.empty()) {
          const Dataset dump_set = attack_set.subset(std::min<std::size_t>(256, attack_set.size()));
          std::vector<std::size_t> all(dump_set.size());
          for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
          const AdvBatch adv =
              run_attack(model, gather_images(dump_set, all), dump_set.labels,
                         cfg.attack_at(cfg.epsilon_grid.back(), arms[ai]));
          const fs::path dir = out_dir / "adv" / arm_dir_name(ai, arms[ai]);
          fs::create_directories(dir);
          save_adv_batch(adv, (dir / ("seed" + std::to_string(seed) + ".advb")).string());
        }
      }
    }
    report.has_attack = true;
  }

  // ---- analyze stage ----------------------------------------------------------
  if (opts.analyze && cfg.epochs > 0 && !report.has_analyze) {
    const std::size_t pca_count = std::min<std::size_t>(attack_set.size(), 400);
    const Dataset pca_set = attack_set.subset(pca_count);
    for (std::size_t ai = 0; ai < arms.size(); ++ai) {
      ArmMetrics& arm = report.arms[ai];
      log_line(opts, "analyze " + arm.label);
      const Model model = Model::load_checkpoint(
          checkpoint_path(cfg, ai, arms[ai], cfg.seeds.front(), false).string());

      const StochasticityReport stoch = stochasticity(model, test, cfg.metric);
      arm.stoch_histogram = stoch.histogram;
      arm.stoch_hist_max = stoch.max_possible;

      // Softmax clouds in 2-D: clean points plus adversarial points at a
      // mid-grid epsilon, projected with the clean-fit components.
      const double pca_eps = cfg.epsilon_grid[cfg.epsilon_grid.size() / 2];
      arm.pca_epsilon = pca_eps;
      const Tensor clean_probs = softmax_matrix(model, pca_set);
      const PcaModel pca = pca_fit(clean_probs, 2);
      const Tensor clean_scores = pca_transform(pca, clean_probs);
      const AttackAnalysis eval = evaluate_attack(model, pca_set, cfg.attack_at(pca_eps, arms[ai]));
      const Tensor adv_scores = pca_transform(pca, eval.adversarial_softmax);
      arm.pca_points.assign(clean_scores.values().begin(), clean_scores.values().end());
      arm.pca_classes = pca_set.labels;
      arm.pca_adv_points.assign(adv_scores.values().begin(), adv_scores.values().end());
      arm.pca_explained = pca.explained_variance_ratio;
    }
    report.has_analyze = true;
  }

  save_report(report, cfg.output_dir);
  if (opts.plots) emit_plots(report, cfg.output_dir);
  for (const std::string& w : report.warnings) log_line(opts, "WARNING: " + w);
  fs::remove(marker);
  return report;
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  return run_pipeline(cfg, RunOptions{});
}

// ---- CSV ------------------------------------------------------------------------

namespace {

struct CsvRow {
  std::string seed, loss_kind, tau, metric, epoch_or_eps, phase;
  std::optional<double> clean_acc, robust_acc, asr, stoch_mean, second_rate;
  double noise_rate = 0.0;
};

void append_row(std::string& out, const std::string& run_id, const CsvRow& row) {
  auto opt = [](const std::optional<double>& v) { return v ? format_value(*v) : std::string(); };
  out += run_id;
  out += ',' + row.seed + ',' + row.loss_kind + ',' + row.tau + ',' + row.metric;
  out += ',' + row.epoch_or_eps + ',' + row.phase;
  out += ',' + opt(row.clean_acc) + ',' + opt(row.robust_acc) + ',' + opt(row.asr);
  out += ',' + opt(row.stoch_mean) + ',' + opt(row.second_rate);
  out += ',' + format_value(row.noise_rate);
  out += '\n';
}

// Collects one column across seeds, then appends per-seed rows plus
// mean/std aggregate rows.
template <typename Fill>
void emit_group(std::string& out, const MetricsReport& report, const ArmMetrics& arm,
                const std::string& phase, const std::string& index_label, double noise_rate,
                Fill fill) {
  CsvRow base;
  base.loss_kind = to_string(arm.spec.kind);
  base.tau = format_value(arm.spec.kind == LossKind::DRSL ? arm.spec.tau : 0.0);
  base.metric = arm.spec.kind == LossKind::DRSL ? to_string(arm.spec.metric) : "";
  base.phase = phase;
  base.epoch_or_eps = index_label;
  base.noise_rate = noise_rate;

  struct Agg {
    std::vector<double> clean, robust, asr, stoch, second;
  } agg;
  for (std::size_t si = 0; si < report.seeds.size(); ++si) {
    CsvRow row = base;
    row.seed = std::to_string(report.seeds[si]);
    fill(si, row);
    if (row.clean_acc) agg.clean.push_back(*row.clean_acc);
    if (row.robust_acc) agg.robust.push_back(*row.robust_acc);
    if (row.asr) agg.asr.push_back(*row.asr);
    if (row.stoch_mean) agg.stoch.push_back(*row.stoch_mean);
    if (row.second_rate) agg.second.push_back(*row.second_rate);
    append_row(out, report.run_id, row);
  }
  auto agg_row = [&](const std::string& name, double (*f)(const std::vector<double>&)) {
    CsvRow row = base;
    row.seed = name;
    if (!agg.clean.empty()) row.clean_acc = f(agg.clean);
    if (!agg.robust.empty()) row.robust_acc = f(agg.robust);
    if (!agg.asr.empty()) row.asr = f(agg.asr);
    if (!agg.stoch.empty()) row.stoch_mean = f(agg.stoch);
    if (!agg.second.empty()) row.second_rate = f(agg.second);
    row.noise_rate = base.noise_rate;
    append_row(out, report.run_id, row);
  };
  if (report.seeds.size() > 1) {
    agg_row("mean", [](const std::vector<double>& v) { return mean_of(v); });
    agg_row("std", [](const std::vector<double>& v) { return std_of(v); });
  }
}

}  // namespace

std::string metrics_csv(const MetricsReport& report) {
  std::string out =
      "run_id,seed,loss_kind,tau,metric,epoch_or_eps,phase,clean_acc,robust_acc,asr,"
      "stoch_mean,second_argmax_rate,noise_rate\n";
  for (const ArmMetrics& arm : report.arms) {
    for (std::size_t e = 0; e <= report.epochs; ++e) {
      emit_group(out, report, arm, "epoch", std::to_string(e), 0.0,
                 [&](std::size_t si, CsvRow& row) {
        if (si < arm.test_acc.size() && e < arm.test_acc[si].size()) {
          row.clean_acc = arm.test_acc[si][e];
          row.stoch_mean = arm.stoch_mean[si][e];
        }
      });
    }
    if (report.has_attack) {
      for (std::size_t ei = 0; ei < report.epsilon_grid.size(); ++ei) {
        emit_group(out, report, arm, "attack", format_value(report.epsilon_grid[ei]), 0.0,
                   [&](std::size_t si, CsvRow& row) {
                     if (si < arm.robust_acc.size() && ei < arm.robust_acc[si].size()) {
                       row.clean_acc = arm.attack_clean_acc[si][ei];
                       row.robust_acc = arm.robust_acc[si][ei];
                       row.asr = arm.asr[si][ei];
                       if (arm.second_empty[si][ei] == 0) {
                         row.second_rate = arm.second_rate[si][ei];
                       }
                     }
                   });
      }
    }
    if (report.noise_rate > 0.0 && !arm.noise_test_acc.empty()) {
      for (std::size_t e = 0; e <= report.epochs; ++e) {
        emit_group(out, report, arm, "noise", std::to_string(e), report.noise_rate,
                   [&](std::size_t si, CsvRow& row) {
                     if (si < arm.noise_test_acc.size() && e < arm.noise_test_acc[si].size()) {
                       row.clean_acc = arm.noise_test_acc[si][e];
                     }
                   });
      }
    }
  }
  return out;
}

// ---- summary.json ------------------------------------------------------------------

namespace {

json arm_to_json(const ArmMetrics& arm) {
  json j;
  j["label"] = arm.label;
  j["kind"] = to_string(arm.spec.kind);
  j["q"] = arm.spec.q;
  j["tau"] = arm.spec.tau;
  j["metric"] = to_string(arm.spec.metric);
  j["restrict_to_non_true"] = arm.spec.restrict_to_non_true;
  j["train_loss"] = arm.train_loss;
  j["test_acc"] = arm.test_acc;
  j["stoch_mean"] = arm.stoch_mean;
  j["attack_clean_acc"] = arm.attack_clean_acc;
  j["robust_acc"] = arm.robust_acc;
  j["asr"] = arm.asr;
  j["second_rate"] = arm.second_rate;
  j["second_empty"] = arm.second_empty;
  j["noise_test_acc"] = arm.noise_test_acc;
  j["stoch_histogram"] = arm.stoch_histogram;
  j["stoch_hist_max"] = arm.stoch_hist_max;
  j["pca_points"] = arm.pca_points;
  j["pca_classes"] = arm.pca_classes;
  j["pca_adv_points"] = arm.pca_adv_points;
  j["pca_explained"] = arm.pca_explained;
  j["pca_epsilon"] = arm.pca_epsilon;
  return j;
}

ArmMetrics arm_from_json(const json& j) {
  ArmMetrics arm;
  arm.label = j.at("label").get<std::string>();
  arm.spec.kind = loss_kind_from_string(j.at("kind").get<std::string>());
  arm.spec.q = j.at("q").get<double>();
  arm.spec.tau = j.at("tau").get<double>();
  arm.spec.metric = metric_from_string(j.at("metric").get<std::string>());
  arm.spec.restrict_to_non_true = j.at("restrict_to_non_true").get<bool>();
  arm.train_loss = j.at("train_loss").get<std::vector<std::vector<double>>>();
  arm.test_acc = j.at("test_acc").get<std::vector<std::vector<double>>>();
  arm.stoch_mean = j.at("stoch_mean").get<std::vector<std::vector<double>>>();
  arm.attack_clean_acc = j.at("attack_clean_acc").get<std::vector<std::vector<double>>>();
  arm.robust_acc = j.at("robust_acc").get<std::vector<std::vector<double>>>();
  arm.asr = j.at("asr").get<std::vector<std::vector<double>>>();
  arm.second_rate = j.at("second_rate").get<std::vector<std::vector<double>>>();
  arm.second_empty = j.at("second_empty").get<std::vector<std::vector<std::uint8_t>>>();
  arm.noise_test_acc = j.at("noise_test_acc").get<std::vector<std::vector<double>>>();
  arm.stoch_histogram = j.at("stoch_histogram").get<std::vector<std::size_t>>();
  arm.stoch_hist_max = j.at("stoch_hist_max").get<double>();
  arm.pca_points = j.at("pca_points").get<std::vector<double>>();
  arm.pca_classes = j.at("pca_classes").get<std::vector<std::size_t>>();
  arm.pca_adv_points = j.at("pca_adv_points").get<std::vector<double>>();
  arm.pca_explained = j.at("pca_explained").get<std::vector<double>>();
  arm.pca_epsilon = j.at("pca_epsilon").get<double>();
  return arm;
}

}  // namespace

void save_report(const MetricsReport& report, const std::string& dir) {
  json j;
  j["run_id"] = report.run_id;
  j["canonical_config"] = report.canonical_config;
  j["epsilon_grid"] = report.epsilon_grid;
  j["seeds"] = report.seeds;
  j["epochs"] = report.epochs;
  j["noise_rate"] = report.noise_rate;
  j["has_attack"] = report.has_attack;
  j["has_analyze"] = report.has_analyze;
  j["warnings"] = report.warnings;
  json arms = json::array();
  for (const ArmMetrics& arm : report.arms) arms.push_back(arm_to_json(arm));
  j["arms"] = std::move(arms);
  write_file_atomic(fs::path(dir) / "summary.json", j.dump(1) + "\n");
  write_file_atomic(fs::path(dir) / "metrics.csv", metrics_csv(report));
}

bool report_exists(const std::string& dir) {
  return fs::exists(fs::path(dir) / "summary.json");
}

MetricsReport load_report(const std::string& dir) {
  const fs::path path = fs::path(dir) / "summary.json";
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  json j;
  try {
    is >> j;
    MetricsReport report;
    report.run_id = j.at("run_id").get<std::string>();
    report.canonical_config = j.at("canonical_config").get<std::string>();
    report.epsilon_grid = j.at("epsilon_grid").get<std::vector<double>>();
    report.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    report.epochs = j.at("epochs").get<std::size_t>();
    report.noise_rate = j.at("noise_rate").get<double>();
    report.has_attack = j.at("has_attack").get<bool>();
    report.has_analyze = j.at("has_analyze").get<bool>();
    report.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const json& ja : j.at("arms")) report.arms.push_back(arm_from_json(ja));
    return report;
  } catch (const json::exception& e) {
    throw FormatError("malformed summary.json: " + std::string(e.what()));
  }
}

// ---- plots ---------------------------------------------------------------------------

std::vector<std::string> emit_plots(const MetricsReport& report, const std::string& dir) {
  std::vector<std::string> written;
  if (report.arms.empty()) {
    std::fprintf(stderr, "[drsl-lab] WARNING: empty report, no plots emitted\n");
    return written;
  }
  fs::create_directories(dir);

  if (report.has_attack) {
    std::vector<SvgSeries> series;
    for (const ArmMetrics& arm : report.arms) {
      SvgSeries s;
      s.label = arm.label;
      for (std::size_t ei = 0; ei < report.epsilon_grid.size(); ++ei) {
        std::vector<double> col;
        for (const auto& row : arm.robust_acc) {
          if (ei < row.size()) col.push_back(row[ei]);
        }
        if (!col.empty()) {
          s.xs.push_back(report.epsilon_grid[ei]);
          s.ys.push_back(mean_of(col));
        }
      }
      series.push_back(std::move(s));
    }
    write_file_atomic(fs::path(dir) / "robust_accuracy_vs_eps.svg",
                      svg_line_chart("Robust accuracy under attack", "epsilon",
                                     "mean robust accuracy", series));
    written.push_back("robust_accuracy_vs_eps.svg");
  }

  if (report.has_analyze) {
    // Distance-to-uniform histogram, one overlayed group per arm.
    std::vector<std::vector<double>> counts;
    std::vector<std::string> labels;
    double hist_max = 0.0;
    for (const ArmMetrics& arm : report.arms) {
      if (arm.stoch_histogram.empty()) continue;
      counts.emplace_back(arm.stoch_histogram.begin(), arm.stoch_histogram.end());
      labels.push_back(arm.label);
      hist_max = std::max(hist_max, arm.stoch_hist_max);
    }
    if (!counts.empty()) {
      std::vector<double> edges;
      const std::size_t bins = counts.front().size();
      for (std::size_t b = 0; b <= bins; ++b) {
        edges.push_back(hist_max * static_cast<double>(b) / static_cast<double>(bins));
      }
      write_file_atomic(fs::path(dir) / "stochasticity_hist.svg",
                        svg_histogram("Softmax distance to uniform", "distance", edges, counts,
                                      labels));
      written.push_back("stochasticity_hist.svg");
    }
  }

  {
    // Accuracy vs distance across training epochs of the first seed.
    std::vector<SvgPoints> groups;
    const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    for (std::size_t ai = 0; ai < report.arms.size(); ++ai) {
      const ArmMetrics& arm = report.arms[ai];
      if (arm.test_acc.empty()) continue;
      SvgPoints g;
      g.xs = arm.stoch_mean.front();
      g.ys = arm.test_acc.front();
      g.color = palette[ai % 6];
      std::string r_text = "r=n/a";
      if (g.xs.size() >= 2) {
        try {
          r_text = "r=" + format_value(pearson_correlation(g.xs, g.ys));
        } catch (const NumericError&) {
        }
      }
      g.label = arm.label + " (" + r_text + ")";
      groups.push_back(std::move(g));
    }
    if (!groups.empty()) {
      write_file_atomic(fs::path(dir) / "accuracy_vs_distance.svg",
                        svg_scatter("Accuracy vs softmax distance (per epoch)",
                                    "distance to uniform", "test accuracy", groups));
      written.push_back("accuracy_vs_distance.svg");
    }
  }

  if (report.has_analyze) {
    const char* class_palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#bcbd22", "#17becf", "#7f7f7f"};
    for (std::size_t ai = 0; ai < report.arms.size(); ++ai) {
      const ArmMetrics& arm = report.arms[ai];
      if (arm.pca_points.empty()) continue;
      std::vector<SvgPoints> groups(10);
      for (std::size_t c = 0; c < 10; ++c) {
        groups[c].label = "class " + std::to_string(c);
        groups[c].color = class_palette[c];
      }
      for (std::size_t i = 0; i < arm.pca_classes.size(); ++i) {
        auto& g = groups[arm.pca_classes[i]];
        g.xs.push_back(arm.pca_points[2 * i]);
        g.ys.push_back(arm.pca_points[2 * i + 1]);
      }
      SvgPoints adv;
      adv.label = "adversarial";
      adv.color = "#000000";
      for (std::size_t i = 0; 2 * i + 1 < arm.pca_adv_points.size(); ++i) {
        adv.xs.push_back(arm.pca_adv_points[2 * i]);
        adv.ys.push_back(arm.pca_adv_points[2 * i + 1]);
      }
      groups.push_back(std::move(adv));
      const std::string name = "pca_" + arm_dir_name(ai, arm.spec) + ".svg";
      write_file_atomic(fs::path(dir) / name,
                        svg_scatter("Softmax PCA, " + arm.label + " (attack eps=" +
                                        format_value(arm.pca_epsilon) + ")",
                                    "PC1", "PC2", groups));
      written.push_back(name);
    }
  }
  return written;
}

// ---- comparison ------------------------------------------------------------------------

CompareTable compare_runs(const MetricsReport& a, const MetricsReport& b) {
  if (a.epsilon_grid != b.epsilon_grid) {
    throw ValueError("compare_runs: epsilon grids differ");
  }
  if (a.seeds != b.seeds) throw ValueError("compare_runs: seed sets differ");
  if (a.arms.size() != b.arms.size()) {
    throw ValueError("compare_runs: reports have different arm counts");
  }
  if (!a.has_attack || !b.has_attack) {
    throw ValueError("compare_runs: both reports need a completed attack stage");
  }
  CompareTable table;
  for (std::size_t ai = 0; ai < a.arms.size(); ++ai) {
    const ArmMetrics& arm_a = a.arms[ai];
    const ArmMetrics& arm_b = b.arms[ai];
    for (std::size_t ei = 0; ei < a.epsilon_grid.size(); ++ei) {
      CompareEntry entry;
      entry.arm_a = arm_a.label;
      entry.arm_b = arm_b.label;
      entry.epsilon = a.epsilon_grid[ei];
      std::vector<double> va, vb;
      for (std::size_t si = 0; si < a.seeds.size(); ++si) {
        const double ra = arm_a.robust_acc[si][ei];
        const double rb = arm_b.robust_acc[si][ei];
        va.push_back(ra);
        vb.push_back(rb);
        if (ra > rb) ++entry.wins_a;
        else if (rb > ra) ++entry.wins_b;
        else ++entry.ties;
      }
      entry.mean_robust_a = mean_of(va);
      entry.mean_robust_b = mean_of(vb);
      entry.diff = entry.mean_robust_a - entry.mean_robust_b;
      table.entries.push_back(entry);
    }
  }
  return table;
}

std::string CompareTable::to_csv() const {
  std::string out = "arm_a,arm_b,epsilon,mean_robust_a,mean_robust_b,diff,wins_a,wins_b,ties\n";
  for (const CompareEntry& e : entries) {
    out += e.arm_a + ',' + e.arm_b + ',' + format_value(e.epsilon) + ',' +
           format_value(e.mean_robust_a) + ',' + format_value(e.mean_robust_b) + ',' +
           format_value(e.diff) + ',' + std::to_string(e.wins_a) + ',' +
           std::to_string(e.wins_b) + ',' + std::to_string(e.ties) + '\n';
  }
  return out;
}

std::string CompareTable::to_text() const {
  std::ostringstream os;
  for (const CompareEntry& e : entries) {
    os << e.arm_a << " vs " << e.arm_b << " @ eps=" << format_value(e.epsilon)
       << ": " << format_value(e.mean_robust_a) << " vs " << format_value(e.mean_robust_b)
       << " (diff " << format_value(e.diff) << ", wins " << e.wins_a << "/" << e.wins_b
       << ", ties " << e.ties << ")\n";
  }
  return os.str();
}

}  // namespace drsl
