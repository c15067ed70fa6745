#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "drsl/attacks.hpp"
#include "drsl/data.hpp"
#include "drsl/losses.hpp"
#include "drsl/model.hpp"

namespace drsl {

// Seeded experiment description. Parsed from a flat "key = value" file;
// loss.kind and loss.tau accept comma lists and expand into an arm per
// combination, all trained under otherwise identical settings.
struct ExperimentConfig {
  // data.*
  DatasetName data_name = DatasetName::MNIST;
  std::string data_dir;
  std::size_t subset_size = 10000;      // train examples; 0 = full data
  std::size_t test_subset_size = 2000;  // derived: subset_size / 5 unless set

  // model.*
  ModelConfig model;

  // loss.* (kind and tau may be swept)
  std::vector<LossKind> loss_kinds = {LossKind::CE};
  double gce_q = 0.7;
  std::vector<double> taus = {0.1, 0.5, 1.0, 2.0};
  DistanceMetric metric = DistanceMetric::Euclidean;
  bool restrict_to_non_true = false;

  // train.*
  std::size_t epochs = 5;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  // attack.*
  AttackKind attack_kind = AttackKind::PGD;
  std::vector<double> epsilon_grid = {0.05, 0.1, 0.2, 0.3};
  double attack_alpha = 0.01;
  std::size_t attack_steps = 40;
  double attack_step_size = 0.0;  // 0 = epsilon / 10
  bool attack_random_start = false;
  AttackObjective attack_objective = AttackObjective::CE;
  std::size_t attack_subset_size = 512;  // evaluation examples per arm; 0 = all
  bool attack_dump_adv = false;          // write adversarial batches in the checkpoint container

  // noise.*
  double noise_rate = 0.0;
  std::uint64_t noise_seed = 7;

  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string output_dir = "out";

  // Every loss arm described by this config, in declaration order.
  std::vector<LossSpec> arms() const;
  // Attack spec for one grid point.
  AttackSpec attack_at(double epsilon, const LossSpec& training_loss) const;
  // Canonical text form; its hash is the run identifier.
  std::string canonical_text() const;
  std::string config_hash() const;

  // Collects every validation problem; throws ConfigError enumerating all of
  // them if any is found. `check_files` also requires the data files.
  void validate(bool check_files = true) const;
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

}  // namespace drsl
