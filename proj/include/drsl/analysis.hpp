#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "drsl/attacks.hpp"
#include "drsl/data.hpp"
#include "drsl/losses.hpp"
#include "drsl/model.hpp"

namespace drsl {

// Fraction of examples with argmax(logits) == label; ties break to the
// lowest class index. Rejects empty datasets.
double accuracy(const Model& model, const Dataset& ds, std::size_t batch_size = 256);

// Softmax outputs for every example, row per example -> (N, C).
Tensor softmax_matrix(const Model& model, const Dataset& ds, std::size_t batch_size = 256);

// Per-example distance between the softmax output and the uniform
// distribution. Lower mean = softmax closer to uniform.
struct StochasticityReport {
  DistanceMetric metric = DistanceMetric::Euclidean;
  std::vector<double> distances;       // per example, dataset order
  double mean = 0.0;
  double stddev = 0.0;                 // population std over examples
  double max_possible = 0.0;           // metric maximum for probability vectors
  std::vector<std::size_t> histogram;  // fixed bins over [0, max_possible]

  static constexpr std::size_t kBins = 20;
};

StochasticityReport stochasticity(const Model& model, const Dataset& ds, DistanceMetric metric,
                                  std::size_t batch_size = 256);

// Runner-up landing statistic: among flipped examples (clean-correct, misclassified
// after attack), how often the post-attack argmax equals the clean
// second-highest softmax class.
struct SecondArgmaxReport {
  double overall_rate = 0.0;
  std::vector<double> per_class_rate;          // indexed by true class
  std::vector<std::size_t> per_class_success;  // flipped-attack counts per true class
  std::size_t total_success = 0;
  std::size_t total_matches = 0;
  double chance_level = 0.0;  // 1 / (C - 1)
  bool empty_denominator = true;
};

// Everything an attack evaluation yields in one pass over the dataset.
struct AttackAnalysis {
  double clean_accuracy = 0.0;
  double attack_success_rate = 0.0;  // flipped / clean-correct; 0 if denominator empty
  double robust_accuracy = 0.0;      // clean_accuracy * (1 - attack_success_rate)
  std::size_t n = 0;
  std::size_t n_clean_correct = 0;
  std::size_t n_flipped = 0;
  bool asr_denominator_empty = false;
  SecondArgmaxReport second_argmax;
  Tensor adversarial_softmax;  // (N, C), rows in dataset order
};

AttackAnalysis evaluate_attack(const Model& model, const Dataset& ds, const AttackSpec& spec,
                               std::size_t batch_size = 256);

// Thin wrappers over evaluate_attack.
double attack_success_rate(const Model& model, const Dataset& ds, const AttackSpec& spec);
SecondArgmaxReport second_argmax_match_rate(const Model& model, const Dataset& ds,
                                            const AttackSpec& spec);

// Standard Pearson r; requires equal lengths >= 2 and non-zero variance.
double pearson_correlation(std::span<const double> xs, std::span<const double> ys);

// Principal component projection of row-vector points.
struct PcaModel {
  std::vector<double> mean;        // (D)
  std::vector<double> components;  // (out_dims, D) row-major, descending eigenvalue
  std::vector<double> explained_variance_ratio;  // (out_dims)
};

struct PcaResult {
  Tensor scores;  // (N, out_dims)
  std::vector<double> explained_variance_ratio;
};

PcaModel pca_fit(const Tensor& points, std::size_t out_dims = 2);
Tensor pca_transform(const PcaModel& model, const Tensor& points);
PcaResult pca_project(const Tensor& points, std::size_t out_dims = 2);

}  // namespace drsl
