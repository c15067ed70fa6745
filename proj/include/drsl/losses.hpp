#pragma once

#include <span>
#include <string>
#include <vector>

#include "drsl/tensor.hpp"

namespace drsl {

enum class LossKind { CE, GCE, DRSL };
enum class DistanceMetric { Euclidean, Cosine };

std::string to_string(LossKind kind);
std::string to_string(DistanceMetric metric);
LossKind loss_kind_from_string(const std::string& s);
DistanceMetric metric_from_string(const std::string& s);

// Tagged choice of CE | GCE(q) | DRSL(tau, metric).
struct LossSpec {
  LossKind kind = LossKind::CE;
  double q = 0.7;                                     // GCE only, in (0, 1]
  double tau = 0.0;                                   // DRSL only, >= 0
  DistanceMetric metric = DistanceMetric::Euclidean;  // DRSL only
  // DRSL variant: distance computed on the non-true-label probabilities,
  // renormalized to sum 1, against uniform over C-1 classes. Off by default;
  // the default follows the loss equation, which penalizes the full softmax.
  bool restrict_to_non_true = false;

  void validate() const;
  std::string label() const;  // short human-readable tag, e.g. "DRSL(tau=0.5,euclidean)"

  static LossSpec ce() { return LossSpec{}; }
  static LossSpec gce(double q);
  static LossSpec drsl(double tau, DistanceMetric metric = DistanceMetric::Euclidean,
                       bool restrict_to_non_true = false);
};

// The probability vector with every entry 1/C ("totally average distribution").
std::vector<double> uniform_distribution(std::size_t num_classes);

// Plain-vector distance measures (the differentiable versions used inside
// drsl_loss are built from tape primitives).
double euclidean_distance(std::span<const double> a, std::span<const double> b);
// 1 - cosine similarity; requires both norms positive.
double cosine_distance(std::span<const double> a, std::span<const double> b);

// Mean over the batch of -log softmax(logits)[label], via fused log-sum-exp.
Tensor ce_loss(Tape* tape, const Tensor& logits, const std::vector<std::size_t>& labels);

// Generalized cross entropy: mean of (1 - p_y^q) / q with p_y clamped >= 1e-12.
Tensor gce_loss(Tape* tape, const Tensor& logits, const std::vector<std::size_t>& labels,
                double q);

// Distribution-restrained softmax loss: mean of
//   CE_i + tau * d(softmax(logits_i), uniform).
// With tau = 0 this is exactly ce_loss (same code path).
Tensor drsl_loss(Tape* tape, const Tensor& logits, const std::vector<std::size_t>& labels,
                 double tau, DistanceMetric metric, bool restrict_to_non_true = false);

// Dispatch on a LossSpec.
Tensor loss_forward(Tape* tape, const LossSpec& spec, const Tensor& logits,
                    const std::vector<std::size_t>& labels);

}  // namespace drsl
