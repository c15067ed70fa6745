#include "drsl/losses.hpp"

#include <cmath>
#include <sstream>

namespace drsl {

namespace {

constexpr double kProbClamp = 1e-12;

void check_labels(const Tensor& logits, const std::vector<std::size_t>& labels) {
  if (logits.ndim() != 2) throw ShapeError("loss: logits must be (B, C)");
  const std::size_t cols = logits.dim(1);
  if (labels.size() != logits.dim(0)) throw ShapeError("loss: label count must equal batch size");
  for (std::size_t y : labels) {
    if (y >= cols) {
      throw ValueError("loss: label " + std::to_string(y) + " out of range [0, " +
                       std::to_string(cols) + ")");
    }
  }
}

// Per-example CE vector: logsumexp(row) - logits[row, label].
Tensor ce_per_example(Tape* tape, const Tensor& logits, const std::vector<std::size_t>& labels) {
  Tensor lse = logsumexp_rows(tape, logits);
  Tensor zy = gather_rows(tape, logits, labels);
  return sub(tape, lse, zy);
}

// Per-example distance between softmax rows and the uniform distribution.
Tensor distance_to_uniform(Tape* tape, const Tensor& probs, DistanceMetric metric) {
  const std::size_t cols = probs.dim(1);
  Tensor uniform(Shape{cols}, uniform_distribution(cols));
  if (metric == DistanceMetric::Euclidean) {
    Tensor diff = sub_rowvec(tape, probs, uniform);
    return sqrt(tape, sum_rows(tape, mul(tape, diff, diff)));
  }
  // cosine: 1 - dot(p, u) / (|p| * |u|)
  Tensor dot = sum_rows(tape, mul_rowvec(tape, probs, uniform));
  Tensor pnorm = sqrt(tape, sum_rows(tape, mul(tape, probs, probs)));
  const double unorm = 1.0 / std::sqrt(static_cast<double>(cols));
  Tensor sim = div(tape, dot, affine(tape, pnorm, unorm, 0.0));
  return affine(tape, sim, -1.0, 1.0);
}

// Variant: drop the true-class entry, renormalize the rest to sum 1 and
// measure against uniform over the remaining C-1 classes.
Tensor restricted_distance_to_uniform(Tape* tape, const Tensor& probs,
                                      const std::vector<std::size_t>& labels,
                                      DistanceMetric metric) {
  const std::size_t cols = probs.dim(1);
  if (cols < 2) throw ShapeError("restricted distance needs at least two classes");
  Tensor masked = mask_index(tape, probs, labels);
  Tensor rest = clamp_min(tape, sum_rows(tape, masked), kProbClamp);
  Tensor renorm = div_colvec(tape, masked, rest);
  const double u = 1.0 / static_cast<double>(cols - 1);
  Tensor uniform(Shape{cols}, std::vector<double>(cols, u));
  if (metric == DistanceMetric::Euclidean) {
    // Masking after the subtraction zeroes the true-class residual, leaving
    // exactly the C-1 off-label terms.
    Tensor diff = mask_index(tape, sub_rowvec(tape, renorm, uniform), labels);
    return sqrt(tape, sum_rows(tape, mul(tape, diff, diff)));
  }
  Tensor dot = sum_rows(tape, mul_rowvec(tape, renorm, uniform));
  Tensor pnorm = sqrt(tape, clamp_min(tape, sum_rows(tape, mul(tape, renorm, renorm)), kProbClamp * kProbClamp));
  const double unorm = std::sqrt(static_cast<double>(cols - 1)) * u;
  Tensor sim = div(tape, dot, affine(tape, pnorm, unorm, 0.0));
  return affine(tape, sim, -1.0, 1.0);
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::CE: return "CE";
    case LossKind::GCE: return "GCE";
    case LossKind::DRSL: return "DRSL";
  }
  return "?";
}

std::string to_string(DistanceMetric metric) {
  return metric == DistanceMetric::Euclidean ? "euclidean" : "cosine";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "CE" || s == "ce") return LossKind::CE;
  if (s == "GCE" || s == "gce") return LossKind::GCE;
  if (s == "DRSL" || s == "drsl") return LossKind::DRSL;
  throw ValueError("unknown loss kind '" + s + "' (expected CE, GCE or DRSL)");
}

DistanceMetric metric_from_string(const std::string& s) {
  if (s == "euclidean" || s == "Euclidean" || s == "l2") return DistanceMetric::Euclidean;
  if (s == "cosine" || s == "Cosine") return DistanceMetric::Cosine;
  throw ValueError("unknown distance metric '" + s + "' (expected euclidean or cosine)");
}

void LossSpec::validate() const {
  if (kind == LossKind::GCE && !(q > 0.0 && q <= 1.0)) {
    throw ValueError("GCE requires 0 < q <= 1, got q=" + std::to_string(q));
  }
  if (kind == LossKind::DRSL && !(tau >= 0.0)) {
    throw ValueError("DRSL requires tau >= 0, got tau=" + std::to_string(tau));
  }
}

std::string LossSpec::label() const {
  std::ostringstream os;
  switch (kind) {
    case LossKind::CE: os << "CE"; break;
    case LossKind::GCE: os << "GCE(q=" << q << ")"; break;
    case LossKind::DRSL:
      os << "DRSL(tau=" << tau << "," << to_string(metric);
      if (restrict_to_non_true) os << ",non-true";
      os << ")";
      break;
  }
  return os.str();
}

LossSpec LossSpec::gce(double q) {
  LossSpec s;
  s.kind = LossKind::GCE;
  s.q = q;
  s.validate();
  return s;
}

LossSpec LossSpec::drsl(double tau, DistanceMetric metric, bool restrict_to_non_true) {
  LossSpec s;
  s.kind = LossKind::DRSL;
  s.tau = tau;
  s.metric = metric;
  s.restrict_to_non_true = restrict_to_non_true;
  s.validate();
  return s;
}

std::vector<double> uniform_distribution(std::size_t num_classes) {
  if (num_classes < 2) throw ValueError("uniform_distribution requires at least two classes");
  return std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes));
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("euclidean_distance: vectors must have equal positive length");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("cosine_distance: vectors must have equal positive length");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine_distance: zero-norm input");
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

Tensor ce_loss(Tape* tape, const Tensor& logits, const std::vector<std::size_t>& labels) {
  check_labels(logits, labels);
  return mean(tape, ce_per_example(tape, logits, labels));
}

Tensor gce_loss(Tape* tape, const Tensor& logits, const std::vector<std::size_t>& labels,
                double q) {
  if (!(q > 0.0 && q <= 1.0)) throw ValueError("gce_loss: q must be in (0, 1]");
  check_labels(logits, labels);
  // p_y = exp(logit_y - logsumexp), stable.
  Tensor lse = logsumexp_rows(tape, logits);
  Tensor zy = gather_rows(tape, logits, labels);
  Tensor py = exp(tape, sub(tape, zy, lse));
  Tensor pq = pow_scalar(tape, clamp_min(tape, py, kProbClamp), q);
  return mean(tape, affine(tape, pq, -1.0 / q, 1.0 / q));
}

Tensor drsl_loss(Tape* tape, const Tensor& logits, const std::vector<std::size_t>& labels,
                 double tau, DistanceMetric metric, bool restrict_to_non_true) {
  if (!(tau >= 0.0)) throw ValueError("drsl_loss: tau must be >= 0");
  check_labels(logits, labels);
  Tensor ce = ce_per_example(tape, logits, labels);
  if (tau == 0.0) return mean(tape, ce);
  Tensor probs = softmax(tape, logits);
  Tensor dist = restrict_to_non_true
                    ? restricted_distance_to_uniform(tape, probs, labels, metric)
                    : distance_to_uniform(tape, probs, metric);
  return mean(tape, add(tape, ce, affine(tape, dist, tau, 0.0)));
}

Tensor loss_forward(Tape* tape, const LossSpec& spec, const Tensor& logits,
                    const std::vector<std::size_t>& labels) {
  spec.validate();
  switch (spec.kind) {
    case LossKind::CE: return ce_loss(tape, logits, labels);
    case LossKind::GCE: return gce_loss(tape, logits, labels, spec.q);
    case LossKind::DRSL:
      return drsl_loss(tape, logits, labels, spec.tau, spec.metric, spec.restrict_to_non_true);
  }
  throw ValueError("loss_forward: unknown loss kind");
}

}  // namespace drsl
