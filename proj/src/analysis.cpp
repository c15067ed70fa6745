#include "drsl/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace drsl {

namespace {

void check_eval_inputs(const Model& model, const Dataset& ds) {
  if (ds.size() == 0) throw ContractError("evaluation on an empty dataset");
  const auto& in = model.config().input_shape;
  if (ds.images.dim(1) != in[0] || ds.images.dim(2) != in[1] || ds.images.dim(3) != in[2]) {
    throw ShapeError("dataset shape does not match model input shape");
  }
}

std::vector<std::size_t> range_indices(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
  return idx;
}

// Index of the second-highest entry; ties resolved to the lowest index not
// chosen as the argmax.
std::size_t second_argmax(std::span<const double> row) {
  const std::size_t first = argmax(row);
  std::size_t second = first == 0 ? 1 : 0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i == first) continue;
    if (row[i] > row[second]) second = i;
  }
  return second;
}

}  // namespace

double accuracy(const Model& model, const Dataset& ds, std::size_t batch_size) {
  check_eval_inputs(model, ds);
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
    const std::size_t end = std::min(ds.size(), begin + batch_size);
    const Tensor batch = gather_images(ds, range_indices(begin, end));
    const Tensor logits = model.forward(nullptr, batch);
    const auto lv = logits.values();
    const std::size_t c = logits.dim(1);
    for (std::size_t r = 0; r < end - begin; ++r) {
      if (argmax(lv.subspan(r * c, c)) == ds.labels[begin + r]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

Tensor softmax_matrix(const Model& model, const Dataset& ds, std::size_t batch_size) {
  check_eval_inputs(model, ds);
  const std::size_t c = model.config().num_classes;
  std::vector<double> probs(ds.size() * c);
  for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
    const std::size_t end = std::min(ds.size(), begin + batch_size);
    const Tensor batch = gather_images(ds, range_indices(begin, end));
    const Tensor p = softmax(nullptr, model.forward(nullptr, batch));
    std::copy_n(p.values().data(), (end - begin) * c, probs.data() + begin * c);
  }
  return Tensor(Shape{ds.size(), c}, std::move(probs));
}

StochasticityReport stochasticity(const Model& model, const Dataset& ds, DistanceMetric metric,
                                  std::size_t batch_size) {
  const Tensor probs = softmax_matrix(model, ds, batch_size);
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  const std::vector<double> uniform = uniform_distribution(c);

  StochasticityReport report;
  report.metric = metric;
  report.max_possible = metric == DistanceMetric::Euclidean
                            ? std::sqrt(static_cast<double>(c - 1) / static_cast<double>(c))
                            : 1.0 - 1.0 / std::sqrt(static_cast<double>(c));
  report.distances.resize(n);
  report.histogram.assign(StochasticityReport::kBins, 0);
  const auto pv = probs.values();
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = pv.subspan(r * c, c);
    const double d = metric == DistanceMetric::Euclidean ? euclidean_distance(row, uniform)
                                                         : cosine_distance(row, uniform);
    report.distances[r] = d;
    total += d;
    std::size_t bin = static_cast<std::size_t>(d / report.max_possible *
                                               static_cast<double>(StochasticityReport::kBins));
    if (bin >= StochasticityReport::kBins) bin = StochasticityReport::kBins - 1;
    report.histogram[bin] += 1;
  }
  report.mean = total / static_cast<double>(n);
  double var = 0.0;
  for (double d : report.distances) {
    const double dd = d - report.mean;
    var += dd * dd;
  }
  report.stddev = std::sqrt(var / static_cast<double>(n));
  return report;
}

AttackAnalysis evaluate_attack(const Model& model, const Dataset& ds, const AttackSpec& spec,
                               std::size_t batch_size) {
  check_eval_inputs(model, ds);
  spec.validate();
  const std::size_t c = model.config().num_classes;

  AttackAnalysis out;
  out.n = ds.size();
  out.second_argmax.per_class_rate.assign(c, 0.0);
  out.second_argmax.per_class_success.assign(c, 0);
  out.second_argmax.chance_level = 1.0 / static_cast<double>(c - 1);
  std::vector<std::size_t> per_class_matches(c, 0);
  std::vector<double> adv_probs(ds.size() * c);

  for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
    const std::size_t end = std::min(ds.size(), begin + batch_size);
    const Tensor batch = gather_images(ds, range_indices(begin, end));
    std::vector<std::size_t> labels(ds.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                                    ds.labels.begin() + static_cast<std::ptrdiff_t>(end));

    const Tensor clean_probs = softmax(nullptr, model.forward(nullptr, batch));
    const AdvBatch adv = run_attack(model, batch, labels, spec);
    const Tensor adv_p = softmax(nullptr, model.forward(nullptr, adv.adversarial));
    std::copy_n(adv_p.values().data(), (end - begin) * c, adv_probs.data() + begin * c);

    const auto cp = clean_probs.values();
    for (std::size_t r = 0; r < end - begin; ++r) {
      const auto crow = cp.subspan(r * c, c);
      const std::size_t truth = labels[r];
      const bool clean_ok = argmax(crow) == truth;
      if (!clean_ok) continue;
      ++out.n_clean_correct;
      if (adv.adv_pred[r] != truth) {
        ++out.n_flipped;
        const std::size_t cls = truth;
        out.second_argmax.per_class_success[cls] += 1;
        if (adv.adv_pred[r] == second_argmax(crow)) per_class_matches[cls] += 1;
      }
    }
  }

  out.adversarial_softmax = Tensor(Shape{ds.size(), c}, std::move(adv_probs));
  out.clean_accuracy = static_cast<double>(out.n_clean_correct) / static_cast<double>(out.n);
  if (out.n_clean_correct == 0) {
    out.asr_denominator_empty = true;
    out.attack_success_rate = 0.0;
  } else {
    out.attack_success_rate =
        static_cast<double>(out.n_flipped) / static_cast<double>(out.n_clean_correct);
  }
  // Defined as this product so the identity holds exactly on every run.
  out.robust_accuracy = out.clean_accuracy * (1.0 - out.attack_success_rate);

  auto& rep = out.second_argmax;
  rep.total_success = out.n_flipped;
  for (std::size_t cls = 0; cls < c; ++cls) {
    rep.total_matches += per_class_matches[cls];
    if (rep.per_class_success[cls] > 0) {
      rep.per_class_rate[cls] = static_cast<double>(per_class_matches[cls]) /
                                static_cast<double>(rep.per_class_success[cls]);
    }
  }
  rep.empty_denominator = rep.total_success == 0;
  if (!rep.empty_denominator) {
    rep.overall_rate =
        static_cast<double>(rep.total_matches) / static_cast<double>(rep.total_success);
  }
  return out;
}

double attack_success_rate(const Model& model, const Dataset& ds, const AttackSpec& spec) {
  return evaluate_attack(model, ds, spec).attack_success_rate;
}

SecondArgmaxReport second_argmax_match_rate(const Model& model, const Dataset& ds,
                                            const AttackSpec& spec) {
  return evaluate_attack(model, ds, spec).second_argmax;
}

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw ShapeError("pearson_correlation: need equal lengths >= 2");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw NumericError("pearson_correlation: zero variance input");
  }
  return sxy / std::sqrt(sxx * syy);
}

// ---- PCA ----------------------------------------------------------------------

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. `a` is destroyed;
// eigenvectors land in columns of `vecs`.
void jacobi_eigen(std::vector<double>& a, std::size_t d, std::vector<double>& vals,
                  std::vector<double>& vecs) {
  vecs.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) vecs[i * d + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) off += a[p * d + q] * a[p * d + q];
    }
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a[p * d + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cth = 1.0 / std::sqrt(t * t + 1.0);
        const double sth = t * cth;
        for (std::size_t k = 0; k < d; ++k) {
          const double akp = a[k * d + p];
          const double akq = a[k * d + q];
          a[k * d + p] = cth * akp - sth * akq;
          a[k * d + q] = sth * akp + cth * akq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double apk = a[p * d + k];
          const double aqk = a[q * d + k];
          a[p * d + k] = cth * apk - sth * aqk;
          a[q * d + k] = sth * apk + cth * aqk;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double vkp = vecs[k * d + p];
          const double vkq = vecs[k * d + q];
          vecs[k * d + p] = cth * vkp - sth * vkq;
          vecs[k * d + q] = sth * vkp + cth * vkq;
        }
      }
    }
  }
  vals.resize(d);
  for (std::size_t i = 0; i < d; ++i) vals[i] = a[i * d + i];
}

}  // namespace

PcaModel pca_fit(const Tensor& points, std::size_t out_dims) {
  if (points.ndim() != 2) throw ShapeError("pca_fit: points must be (N, D)");
  const std::size_t n = points.dim(0), d = points.dim(1);
  if (n < 2) throw ContractError("pca_fit: need at least two points");
  if (out_dims == 0 || out_dims > d) throw ShapeError("pca_fit: out_dims must be in [1, D]");

  PcaModel model;
  model.mean.assign(d, 0.0);
  const auto pv = points.values();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) model.mean[c] += pv[r * d + c];
  }
  for (double& m : model.mean) m /= static_cast<double>(n);

  std::vector<double> cov(d * d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      const double di = pv[r * d + i] - model.mean[i];
      for (std::size_t j = i; j < d; ++j) {
        cov[i * d + j] += di * (pv[r * d + j] - model.mean[j]);
      }
    }
  }
  double total_var = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov[i * d + j] /= static_cast<double>(n - 1);
      cov[j * d + i] = cov[i * d + j];
    }
    total_var += cov[i * d + i];
  }
  if (total_var <= 0.0) throw NumericError("pca_fit: degenerate (zero variance) input");

  std::vector<double> vals, vecs;
  jacobi_eigen(cov, d, vals, vecs);

  std::vector<std::size_t> order(d);
  for (std::size_t i = 0; i < d; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&vals](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });

  model.components.assign(out_dims * d, 0.0);
  model.explained_variance_ratio.assign(out_dims, 0.0);
  for (std::size_t k = 0; k < out_dims; ++k) {
    const std::size_t col = order[k];
    // Sign convention: the largest-magnitude loading is positive.
    std::size_t big = 0;
    for (std::size_t i = 1; i < d; ++i) {
      if (std::abs(vecs[i * d + col]) > std::abs(vecs[big * d + col])) big = i;
    }
    const double flip = vecs[big * d + col] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < d; ++i) model.components[k * d + i] = flip * vecs[i * d + col];
    model.explained_variance_ratio[k] = std::max(0.0, vals[col]) / total_var;
  }
  return model;
}

Tensor pca_transform(const PcaModel& model, const Tensor& points) {
  if (points.ndim() != 2 || points.dim(1) != model.mean.size()) {
    throw ShapeError("pca_transform: dimension mismatch");
  }
  const std::size_t n = points.dim(0), d = points.dim(1);
  const std::size_t k = model.explained_variance_ratio.size();
  const auto pv = points.values();
  std::vector<double> scores(n * k, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        acc += (pv[r * d + i] - model.mean[i]) * model.components[c * d + i];
      }
      scores[r * k + c] = acc;
    }
  }
  return Tensor(Shape{n, k}, std::move(scores));
}

PcaResult pca_project(const Tensor& points, std::size_t out_dims) {
  const PcaModel model = pca_fit(points, out_dims);
  return PcaResult{pca_transform(model, points), model.explained_variance_ratio};
}

}  // namespace drsl
