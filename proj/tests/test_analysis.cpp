#include <doctest.h>

#include <cmath>
#include <numeric>

#include "drsl/analysis.hpp"
#include "drsl/rng.hpp"

using namespace drsl;

namespace {

ModelConfig tiny_cfg() {
  ModelConfig cfg;
  cfg.arch = Architecture::MLP;
  cfg.input_shape = {1, 6, 6};
  cfg.num_classes = 10;
  cfg.hidden = {24, 16};
  return cfg;
}

Dataset tiny_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Shape shape{n, 1, 6, 6};
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.next_double01();
  Dataset ds;
  ds.images = Tensor(std::move(shape), std::move(data));
  ds.labels.resize(n);
  for (auto& y : ds.labels) y = static_cast<std::size_t>(rng.next_below(10));
  ds.split = Split::Test;
  return ds;
}

// Force the model to predict a constant class by zeroing the head and
// boosting one output bias.
void make_constant_predictor(Model& model, std::size_t cls) {
  auto& params = model.parameters();
  for (double& v : params[params.size() - 2].values_mut()) v = 0.0;
  auto bias = params[params.size() - 1].values_mut();
  for (double& v : bias) v = 0.0;
  bias[cls] = 10.0;
}

}  // namespace

TEST_CASE("accuracy") {
  Model model(tiny_cfg(), 0);
  Dataset ds = tiny_dataset(200, 1);
  SUBCASE("constant predictor scores the class frequency") {
    make_constant_predictor(model, 4);
    std::size_t count = 0;
    for (std::size_t y : ds.labels) count += y == 4 ? 1 : 0;
    CHECK(accuracy(model, ds) ==
          doctest::Approx(static_cast<double>(count) / 200.0).epsilon(1e-12));
  }
  SUBCASE("empty dataset rejected") {
    Dataset empty = ds;
    empty.images = Tensor(Shape{1, 1, 6, 6}, 0.0);
    empty.labels.clear();
    CHECK_THROWS_AS(accuracy(model, empty), ContractError);
  }
  SUBCASE("shape mismatch rejected") {
    Model other(ModelConfig::mlp_mnist(), 0);
    CHECK_THROWS_AS(accuracy(other, ds), ShapeError);
  }
}

TEST_CASE("stochasticity report") {
  Model model(tiny_cfg(), 2);
  Dataset ds = tiny_dataset(150, 3);
  SUBCASE("all-zero head gives uniform softmax and zero distances") {
    make_constant_predictor(model, 0);
    auto& params = model.parameters();
    for (double& v : params[params.size() - 1].values_mut()) v = 0.0;  // flatten bias too
    const StochasticityReport rep = stochasticity(model, ds, DistanceMetric::Euclidean);
    CHECK(rep.mean == doctest::Approx(0.0).epsilon(1e-12));
    for (double d : rep.distances) CHECK(d <= 1e-12);
    CHECK(rep.histogram[0] == 150);
  }
  SUBCASE("saturated one-hot softmax hits the metric maximum") {
    make_constant_predictor(model, 7);
    auto bias = model.parameters().back().values_mut();
    bias[7] = 1000.0;  // fully saturated
    const StochasticityReport rep = stochasticity(model, ds, DistanceMetric::Euclidean);
    CHECK(rep.max_possible == doctest::Approx(std::sqrt(0.9)).epsilon(1e-12));
    CHECK(rep.mean == doctest::Approx(std::sqrt(0.9)).epsilon(1e-9));
    CHECK(rep.histogram.back() == 150);
  }
  SUBCASE("mean matches the arithmetic mean and is permutation invariant") {
    const StochasticityReport rep = stochasticity(model, ds, DistanceMetric::Cosine);
    const double mean =
        std::accumulate(rep.distances.begin(), rep.distances.end(), 0.0) / 150.0;
    CHECK(std::abs(rep.mean - mean) <= 1e-12);
    CHECK(rep.max_possible == doctest::Approx(1.0 - 1.0 / std::sqrt(10.0)).epsilon(1e-12));

    // permuting the dataset leaves the mean unchanged
    Dataset shuffled = ds;
    std::vector<std::size_t> perm(ds.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(4);
    rng.shuffle(perm);
    shuffled.images = gather_images(ds, perm);
    shuffled.labels.clear();
    for (std::size_t i : perm) shuffled.labels.push_back(ds.labels[i]);
    const StochasticityReport rep2 = stochasticity(model, shuffled, DistanceMetric::Cosine);
    CHECK(rep2.mean == doctest::Approx(rep.mean).epsilon(1e-12));
    CHECK(rep2.histogram == rep.histogram);
  }
}

TEST_CASE("attack evaluation identities") {
  Model model(tiny_cfg(), 5);
  model.freeze();
  Dataset ds = tiny_dataset(160, 6);
  const AttackSpec spec = AttackSpec::pgd(0.08, 0.02, 5);
  const AttackAnalysis eval = evaluate_attack(model, ds, spec);

  // robust_accuracy == clean_accuracy * (1 - ASR), exactly
  CHECK(eval.robust_accuracy == eval.clean_accuracy * (1.0 - eval.attack_success_rate));
  CHECK(eval.clean_accuracy ==
        doctest::Approx(static_cast<double>(eval.n_clean_correct) / 160.0).epsilon(1e-15));
  CHECK(eval.n_flipped <= eval.n_clean_correct);
  CHECK(eval.adversarial_softmax.shape() == Shape{160, 10});

  // per-class successful-attack counts sum to the overall count
  std::size_t total = 0;
  for (std::size_t c : eval.second_argmax.per_class_success) total += c;
  CHECK(total == eval.second_argmax.total_success);
  CHECK(eval.second_argmax.chance_level == doctest::Approx(1.0 / 9.0));
  for (double r : eval.second_argmax.per_class_rate) {
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }

  SUBCASE("epsilon 0 attack has zero success rate") {
    const AttackAnalysis id_eval = evaluate_attack(model, ds, AttackSpec::pgd(0.0, 1.0, 1));
    CHECK(id_eval.attack_success_rate == 0.0);
    CHECK(id_eval.robust_accuracy == id_eval.clean_accuracy);
    CHECK(id_eval.second_argmax.empty_denominator);
  }
  SUBCASE("untrained model: denominator is the clean-correct subset only") {
    // ~N/C of random inputs are correct by chance; the rate is over those
    CHECK(eval.n_clean_correct < 80);  // far below N, near N/C
  }
}

TEST_CASE("second argmax match rate in a forced two-class world") {
  ModelConfig cfg = tiny_cfg();
  cfg.num_classes = 2;
  Model model(cfg, 8);
  model.freeze();
  Dataset ds = tiny_dataset(100, 9);
  for (auto& y : ds.labels) y = y % 2;
  const SecondArgmaxReport rep =
      second_argmax_match_rate(model, ds, AttackSpec::pgd(0.25, 0.05, 8));
  if (!rep.empty_denominator) {
    CHECK(rep.overall_rate == 1.0);  // the only other class IS the second argmax
    CHECK(rep.chance_level == 1.0);
  }
}

TEST_CASE("pearson correlation") {
  CHECK(pearson_correlation(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson_correlation(std::vector<double>{1, 2, 3}, std::vector<double>{4, 3, 2}) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(pearson_correlation(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}) ==
        doctest::Approx(0.8).epsilon(1e-12));
  CHECK_THROWS_AS(pearson_correlation(std::vector<double>{1}, std::vector<double>{2}),
                  ShapeError);
  CHECK_THROWS_AS(pearson_correlation(std::vector<double>{1, 1}, std::vector<double>{2, 3}),
                  NumericError);
}

TEST_CASE("pca projection") {
  SUBCASE("points on a line: first component captures everything") {
    std::vector<double> pts;
    for (int i = 0; i < 12; ++i) {
      const double t = static_cast<double>(i);
      pts.insert(pts.end(), {3.0 * t + 1.0, -2.0 * t, 0.5 * t + 4.0, t});
    }
    const PcaResult res = pca_project(Tensor(Shape{12, 4}, pts), 2);
    CHECK(res.explained_variance_ratio[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(res.explained_variance_ratio[1] == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("2-D to 2-D preserves pairwise distances") {
    Rng rng(21);
    std::vector<double> pts(2 * 30);
    for (double& v : pts) v = rng.next_uniform(-3.0, 3.0);
    const Tensor points(Shape{30, 2}, pts);
    const PcaResult res = pca_project(points, 2);
    const auto o = points.values();
    const auto s = res.scores.values();
    for (std::size_t i = 0; i < 30; ++i) {
      for (std::size_t j = i + 1; j < 30; ++j) {
        const double d0 = std::hypot(o[2 * i] - o[2 * j], o[2 * i + 1] - o[2 * j + 1]);
        const double d1 = std::hypot(s[2 * i] - s[2 * j], s[2 * i + 1] - s[2 * j + 1]);
        CHECK(d0 == doctest::Approx(d1).epsilon(1e-9));
      }
    }
  }
  SUBCASE("random cloud: ratios descend and sum below one") {
    Rng rng(22);
    std::vector<double> pts(10 * 40);
    for (double& v : pts) v = rng.next_normal();
    const PcaResult res = pca_project(Tensor(Shape{40, 10}, pts), 2);
    CHECK(res.explained_variance_ratio[0] >= res.explained_variance_ratio[1]);
    CHECK(res.explained_variance_ratio[0] + res.explained_variance_ratio[1] <= 1.0 + 1e-12);
    CHECK(res.explained_variance_ratio[1] > 0.0);
  }
  SUBCASE("deterministic under the sign convention") {
    Rng rng(23);
    std::vector<double> pts(6 * 25);
    for (double& v : pts) v = rng.next_uniform(0.0, 1.0);
    const Tensor points(Shape{25, 6}, pts);
    const PcaResult a = pca_project(points, 2);
    const PcaResult b = pca_project(points, 2);
    CHECK(std::equal(a.scores.values().begin(), a.scores.values().end(),
                     b.scores.values().begin()));
    // convention: the largest-magnitude loading of each component is positive
    const PcaModel model = pca_fit(points, 2);
    for (std::size_t k = 0; k < 2; ++k) {
      double big = 0.0;
      for (std::size_t i = 0; i < 6; ++i) {
        if (std::abs(model.components[k * 6 + i]) > std::abs(big)) {
          big = model.components[k * 6 + i];
        }
      }
      CHECK(big > 0.0);
    }
  }
  SUBCASE("degenerate input rejected") {
    CHECK_THROWS_AS(pca_project(Tensor(Shape{5, 3}, 1.0), 2), NumericError);
    CHECK_THROWS_AS(pca_project(Tensor(Shape{1, 3}, 1.0), 2), ContractError);
    CHECK_THROWS_AS(pca_project(Tensor(Shape{5, 3}, 1.0), 4), ShapeError);
  }
}
