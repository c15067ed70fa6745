#include <doctest.h>

#include <cmath>

#include "drsl/grad_check.hpp"
#include "drsl/losses.hpp"
#include "drsl/rng.hpp"
#include "oracles.hpp"

using namespace drsl;

namespace {

Tensor random_logits(std::size_t batch, std::size_t classes, Rng& rng) {
  std::vector<double> data(batch * classes);
  for (double& v : data) v = rng.next_uniform(-6.0, 6.0);
  return Tensor(Shape{batch, classes}, std::move(data));
}

std::vector<std::size_t> random_labels(std::size_t batch, std::size_t classes, Rng& rng) {
  std::vector<std::size_t> labels(batch);
  for (auto& y : labels) y = static_cast<std::size_t>(rng.next_below(classes));
  return labels;
}

std::vector<long double> row_ld(const Tensor& logits, std::size_t row) {
  const std::size_t c = logits.dim(1);
  std::vector<long double> out(c);
  for (std::size_t i = 0; i < c; ++i) out[i] = logits.values()[row * c + i];
  return out;
}

}  // namespace

TEST_CASE("uniform distribution") {
  const auto u4 = uniform_distribution(4);
  CHECK(u4 == std::vector<double>{0.25, 0.25, 0.25, 0.25});
  CHECK(uniform_distribution(2) == std::vector<double>{0.5, 0.5});
  const auto u10 = uniform_distribution(10);
  double total = 0.0;
  for (double v : u10) {
    CHECK(v == doctest::Approx(0.1).epsilon(1e-15));
    total += v;
  }
  CHECK(std::abs(total - 1.0) <= 1e-9);
  CHECK_THROWS_AS(uniform_distribution(1), ValueError);
}

TEST_CASE("distance measures") {
  const std::vector<double> onehot{1, 0, 0, 0};
  const std::vector<double> uniform = uniform_distribution(4);
  SUBCASE("euclidean") {
    CHECK(euclidean_distance(onehot, onehot) == 0.0);
    CHECK(euclidean_distance(onehot, uniform) ==
          doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
    CHECK(euclidean_distance(std::vector<double>{0, 0}, std::vector<double>{3, 4}) ==
          doctest::Approx(5.0));
    CHECK_THROWS_AS(euclidean_distance(onehot, std::vector<double>{1, 2}), ShapeError);
  }
  SUBCASE("cosine") {
    CHECK(cosine_distance(onehot, onehot) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cosine_distance(onehot, uniform) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}) ==
          doctest::Approx(1.0));
    CHECK_THROWS_AS(cosine_distance(onehot, std::vector<double>{0, 0, 0, 0}), NumericError);
  }
  SUBCASE("symmetry on random vectors") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> a(5), b(5);
      for (auto& v : a) v = rng.next_uniform(0.05, 2.0);
      for (auto& v : b) v = rng.next_uniform(0.05, 2.0);
      CHECK(euclidean_distance(a, b) == euclidean_distance(b, a));
      CHECK(cosine_distance(a, b) == doctest::Approx(cosine_distance(b, a)).epsilon(1e-14));
    }
  }
  SUBCASE("euclidean triangle inequality on random triples") {
    Rng rng(37);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> a(6), b(6), c(6);
      for (auto& v : a) v = rng.next_uniform(-3.0, 3.0);
      for (auto& v : b) v = rng.next_uniform(-3.0, 3.0);
      for (auto& v : c) v = rng.next_uniform(-3.0, 3.0);
      CHECK(euclidean_distance(a, c) <=
            euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-12);
    }
  }
}

TEST_CASE("worked loss examples") {
  const Tensor logits(Shape{1, 3}, std::vector<double>{1, 2, 3});
  const std::vector<std::size_t> label{2};
  SUBCASE("ce") {
    CHECK(ce_loss(nullptr, logits, label).item() == doctest::Approx(0.40761).epsilon(1e-4));
    const Tensor zeros(Shape{1, 10}, 0.0);
    CHECK(ce_loss(nullptr, zeros, std::vector<std::size_t>{3}).item() ==
          doctest::Approx(std::log(10.0)).epsilon(1e-12));
    const Tensor saturated(Shape{1, 3}, std::vector<double>{0, 0, 500});
    CHECK(ce_loss(nullptr, saturated, label).item() == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("gce") {
    CHECK(gce_loss(nullptr, logits, label, 0.7).item() ==
          doctest::Approx(0.35457).epsilon(3e-4));
    // q = 1 reduces to 1 - p_y
    const Tensor even(Shape{1, 2}, std::vector<double>{0, 0});
    CHECK(gce_loss(nullptr, even, std::vector<std::size_t>{0}, 1.0).item() ==
          doctest::Approx(0.5).epsilon(1e-12));
    const Tensor saturated(Shape{1, 3}, std::vector<double>{0, 0, 500});
    CHECK(gce_loss(nullptr, saturated, label, 0.3).item() ==
          doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS_AS(gce_loss(nullptr, logits, label, 0.0), ValueError);
    CHECK_THROWS_AS(gce_loss(nullptr, logits, label, 1.5), ValueError);
  }
  SUBCASE("drsl") {
    CHECK(drsl_loss(nullptr, logits, label, 0.5, DistanceMetric::Euclidean).item() ==
          doctest::Approx(0.61809).epsilon(2e-4));
    // all-zero logits: softmax is already uniform, distance term vanishes
    const Tensor zeros(Shape{1, 5}, 0.0);
    CHECK(drsl_loss(nullptr, zeros, std::vector<std::size_t>{1}, 2.0,
                    DistanceMetric::Euclidean)
              .item() == doctest::Approx(std::log(5.0)).epsilon(1e-9));
    CHECK_THROWS_AS(drsl_loss(nullptr, logits, label, -0.1, DistanceMetric::Euclidean),
                    ValueError);
  }
  SUBCASE("label validation") {
    CHECK_THROWS_AS(ce_loss(nullptr, logits, std::vector<std::size_t>{3}), ValueError);
    CHECK_THROWS_AS(ce_loss(nullptr, logits, std::vector<std::size_t>{0, 1}), ShapeError);
  }
}

TEST_CASE("losses match the long-double oracle within 1e-9") {
  Rng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t c = 2 + static_cast<std::size_t>(rng.next_below(9));
    Tensor logits = random_logits(1, c, rng);
    const auto labels = random_labels(1, c, rng);
    const auto ld = row_ld(logits, 0);

    CHECK(std::abs(ce_loss(nullptr, logits, labels).item() -
                   static_cast<double>(oracle::ce_ld(ld, labels[0]))) <= 1e-9);
    CHECK(std::abs(gce_loss(nullptr, logits, labels, 0.7).item() -
                   static_cast<double>(oracle::gce_ld(ld, labels[0], 0.7L))) <= 1e-9);
    for (double tau : {0.0, 0.5, 1.0}) {
      CHECK(std::abs(drsl_loss(nullptr, logits, labels, tau, DistanceMetric::Euclidean).item() -
                     static_cast<double>(oracle::drsl_ld(ld, labels[0], tau, false))) <= 1e-9);
      CHECK(std::abs(drsl_loss(nullptr, logits, labels, tau, DistanceMetric::Cosine).item() -
                     static_cast<double>(oracle::drsl_ld(ld, labels[0], tau, true))) <= 1e-9);
    }
  }
}

TEST_CASE("loss properties") {
  Rng rng(43);
  SUBCASE("non-negativity and tau monotonicity") {
    for (int trial = 0; trial < 100; ++trial) {
      Tensor logits = random_logits(4, 6, rng);
      const auto labels = random_labels(4, 6, rng);
      const double ce = ce_loss(nullptr, logits, labels).item();
      const double gce = gce_loss(nullptr, logits, labels, 0.7).item();
      CHECK(ce >= 0.0);
      CHECK(gce >= 0.0);
      double prev = -1.0;
      for (double tau : {0.0, 0.3, 0.9, 2.0}) {
        const double v =
            drsl_loss(nullptr, logits, labels, tau, DistanceMetric::Euclidean).item();
        CHECK(v >= 0.0);
        CHECK(v >= prev);
        prev = v;
      }
    }
  }
  SUBCASE("drsl with tau 0 is bitwise ce") {
    for (int trial = 0; trial < 50; ++trial) {
      Tensor logits = random_logits(3, 5, rng);
      const auto labels = random_labels(3, 5, rng);
      CHECK(drsl_loss(nullptr, logits, labels, 0.0, DistanceMetric::Euclidean).item() ==
            ce_loss(nullptr, logits, labels).item());
    }
  }
  SUBCASE("interpolating softmax toward uniform strictly shrinks the distance") {
    const auto uniform = uniform_distribution(5);
    for (int trial = 0; trial < 50; ++trial) {
      Tensor logits = random_logits(1, 5, rng);
      const Tensor probs = softmax(nullptr, logits);
      std::vector<double> p(probs.values().begin(), probs.values().end());
      double prev = euclidean_distance(p, uniform);
      for (double alpha : {0.25, 0.5, 0.75}) {
        std::vector<double> mixed(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
          mixed[i] = (1.0 - alpha) * p[i] + alpha * uniform[i];
        }
        const double d = euclidean_distance(mixed, uniform);
        if (prev > 1e-12) CHECK(d < prev);
        prev = d;
      }
    }
  }
}

TEST_CASE("loss gradients pass grad_check") {
  Rng rng(47);
  const std::vector<std::size_t> labels{2, 0, 4};
  // h near eps^(1/3): keeps central-difference cancellation noise below the
  // tolerance on coordinates whose gradients are tiny
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    Tensor logits = random_logits(3, 5, rng);
    CHECK(grad_check([&](Tape& t, const Tensor& x) { return ce_loss(&t, x, labels); }, logits,
                     h) <= 1e-4);
    CHECK(grad_check([&](Tape& t, const Tensor& x) { return gce_loss(&t, x, labels, 0.7); },
                     logits, h) <= 1e-4);
    CHECK(grad_check(
              [&](Tape& t, const Tensor& x) {
                return drsl_loss(&t, x, labels, 0.8, DistanceMetric::Euclidean);
              },
              logits, h) <= 1e-4);
    CHECK(grad_check(
              [&](Tape& t, const Tensor& x) {
                return drsl_loss(&t, x, labels, 0.8, DistanceMetric::Cosine);
              },
              logits, h) <= 1e-4);
    CHECK(grad_check(
              [&](Tape& t, const Tensor& x) {
                return drsl_loss(&t, x, labels, 0.8, DistanceMetric::Euclidean, true);
              },
              logits, h) <= 1e-4);
  }
}

TEST_CASE("ce gradient equals softmax minus one-hot") {
  Rng rng(53);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor logits = random_logits(1, 6, rng);
    const auto labels = random_labels(1, 6, rng);
    Tensor x = logits.clone(true);
    Tape tape;
    Tensor loss = ce_loss(&tape, x, labels);
    tape.backward(loss);
    const Tensor probs = softmax(nullptr, logits);
    for (std::size_t i = 0; i < 6; ++i) {
      const double expected = probs.values()[i] - (i == labels[0] ? 1.0 : 0.0);
      CHECK(x.grad()[i] == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("restricted-to-non-true drsl variant") {
  const Tensor logits(Shape{1, 4}, std::vector<double>{2.0, 1.0, 0.5, -1.0});
  const std::vector<std::size_t> label{0};
  // distance measured on renormalized non-true probabilities vs uniform(C-1)
  const Tensor probs = softmax(nullptr, logits);
  std::vector<double> rest;
  double total = 0.0;
  for (std::size_t i = 1; i < 4; ++i) {
    rest.push_back(probs.values()[i]);
    total += probs.values()[i];
  }
  for (double& v : rest) v /= total;
  const double expected_dist = euclidean_distance(rest, uniform_distribution(3));
  const double expected =
      ce_loss(nullptr, logits, label).item() + 0.5 * expected_dist;
  CHECK(drsl_loss(nullptr, logits, label, 0.5, DistanceMetric::Euclidean, true).item() ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("loss spec dispatch and validation") {
  const Tensor logits(Shape{2, 3}, std::vector<double>{1, 2, 3, 3, 2, 1});
  const std::vector<std::size_t> labels{2, 0};
  CHECK(loss_forward(nullptr, LossSpec::ce(), logits, labels).item() ==
        ce_loss(nullptr, logits, labels).item());
  CHECK(loss_forward(nullptr, LossSpec::gce(0.7), logits, labels).item() ==
        gce_loss(nullptr, logits, labels, 0.7).item());
  CHECK(loss_forward(nullptr, LossSpec::drsl(1.0, DistanceMetric::Cosine), logits, labels).item() ==
        drsl_loss(nullptr, logits, labels, 1.0, DistanceMetric::Cosine).item());
  CHECK_THROWS_AS(LossSpec::gce(2.0), ValueError);
  CHECK_THROWS_AS(LossSpec::drsl(-1.0), ValueError);
  CHECK(LossSpec::drsl(0.5).label() == "DRSL(tau=0.5,euclidean)");
}
