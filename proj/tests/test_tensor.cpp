#include <doctest.h>

#include <cmath>
#include <cstring>

#include "drsl/grad_check.hpp"
#include "drsl/optim.hpp"
#include "drsl/rng.hpp"
#include "drsl/tensor.hpp"

using namespace drsl;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.next_uniform(lo, hi);
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

TEST_CASE("tensor basics and invariants") {
  Tensor t(Shape{2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.values()[5] == 1.5);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1.0}), ShapeError);
  CHECK_THROWS_AS(t.item(), ContractError);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  CHECK_THROWS_AS(t.grad(), ContractError);
}

TEST_CASE("softmax worked examples") {
  SUBCASE("symmetry forces uniform") {
    Tensor out = softmax(nullptr, Tensor(Shape{4}, std::vector<double>{0, 0, 0, 0}));
    for (double v : out.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("reference values") {
    Tensor out = softmax(nullptr, Tensor(Shape{3}, std::vector<double>{1, 2, 3}));
    CHECK(out.values()[0] == doctest::Approx(0.09003).epsilon(1e-4));
    CHECK(out.values()[1] == doctest::Approx(0.24473).epsilon(1e-4));
    CHECK(out.values()[2] == doctest::Approx(0.66524).epsilon(1e-4));
  }
  SUBCASE("stable under large logits") {
    Tensor out = softmax(nullptr, Tensor(Shape{3}, std::vector<double>{1000, 0, 0}));
    CHECK(out.values()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::isfinite(out.values()[1]));
    CHECK(out.values()[1] < 1e-300);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(softmax(nullptr, Tensor(Shape{2, 2, 2}, 0.0)), ShapeError);
    CHECK_THROWS_AS(
        softmax(nullptr, Tensor(Shape{2}, std::vector<double>{1.0, std::nan("")})),
        NumericError);
  }
}

TEST_CASE("softmax properties: normalization and shift invariance") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor x = random_tensor(Shape{7}, rng, -8.0, 8.0);
    Tensor p = softmax(nullptr, x);
    double total = 0.0;
    for (double v : p.values()) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);

    const double shift = rng.next_uniform(-50.0, 50.0);
    Tensor shifted = x.clone();
    for (double& v : shifted.values_mut()) v += shift;
    Tensor p2 = softmax(nullptr, shifted);
    for (std::size_t i = 0; i < p.numel(); ++i) {
      CHECK(std::abs(p.values()[i] - p2.values()[i]) <= 1e-9);
    }
  }
}

TEST_CASE("backward on trivial graphs") {
  SUBCASE("sum gives all-ones gradient") {
    Tensor x(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}, true);
    Tape tape;
    Tensor out = sum(&tape, x);
    tape.backward(out);
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  SUBCASE("elementwise square at x=3") {
    Tensor x(Shape{1}, std::vector<double>{3.0}, true);
    Tape tape;
    Tensor out = sum(&tape, mul(&tape, x, x));
    tape.backward(out);
    CHECK(x.grad()[0] == 6.0);
  }
  SUBCASE("gradient accumulation doubles through fan-out") {
    Rng rng(5);
    Tensor x = random_tensor(Shape{4}, rng);
    Tensor x1 = x.clone(true);
    {
      Tape tape;
      Tensor s = sum(&tape, exp(&tape, x1));
      tape.backward(s);
    }
    std::vector<double> single(x1.grad().begin(), x1.grad().end());

    Tensor x2 = x.clone(true);
    {
      Tape tape;
      Tensor e = exp(&tape, x2);
      Tensor s = add(&tape, sum(&tape, e), sum(&tape, e));
      tape.backward(s);
    }
    for (std::size_t i = 0; i < single.size(); ++i) {
      CHECK(x2.grad()[i] == 2.0 * single[i]);
    }
  }
}

TEST_CASE("backward contract errors") {
  Tensor x(Shape{3}, std::vector<double>{1, 2, 3}, true);
  Tape tape;
  Tensor y = relu(&tape, x);
  CHECK_THROWS_AS(tape.backward(y), ContractError);  // non-scalar
  Tensor s = sum(&tape, y);
  tape.backward(s);
  CHECK_THROWS_AS(tape.backward(s), ContractError);  // consumed

  Tape other;
  Tensor z = sum(nullptr, x);
  CHECK_THROWS_AS(other.backward(z), ContractError);  // not produced through the tape
}

TEST_CASE("backward determinism: identical tape gives bit-identical gradients") {
  Rng rng(17);
  Tensor base = random_tensor(Shape{6, 5}, rng);
  Tensor w = random_tensor(Shape{5, 4}, rng);
  std::vector<double> first;
  for (int round = 0; round < 2; ++round) {
    Tensor x = base.clone(true);
    Tape tape;
    Tensor out = mean(&tape, relu(&tape, matmul(&tape, x, w)));
    tape.backward(out);
    if (round == 0) {
      first.assign(x.grad().begin(), x.grad().end());
    } else {
      CHECK(std::memcmp(first.data(), x.grad().data(), first.size() * sizeof(double)) == 0);
    }
  }
}

TEST_CASE("grad_check on every primitive op") {
  Rng rng(23);
  const double h = 1e-6;
  const double tol = 1e-4;

  auto check = [&](const char* name, const ScalarFn& fn, const Tensor& point) {
    const double err = grad_check(fn, point, h);
    INFO(name);
    CHECK(err <= tol);
  };

  for (int trial = 0; trial < 8; ++trial) {
    Tensor a = random_tensor(Shape{3, 4}, rng);
    Tensor b = random_tensor(Shape{3, 4}, rng, 0.5, 2.0);
    Tensor v = random_tensor(Shape{4}, rng, 0.5, 2.0);
    Tensor col = random_tensor(Shape{3}, rng, 0.5, 2.0);

    check("add", [&](Tape& t, const Tensor& x) { return sum(&t, add(&t, x, b)); }, a);
    check("sub", [&](Tape& t, const Tensor& x) { return sum(&t, sub(&t, x, b)); }, a);
    check("mul", [&](Tape& t, const Tensor& x) { return sum(&t, mul(&t, x, b)); }, a);
    check("div_num", [&](Tape& t, const Tensor& x) { return sum(&t, div(&t, x, b)); }, a);
    check("div_den", [&](Tape& t, const Tensor& x) { return sum(&t, div(&t, a, x)); }, b);
    check("affine", [&](Tape& t, const Tensor& x) { return sum(&t, affine(&t, x, -1.7, 0.4)); }, a);
    check("add_rowvec_m", [&](Tape& t, const Tensor& x) { return sum(&t, add_rowvec(&t, x, v)); }, a);
    check("add_rowvec_v", [&](Tape& t, const Tensor& x) { return sum(&t, add_rowvec(&t, a, x)); }, v);
    check("sub_rowvec_v", [&](Tape& t, const Tensor& x) { return sum(&t, sub_rowvec(&t, a, x)); }, v);
    check("mul_rowvec_m", [&](Tape& t, const Tensor& x) { return sum(&t, mul_rowvec(&t, x, v)); }, a);
    check("mul_rowvec_v", [&](Tape& t, const Tensor& x) { return sum(&t, mul_rowvec(&t, a, x)); }, v);
    check("div_colvec_m", [&](Tape& t, const Tensor& x) { return sum(&t, div_colvec(&t, x, col)); }, a);
    check("div_colvec_v", [&](Tape& t, const Tensor& x) { return sum(&t, div_colvec(&t, a, x)); }, col);
    check("relu", [&](Tape& t, const Tensor& x) { return sum(&t, relu(&t, x)); },
          random_tensor(Shape{3, 4}, rng, 0.2, 2.0));
    check("exp", [&](Tape& t, const Tensor& x) { return sum(&t, exp(&t, x)); }, a);
    check("log", [&](Tape& t, const Tensor& x) { return sum(&t, log(&t, x)); }, b);
    check("sqrt", [&](Tape& t, const Tensor& x) { return sum(&t, sqrt(&t, x)); }, b);
    check("pow_scalar", [&](Tape& t, const Tensor& x) { return sum(&t, pow_scalar(&t, x, 0.7)); }, b);
    check("clamp_min",
          [&](Tape& t, const Tensor& x) { return sum(&t, clamp_min(&t, x, 0.1)); },
          random_tensor(Shape{3, 4}, rng, 0.5, 2.0));
    check("mean", [&](Tape& t, const Tensor& x) { return mean(&t, x); }, a);
    check("sum_rows",
          [&](Tape& t, const Tensor& x) { return sum(&t, mul(&t, sum_rows(&t, x), col)); }, a);
    check("softmax",
          [&](Tape& t, const Tensor& x) { return sum(&t, mul(&t, softmax(&t, x), b)); }, a);
    check("logsumexp",
          [&](Tape& t, const Tensor& x) { return sum(&t, logsumexp_rows(&t, x)); }, a);

    const std::vector<std::size_t> idx{1, 3, 0};
    check("gather_rows",
          [&](Tape& t, const Tensor& x) { return sum(&t, gather_rows(&t, x, idx)); }, a);
    check("mask_index",
          [&](Tape& t, const Tensor& x) { return sum(&t, mul(&t, mask_index(&t, x, idx), b)); }, a);
    check("reshape",
          [&](Tape& t, const Tensor& x) {
            return sum(&t, mul(&t, reshape(&t, x, Shape{4, 3}), reshape(&t, b, Shape{4, 3})));
          },
          a);

    // matmul, both operands
    Tensor ma = random_tensor(Shape{3, 5}, rng);
    Tensor mb = random_tensor(Shape{5, 2}, rng);
    check("matmul_a", [&](Tape& t, const Tensor& x) { return sum(&t, matmul(&t, x, mb)); }, ma);
    check("matmul_b", [&](Tape& t, const Tensor& x) { return sum(&t, matmul(&t, ma, x)); }, mb);

    // conv and pooling on a small image stack
    Tensor img = random_tensor(Shape{2, 2, 6, 6}, rng);
    Tensor kern = random_tensor(Shape{3, 2, 3, 3}, rng);
    Tensor bias = random_tensor(Shape{3}, rng);
    check("conv2d_x",
          [&](Tape& t, const Tensor& x) { return sum(&t, conv2d(&t, x, kern, bias, 1)); }, img);
    check("conv2d_w",
          [&](Tape& t, const Tensor& x) { return sum(&t, conv2d(&t, img, x, bias, 1)); }, kern);
    check("conv2d_b",
          [&](Tape& t, const Tensor& x) { return sum(&t, conv2d(&t, img, kern, x, 1)); }, bias);
    check("maxpool", [&](Tape& t, const Tensor& x) { return sum(&t, maxpool2x2(&t, x)); }, img);
  }
}

TEST_CASE("grad_check contract cases") {
  Tensor x(Shape{3}, std::vector<double>{1, 2, 3});
  SUBCASE("linear function is exact") {
    const double err =
        grad_check([](Tape& t, const Tensor& p) { return sum(&t, affine(&t, p, 3.0, 1.0)); }, x,
                   1e-6);
    CHECK(err <= 1e-10);
  }
  SUBCASE("constant function has zero error") {
    const double err =
        grad_check([](Tape&, const Tensor&) { return Tensor::scalar(5.0); }, x, 1e-6);
    CHECK(err == 0.0);
  }
  SUBCASE("non-scalar function rejected") {
    CHECK_THROWS_AS(
        grad_check([](Tape& t, const Tensor& p) { return relu(&t, p); }, x, 1e-6),
        ContractError);
  }
  SUBCASE("sampled coordinates stay within tolerance") {
    Rng rng(3);
    Tensor big = random_tensor(Shape{40}, rng);
    const double err = grad_check(
        [](Tape& t, const Tensor& p) { return mean(&t, exp(&t, p)); }, big, 1e-6, 10, 99);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("adam optimizer") {
  SUBCASE("zero gradients leave parameters unchanged") {
    std::vector<Tensor> params{Tensor(Shape{3}, std::vector<double>{1, 2, 3}, true)};
    AdamState state(params);
    params[0].zero_grad();
    adam_step(params, state);
    CHECK(params[0].values()[0] == 1.0);
    CHECK(params[0].values()[2] == 3.0);
  }
  SUBCASE("first bias-corrected step has magnitude ~lr") {
    std::vector<Tensor> params{Tensor(Shape{1}, std::vector<double>{1.0}, true)};
    AdamState state(params);
    {
      Tape tape;
      Tensor loss = sum(&tape, params[0]);  // d loss / d p = 1
      tape.backward(loss);
    }
    adam_step(params, state);
    CHECK(params[0].values()[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-7));
    CHECK(state.step_count() == 1);
  }
  SUBCASE("identical parameters with identical gradients update identically") {
    std::vector<Tensor> params{Tensor(Shape{2}, std::vector<double>{0.5, 0.5}, true),
                               Tensor(Shape{2}, std::vector<double>{0.5, 0.5}, true)};
    AdamState state(params);
    {
      Tape tape;
      Tensor loss = add(&tape, mean(&tape, mul(&tape, params[0], params[0])),
                        mean(&tape, mul(&tape, params[1], params[1])));
      tape.backward(loss);
    }
    adam_step(params, state);
    CHECK(params[0].values()[0] == params[1].values()[0]);
    CHECK(params[0].values()[1] == params[1].values()[1]);
  }
  SUBCASE("config validation") {
    std::vector<Tensor> params{Tensor(Shape{1}, 0.0, true)};
    CHECK_THROWS_AS(AdamState(params, AdamConfig{-1.0, 0.9, 0.999, 1e-8}), ValueError);
    CHECK_THROWS_AS(AdamState(params, AdamConfig{1e-3, 1.0, 0.999, 1e-8}), ValueError);
  }
}
