#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "drsl/grad_check.hpp"
#include "drsl/losses.hpp"
#include "drsl/model.hpp"
#include "drsl/rng.hpp"

using namespace drsl;

namespace {

Tensor random_batch(const ModelConfig& cfg, std::size_t b, Rng& rng) {
  Shape shape{b, cfg.input_shape[0], cfg.input_shape[1], cfg.input_shape[2]};
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.next_double01();
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

TEST_CASE("initialization is seed-deterministic") {
  const ModelConfig cfg = ModelConfig::mlp_mnist();
  Model a(cfg, 7), b(cfg, 7), c(cfg, 8);
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto va = a.parameters()[i].values();
    const auto vb = b.parameters()[i].values();
    const auto vc = c.parameters()[i].values();
    if (std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) != 0) all_equal = false;
    if (std::memcmp(va.data(), vc.data(), va.size() * sizeof(double)) != 0) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);
  // biases start at zero
  CHECK(a.parameters()[1].values()[0] == 0.0);
}

TEST_CASE("parameter counts") {
  SUBCASE("mlp closed form") {
    const ModelConfig cfg = ModelConfig::mlp_mnist();
    CHECK(cfg.expected_param_count() == 235146);  // 784*256+256 + 256*128+128 + 128*10+10
    Model model(cfg, 0);
    CHECK(model.param_count() == 235146);
  }
  SUBCASE("single linear layer 10 -> 10") {
    ModelConfig cfg;
    cfg.arch = Architecture::MLP;
    cfg.input_shape = {1, 1, 10};
    cfg.num_classes = 10;
    cfg.hidden = {10};
    // hidden 10->10 with bias plus head 10->10 with bias
    CHECK(cfg.expected_param_count() == 110 + 110);
  }
  SUBCASE("vgg-small lands in the 1.6M budget band") {
    const ModelConfig cfg = ModelConfig::vgg_small_cifar10();
    Model model(cfg, 0);
    CHECK(model.param_count() == cfg.expected_param_count());
    CHECK(model.param_count() >= 1440000);
    CHECK(model.param_count() <= 1760000);
  }
}

TEST_CASE("forward is pure and batch-consistent") {
  const ModelConfig cfg = ModelConfig::mlp_mnist();
  Model model(cfg, 3);
  Rng rng(9);
  Tensor one = random_batch(cfg, 1, rng);

  // batch of identical inputs -> identical logit rows
  std::vector<double> rep;
  for (int i = 0; i < 4; ++i) {
    rep.insert(rep.end(), one.values().begin(), one.values().end());
  }
  Tensor four(Shape{4, 1, 28, 28}, std::move(rep));
  Tensor logits = model.forward(nullptr, four);
  CHECK(logits.shape() == Shape{4, 10});
  for (std::size_t r = 1; r < 4; ++r) {
    for (std::size_t c = 0; c < 10; ++c) {
      CHECK(logits.values()[r * 10 + c] == logits.values()[c]);
    }
  }
  // purity: same input twice gives bit-identical output
  Tensor again = model.forward(nullptr, four);
  CHECK(std::memcmp(logits.values().data(), again.values().data(), 40 * sizeof(double)) == 0);

  CHECK_THROWS_AS(model.forward(nullptr, Tensor(Shape{2, 1, 14, 14}, 0.0)), ShapeError);
}

TEST_CASE("zeroed final layer gives uniform softmax") {
  const ModelConfig cfg = ModelConfig::mlp_mnist();
  Model model(cfg, 1);
  auto& params = model.parameters();
  // head weight and bias are the last two parameters
  for (double& v : params[params.size() - 2].values_mut()) v = 0.0;
  for (double& v : params[params.size() - 1].values_mut()) v = 0.0;
  Rng rng(10);
  Tensor batch = random_batch(cfg, 3, rng);
  Tensor probs = softmax(nullptr, model.forward(nullptr, batch));
  for (double p : probs.values()) CHECK(p == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("tiny hand-set mlp matches hand computation") {
  ModelConfig cfg;
  cfg.arch = Architecture::MLP;
  cfg.input_shape = {1, 1, 2};
  cfg.num_classes = 2;
  cfg.hidden = {2};
  Model model(cfg, 0);
  // x -> W1 x + b1 -> relu -> W2 h + b2, weights stored (in, out)
  auto w1 = model.parameters()[0].values_mut();
  w1[0] = 1.0; w1[1] = -1.0; w1[2] = 2.0; w1[3] = 0.5;
  auto b1 = model.parameters()[1].values_mut();
  b1[0] = 0.1; b1[1] = -0.2;
  auto w2 = model.parameters()[2].values_mut();
  w2[0] = 0.5; w2[1] = 1.0; w2[2] = -1.0; w2[3] = 2.0;
  auto b2 = model.parameters()[3].values_mut();
  b2[0] = 0.0; b2[1] = 0.3;

  Tensor x(Shape{1, 1, 1, 2}, std::vector<double>{1.0, 0.5});
  // h = relu([1*1 + 0.5*2 + 0.1, 1*(-1) + 0.5*0.5 - 0.2]) = [2.1, 0]
  // z = [2.1*0.5 + 0*(-1), 2.1*1 + 0*2 + 0.3] = [1.05, 2.4]
  Tensor logits = model.forward(nullptr, x);
  CHECK(logits.values()[0] == doctest::Approx(1.05).epsilon(1e-12));
  CHECK(logits.values()[1] == doctest::Approx(2.4).epsilon(1e-12));
}

TEST_CASE("logit translation: shifting every head bias leaves softmax unchanged") {
  const ModelConfig cfg = ModelConfig::mlp_mnist();
  Model model(cfg, 5);
  Rng rng(12);
  Tensor batch = random_batch(cfg, 2, rng);
  Tensor before = softmax(nullptr, model.forward(nullptr, batch));
  for (double& v : model.parameters().back().values_mut()) v += 3.7;
  Tensor after = softmax(nullptr, model.forward(nullptr, batch));
  for (std::size_t i = 0; i < before.numel(); ++i) {
    CHECK(std::abs(before.values()[i] - after.values()[i]) <= 1e-9);
  }
}

TEST_CASE("input gradients flow through both architectures") {
  Rng rng(13);
  SUBCASE("mlp") {
    ModelConfig cfg = ModelConfig::mlp_mnist();
    cfg.input_shape = {1, 6, 6};
    cfg.hidden = {12, 8};
    Model model(cfg, 2);
    Tensor batch = random_batch(cfg, 2, rng);
    const std::vector<std::size_t> labels{3, 7};
    const double err = grad_check(
        [&](Tape& t, const Tensor& x) {
          return ce_loss(&t, model.forward(&t, x), labels);
        },
        batch, 1e-6);
    CHECK(err <= 1e-4);
  }
  SUBCASE("vgg") {
    ModelConfig cfg = ModelConfig::vgg_small_cifar10();
    cfg.input_shape = {3, 8, 8};
    cfg.channels = {4, 8};
    cfg.dense_hidden = 16;
    Model model(cfg, 2);
    Tensor batch = random_batch(cfg, 1, rng);
    const std::vector<std::size_t> labels{1};
    const double err = grad_check(
        [&](Tape& t, const Tensor& x) {
          return drsl_loss(&t, model.forward(&t, x), labels, 0.5, DistanceMetric::Euclidean);
        },
        batch, 1e-6, 48, 7);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "drsl_ckpt_test";
  fs::create_directories(dir);
  const std::string path = (dir / "model.drsl").string();

  ModelConfig cfg = ModelConfig::mlp_mnist();
  cfg.hidden = {32, 16};
  Model model(cfg, 42);
  // make values non-trivial
  Rng rng(77);
  for (Tensor& p : model.parameters()) {
    for (double& v : p.values_mut()) v += rng.next_uniform(-0.5, 0.5);
  }
  model.freeze();
  model.save_checkpoint(path);
  const Model loaded = Model::load_checkpoint(path);

  CHECK(loaded.config().serialize() == model.config().serialize());
  CHECK(loaded.init_seed() == model.init_seed());
  CHECK(loaded.frozen());
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const auto a = model.parameters()[i].values();
    const auto b = loaded.parameters()[i].values();
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  }

  // a second save of the loaded model reproduces the file byte for byte
  const std::string path2 = (dir / "model2.drsl").string();
  loaded.save_checkpoint(path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);

  SUBCASE("bad magic is rejected") {
    const std::string bad = (dir / "bad.drsl").string();
    std::ofstream os(bad, std::ios::binary);
    os << "NOPEgarbage";
    os.close();
    CHECK_THROWS_AS(Model::load_checkpoint(bad), FormatError);
  }
  SUBCASE("truncation is rejected") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string cut = (dir / "cut.drsl").string();
    std::ofstream os(cut, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    os.close();
    CHECK_THROWS_AS(Model::load_checkpoint(cut), FormatError);
  }
}

TEST_CASE("config validation errors") {
  ModelConfig cfg = ModelConfig::mlp_mnist();
  cfg.hidden = {};
  CHECK_THROWS_AS(Model(cfg, 0), ConfigError);
  ModelConfig vgg = ModelConfig::vgg_small_cifar10();
  vgg.input_shape = {3, 30, 30};  // 30 -> 15 not divisible through three pools
  CHECK_THROWS_AS(Model(vgg, 0), ConfigError);
  ModelConfig one_class = ModelConfig::mlp_mnist();
  one_class.num_classes = 1;
  CHECK_THROWS_AS(Model(one_class, 0), ConfigError);
}
