#include "drsl/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "drsl/binio.hpp"
#include "drsl/rng.hpp"

namespace drsl {

std::string to_string(Architecture arch) {
  return arch == Architecture::MLP ? "MLP" : "VGG-small";
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "MLP" || s == "mlp") return Architecture::MLP;
  if (s == "VGG-small" || s == "vgg-small" || s == "VGG" || s == "vgg") return Architecture::VGGSmall;
  throw ValueError("unknown architecture '" + s + "' (expected MLP or VGG-small)");
}

void ModelConfig::validate() const {
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  for (std::size_t d : input_shape) {
    if (d == 0) throw ConfigError("model: input_shape dimensions must be positive");
  }
  if (arch == Architecture::MLP) {
    if (hidden.empty()) throw ConfigError("model: MLP needs at least one hidden width");
    for (std::size_t w : hidden) {
      if (w == 0) throw ConfigError("model: MLP hidden widths must be positive");
    }
  } else {
    if (channels.empty()) throw ConfigError("model: VGG needs at least one channel count");
    for (std::size_t c : channels) {
      if (c == 0) throw ConfigError("model: VGG channels must be positive");
    }
    if (dense_hidden == 0) throw ConfigError("model: VGG dense_hidden must be positive");
    std::size_t h = input_shape[1], w = input_shape[2];
    for (std::size_t i = 0; i < channels.size(); ++i) {
      if (h % 2 != 0 || w % 2 != 0) {
        throw ConfigError("model: VGG spatial dims must halve evenly through every block");
      }
      h /= 2;
      w /= 2;
    }
  }
}

std::size_t ModelConfig::expected_param_count() const {
  std::size_t total = 0;
  if (arch == Architecture::MLP) {
    std::size_t in = input_numel();
    for (std::size_t w : hidden) {
      total += in * w + w;
      in = w;
    }
    total += in * num_classes + num_classes;
  } else {
    std::size_t cin = input_shape[0];
    std::size_t h = input_shape[1], w = input_shape[2];
    for (std::size_t cout : channels) {
      total += cout * cin * 9 + cout;   // conv a
      total += cout * cout * 9 + cout;  // conv b
      cin = cout;
      h /= 2;
      w /= 2;
    }
    const std::size_t flat = cin * h * w;
    total += flat * dense_hidden + dense_hidden;
    total += dense_hidden * num_classes + num_classes;
  }
  return total;
}

std::string ModelConfig::serialize() const {
  std::ostringstream os;
  os << "arch=" << to_string(arch) << ";input=" << input_shape[0] << "," << input_shape[1] << ","
     << input_shape[2] << ";classes=" << num_classes << ";";
  if (arch == Architecture::MLP) {
    os << "hidden=";
    for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "," : "") << hidden[i];
  } else {
    os << "channels=";
    for (std::size_t i = 0; i < channels.size(); ++i) os << (i ? "," : "") << channels[i];
    os << ";dense=" << dense_hidden;
  }
  return os.str();
}

namespace {

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return out;
}

}  // namespace

ModelConfig ModelConfig::deserialize(const std::string& text) {
  ModelConfig cfg;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ';')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq);
    const std::string val = field.substr(eq + 1);
    if (key == "arch") {
      cfg.arch = architecture_from_string(val);
    } else if (key == "input") {
      auto dims = parse_size_list(val);
      if (dims.size() != 3) throw FormatError("checkpoint: bad input shape '" + val + "'");
      cfg.input_shape = {dims[0], dims[1], dims[2]};
    } else if (key == "classes") {
      cfg.num_classes = static_cast<std::size_t>(std::stoull(val));
    } else if (key == "hidden") {
      cfg.hidden = parse_size_list(val);
    } else if (key == "channels") {
      cfg.channels = parse_size_list(val);
    } else if (key == "dense") {
      cfg.dense_hidden = static_cast<std::size_t>(std::stoull(val));
    }
  }
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::mlp_mnist() {
  ModelConfig cfg;
  cfg.arch = Architecture::MLP;
  cfg.input_shape = {1, 28, 28};
  cfg.num_classes = 10;
  cfg.hidden = {256, 128};
  return cfg;
}

ModelConfig ModelConfig::vgg_small_cifar10() {
  ModelConfig cfg;
  cfg.arch = Architecture::VGGSmall;
  cfg.input_shape = {3, 32, 32};
  cfg.num_classes = 10;
  cfg.channels = {32, 64, 128};
  cfg.dense_hidden = 640;  // lands the total near the 1.6M parameter budget
  return cfg;
}

namespace {

// He-normal weight tensor: N(0, sqrt(2 / fan_in)) from the shared stream.
Tensor he_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  std::vector<double> data(shape_numel(shape));
  const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& v : data) v = rng.next_normal() * scale;
  return Tensor(std::move(shape), std::move(data), /*requires_grad=*/true);
}

Tensor zero_bias(std::size_t n) { return Tensor(Shape{n}, 0.0, /*requires_grad=*/true); }

}  // namespace

Model::Model(ModelConfig config, std::uint64_t init_seed)
    : config_(std::move(config)), init_seed_(init_seed) {
  config_.validate();
  Rng rng(mix_seed(init_seed_, 0x6d6f64656cULL));
  if (config_.arch == Architecture::MLP) {
    std::size_t in = config_.input_numel();
    for (std::size_t li = 0; li < config_.hidden.size(); ++li) {
      const std::size_t out = config_.hidden[li];
      names_.push_back("fc" + std::to_string(li + 1) + ".weight");
      params_.push_back(he_weight(Shape{in, out}, in, rng));
      names_.push_back("fc" + std::to_string(li + 1) + ".bias");
      params_.push_back(zero_bias(out));
      in = out;
    }
    names_.push_back("head.weight");
    params_.push_back(he_weight(Shape{in, config_.num_classes}, in, rng));
    names_.push_back("head.bias");
    params_.push_back(zero_bias(config_.num_classes));
  } else {
    std::size_t cin = config_.input_shape[0];
    std::size_t h = config_.input_shape[1], w = config_.input_shape[2];
    for (std::size_t bi = 0; bi < config_.channels.size(); ++bi) {
      const std::size_t cout = config_.channels[bi];
      const std::string base = "block" + std::to_string(bi + 1);
      names_.push_back(base + ".conv_a.weight");
      params_.push_back(he_weight(Shape{cout, cin, 3, 3}, cin * 9, rng));
      names_.push_back(base + ".conv_a.bias");
      params_.push_back(zero_bias(cout));
      names_.push_back(base + ".conv_b.weight");
      params_.push_back(he_weight(Shape{cout, cout, 3, 3}, cout * 9, rng));
      names_.push_back(base + ".conv_b.bias");
      params_.push_back(zero_bias(cout));
      cin = cout;
      h /= 2;
      w /= 2;
    }
    const std::size_t flat = cin * h * w;
    names_.push_back("dense.weight");
    params_.push_back(he_weight(Shape{flat, config_.dense_hidden}, flat, rng));
    names_.push_back("dense.bias");
    params_.push_back(zero_bias(config_.dense_hidden));
    names_.push_back("head.weight");
    params_.push_back(he_weight(Shape{config_.dense_hidden, config_.num_classes},
                                config_.dense_hidden, rng));
    names_.push_back("head.bias");
    params_.push_back(zero_bias(config_.num_classes));
  }
}

Tensor Model::forward(Tape* tape, const Tensor& batch) const {
  if (batch.ndim() != 4 || batch.dim(1) != config_.input_shape[0] ||
      batch.dim(2) != config_.input_shape[1] || batch.dim(3) != config_.input_shape[2]) {
    throw ShapeError("forward: batch shape " + shape_to_string(batch.shape()) +
                     " does not match input shape (B, " + std::to_string(config_.input_shape[0]) +
                     ", " + std::to_string(config_.input_shape[1]) + ", " +
                     std::to_string(config_.input_shape[2]) + ")");
  }
  return config_.arch == Architecture::MLP ? forward_mlp(tape, batch) : forward_vgg(tape, batch);
}

Tensor Model::forward_mlp(Tape* tape, const Tensor& batch) const {
  const std::size_t b = batch.dim(0);
  Tensor x = reshape(tape, batch, Shape{b, config_.input_numel()});
  const std::size_t layers = config_.hidden.size();
  for (std::size_t li = 0; li < layers; ++li) {
    x = add_rowvec(tape, matmul(tape, x, params_[2 * li]), params_[2 * li + 1]);
    x = relu(tape, x);
  }
  return add_rowvec(tape, matmul(tape, x, params_[2 * layers]), params_[2 * layers + 1]);
}

Tensor Model::forward_vgg(Tape* tape, const Tensor& batch) const {
  Tensor x = batch;
  std::size_t pi = 0;
  for (std::size_t bi = 0; bi < config_.channels.size(); ++bi) {
    x = relu(tape, conv2d(tape, x, params_[pi], params_[pi + 1], 1));
    x = relu(tape, conv2d(tape, x, params_[pi + 2], params_[pi + 3], 1));
    x = maxpool2x2(tape, x);
    pi += 4;
  }
  const std::size_t b = x.dim(0);
  x = reshape(tape, x, Shape{b, x.numel() / b});
  x = relu(tape, add_rowvec(tape, matmul(tape, x, params_[pi]), params_[pi + 1]));
  return add_rowvec(tape, matmul(tape, x, params_[pi + 2]), params_[pi + 3]);
}

std::size_t Model::param_count() const {
  std::size_t total = 0;
  for (const Tensor& p : params_) total += p.numel();
  return total;
}

void Model::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void Model::freeze() {
  for (Tensor& p : params_) {
    p.zero_grad();
    p.set_requires_grad(false);
  }
}

bool Model::frozen() const {
  for (const Tensor& p : params_) {
    if (p.requires_grad()) return false;
  }
  return true;
}

void Model::set_trainable() {
  for (Tensor& p : params_) p.set_requires_grad(true);
}

// ---- checkpoint container ---------------------------------------------------
//
// Layout (all integers little-endian):
//   magic "DRSL" | u32 version | u32 len + config text | u64 init_seed |
//   u32 param count | per param: u32 len + name, u32 ndim, u64 dims...,
//   f64 data.

namespace {

using namespace binio;

constexpr std::uint32_t kVersion = 1;

}  // namespace

void Model::save_checkpoint(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("checkpoint: cannot open '" + path + "' for writing");
  os.write(binio::kMagic, 4);
  put_u32(os, kVersion);
  const std::string cfg = config_.serialize();
  put_u32(os, static_cast<std::uint32_t>(cfg.size()));
  os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  put_u64(os, init_seed_);
  put_u32(os, static_cast<std::uint32_t>(params_.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const std::string& name = names_[i];
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Shape& shape = params_[i].shape();
    put_u32(os, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) put_u64(os, d);
    for (double v : params_[i].values()) put_f64(os, v);
  }
  if (!os) throw FormatError("checkpoint: write to '" + path + "' failed");
}

Model Model::load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("checkpoint: cannot open '" + path + "'");
  check_magic(is, path);
  const std::uint32_t version = get_u32(is);
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t cfg_len = get_u32(is);
  std::string cfg_text(cfg_len, '\0');
  is.read(cfg_text.data(), cfg_len);
  if (!is) throw FormatError("checkpoint: truncated config");
  const std::uint64_t seed = get_u64(is);

  Model model(ModelConfig::deserialize(cfg_text), seed);
  const std::uint32_t nparams = get_u32(is);
  if (nparams != model.params_.size()) {
    throw FormatError("checkpoint: parameter count mismatch");
  }
  for (std::size_t i = 0; i < nparams; ++i) {
    const std::uint32_t name_len = get_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is || name != model.names_[i]) throw FormatError("checkpoint: parameter name mismatch");
    const std::uint32_t ndim = get_u32(is);
    Shape shape(ndim);
    for (std::uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<std::size_t>(get_u64(is));
    if (shape != model.params_[i].shape()) throw FormatError("checkpoint: parameter shape mismatch");
    auto dst = model.params_[i].values_mut();
    for (double& v : dst) v = get_f64(is);
  }
  model.freeze();  // checkpoints hold finished models
  return model;
}

}  // namespace drsl
