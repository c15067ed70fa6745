#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "drsl/tensor.hpp"

namespace drsl {

enum class Architecture { MLP, VGGSmall };

std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& s);

struct ModelConfig {
  Architecture arch = Architecture::MLP;
  std::array<std::size_t, 3> input_shape = {1, 28, 28};  // (channels, height, width)
  std::size_t num_classes = 10;
  std::vector<std::size_t> hidden = {256, 128};     // MLP hidden widths
  std::vector<std::size_t> channels = {32, 64, 128};  // VGG block output channels
  std::size_t dense_hidden = 640;                     // VGG dense hidden width

  void validate() const;
  std::size_t input_numel() const { return input_shape[0] * input_shape[1] * input_shape[2]; }
  // Exact scalar parameter count, computable before allocation.
  std::size_t expected_param_count() const;
  std::string serialize() const;
  static ModelConfig deserialize(const std::string& text);

  // MLP 784-256-128-10 for 28x28 grayscale input (~235k parameters).
  static ModelConfig mlp_mnist();
  // VGG-style CNN for CIFAR-10 input, ~1.6M parameters.
  static ModelConfig vgg_small_cifar10();
};

// A parameterized classifier f(x; theta). Parameters are held in a stable
// declaration order; forward is pure.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  std::uint64_t init_seed() const { return init_seed_; }

  // batch: (B, channels, height, width) matching config.input_shape.
  // Returns logits (B, num_classes). Records on the tape when gradients are
  // requested for the parameters and/or the batch input.
  Tensor forward(Tape* tape, const Tensor& batch) const;

  std::size_t param_count() const;
  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }

  void zero_grad();
  // Clears requires_grad on every parameter; a frozen model is immutable and
  // safe to share across threads.
  void freeze();
  bool frozen() const;
  void set_trainable();

  void save_checkpoint(const std::string& path) const;
  static Model load_checkpoint(const std::string& path);

 private:
  ModelConfig config_;
  std::uint64_t init_seed_ = 0;
  std::vector<Tensor> params_;
  std::vector<std::string> names_;

  Tensor forward_mlp(Tape* tape, const Tensor& batch) const;
  Tensor forward_vgg(Tape* tape, const Tensor& batch) const;
};

}  // namespace drsl
