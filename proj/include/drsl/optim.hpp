#pragma once

#include <cstdint>
#include <vector>

#include "drsl/tensor.hpp"

namespace drsl {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// Per-parameter first/second moment estimates plus the shared step counter.
class AdamState {
 public:
  AdamState(const std::vector<Tensor>& params, AdamConfig config = {});

  const AdamConfig& config() const { return config_; }
  std::uint64_t step_count() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;

  friend void adam_step(std::vector<Tensor>& params, AdamState& state);
};

// One bias-corrected Adam update. Parameters without a populated gradient are
// treated as having zero gradient and stay unchanged.
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace drsl
