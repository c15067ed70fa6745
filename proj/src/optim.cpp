#include "drsl/optim.hpp"

#include <cmath>

namespace drsl {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ValueError("adam: lr must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0) throw ValueError("adam: beta1 must be in [0, 1)");
  if (beta2 < 0.0 || beta2 >= 1.0) throw ValueError("adam: beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ValueError("adam: eps must be positive");
}

AdamState::AdamState(const std::vector<Tensor>& params, AdamConfig config) : config_(config) {
  config_.validate();
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor& p : params) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (params.size() != state.m_.size()) {
    throw ShapeError("adam_step: parameter count does not match state");
  }
  state.t_ += 1;
  const AdamConfig& c = state.config_;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t_));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    if (p.numel() != state.m_[pi].size()) {
      throw ShapeError("adam_step: parameter shape does not match state");
    }
    if (!p.has_grad()) continue;  // zero gradient: no movement
    auto g = p.grad();
    auto pv = p.values_mut();
    auto& m = state.m_[pi];
    auto& v = state.v_[pi];
    for (std::size_t i = 0; i < pv.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      pv[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace drsl
