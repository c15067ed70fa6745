#include "drsl/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drsl/rng.hpp"

namespace drsl {

namespace {

double eval_value(const ScalarFn& fn, const Tensor& point) {
  Tape tape;
  Tensor out = fn(tape, point);
  if (!out.defined() || out.numel() != 1) {
    throw ContractError("grad_check: function must be scalar-valued");
  }
  return out.item();
}

}  // namespace

double grad_check(const ScalarFn& fn, const Tensor& point, double h, std::size_t max_coords,
                  std::uint64_t sample_seed) {
  if (!(h > 0.0)) throw ValueError("grad_check: h must be positive");

  // Analytic pass.
  Tensor x = point.clone(/*requires_grad=*/true);
  Tape tape;
  Tensor out = fn(tape, x);
  if (!out.defined() || out.numel() != 1) {
    throw ContractError("grad_check: function must be scalar-valued");
  }
  std::vector<double> analytic(x.numel(), 0.0);
  if (tape.produced(out)) {  // a constant function records nothing
    tape.backward(out);
    if (x.has_grad()) {
      auto g = x.grad();
      analytic.assign(g.begin(), g.end());
    }
  }

  // Coordinates to probe.
  std::vector<std::size_t> coords(point.numel());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (max_coords > 0 && max_coords < coords.size()) {
    Rng rng(sample_seed);
    rng.shuffle(coords);
    coords.resize(max_coords);
    std::sort(coords.begin(), coords.end());
  }

  Tensor probe = point.clone(/*requires_grad=*/false);
  auto pv = probe.values_mut();
  double worst = 0.0;
  for (std::size_t c : coords) {
    const double orig = pv[c];
    pv[c] = orig + h;
    const double fp = eval_value(fn, probe);
    pv[c] = orig - h;
    const double fm = eval_value(fn, probe);
    pv[c] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max(1e-12, std::abs(analytic[c]) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic[c] - numeric) / denom);
  }
  return worst;
}

}  // namespace drsl
