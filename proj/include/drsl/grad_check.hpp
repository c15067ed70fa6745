#pragma once

#include <cstdint>
#include <functional>

#include "drsl/tensor.hpp"

namespace drsl {

// A scalar-valued differentiable function of one tensor argument.
using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;

// Compares the tape gradient of `fn` at `point` against central finite
// differences and returns the max over coordinates of
//   |analytic - numeric| / max(1e-12, |analytic| + |numeric|).
//
// `max_coords` > 0 checks a seeded random subset of coordinates instead of
// all of them; intended for large inputs where 2*numel evaluations are too
// expensive.
double grad_check(const ScalarFn& fn, const Tensor& point, double h,
                  std::size_t max_coords = 0, std::uint64_t sample_seed = 0);

}  // namespace drsl
