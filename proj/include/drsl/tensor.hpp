#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "drsl/errors.hpp"

namespace drsl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until backward touches this node

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

// An n-dimensional 64-bit float array. Copies are shallow: a Tensor is a
// handle to a shared node, which is what lets the tape address the same
// storage the caller holds. Values are never mutated by graph operations;
// in-place access (values_mut) is reserved for optimizer updates and data
// loading, outside any live tape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  std::span<double> values_mut();
  double item() const;  // scalar tensors only

  bool requires_grad() const;
  void set_requires_grad(bool rg);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  bool same_node(const Tensor& other) const { return node_.get() == other.node_.get(); }

  // Deep copy of values; gradient state is not copied.
  Tensor clone(bool requires_grad = false) const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Record of the primitive operations applied during one forward pass.
// Replaying it backward visits operations in exact reverse order of
// recording; a tape is consumed by at most one backward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return records_.size(); }
  bool consumed() const { return consumed_; }

  void record(const Tensor& output, std::function<void()> backprop);
  bool produced(const Tensor& t) const;

  // Populates grad on every requires_grad tensor reachable from `output`,
  // accumulating additively across fan-out. `output` must be a scalar
  // produced through this tape.
  void backward(const Tensor& output);

 private:
  struct Record {
    std::shared_ptr<detail::Node> out;
    std::function<void()> backprop;
  };
  std::vector<Record> records_;
  std::unordered_set<const detail::Node*> produced_;
  bool consumed_ = false;
};

// ---- primitive operations -------------------------------------------------
//
// Every op takes the tape as its first argument; pass nullptr for a pure
// value computation (nothing is recorded and outputs carry no grad flag).
// With a tape, an op records itself iff any input requires grad.

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor div(Tape* tape, const Tensor& a, const Tensor& b);

// out = x * scale + shift (elementwise, compile-time constants).
Tensor affine(Tape* tape, const Tensor& x, double scale, double shift);

// Row-vector broadcasts over a (R, C) matrix.
Tensor add_rowvec(Tape* tape, const Tensor& m, const Tensor& v);
Tensor sub_rowvec(Tape* tape, const Tensor& m, const Tensor& v);
Tensor mul_rowvec(Tape* tape, const Tensor& m, const Tensor& v);
// Divide each row of m (R, C) by the matching entry of v (R).
Tensor div_colvec(Tape* tape, const Tensor& m, const Tensor& v);

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);

// 2-D convolution, stride 1, zero padding. x: (B, Cin, H, W),
// w: (Cout, Cin, kh, kw), bias: (Cout) or undefined.
Tensor conv2d(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& bias,
              std::size_t padding);

// 2x2 max pooling with stride 2; spatial dims must be even.
Tensor maxpool2x2(Tape* tape, const Tensor& x);

Tensor relu(Tape* tape, const Tensor& x);
Tensor exp(Tape* tape, const Tensor& x);
Tensor log(Tape* tape, const Tensor& x);   // requires x > 0
Tensor sqrt(Tape* tape, const Tensor& x);  // requires x >= 0; d/dx at 0 taken as 0
Tensor pow_scalar(Tape* tape, const Tensor& x, double exponent);  // requires x > 0
Tensor clamp_min(Tape* tape, const Tensor& x, double min_value);

Tensor sum(Tape* tape, const Tensor& x);
Tensor mean(Tape* tape, const Tensor& x);
Tensor sum_rows(Tape* tape, const Tensor& x);  // (R, C) -> (R)

// Numerically stable softmax over the last dimension of a 1-D vector or the
// rows of a 2-D matrix (max-subtraction before exponentiation).
Tensor softmax(Tape* tape, const Tensor& x);
// Row-wise log(sum(exp(row))) of a (R, C) matrix -> (R).
Tensor logsumexp_rows(Tape* tape, const Tensor& x);

// out[r] = x[r, idx[r]]; idx entries must lie in [0, C).
Tensor gather_rows(Tape* tape, const Tensor& x, const std::vector<std::size_t>& idx);
// Zeroes entry idx[r] of each row; other entries pass through.
Tensor mask_index(Tape* tape, const Tensor& x, const std::vector<std::size_t>& idx);

// Copy with a new shape of identical numel.
Tensor reshape(Tape* tape, const Tensor& x, Shape new_shape);

std::size_t argmax(std::span<const double> v);  // ties -> lowest index

}  // namespace drsl
