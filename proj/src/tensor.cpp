#include "drsl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace drsl {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ")";
  return os.str();
}

namespace {

void check_shape_positive(const Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

bool want_grad(Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

// dst += src, elementwise.
void axpy(std::vector<double>& dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Allocate a zeroed grad buffer only where gradients will actually land.
void prep_grad(detail::Node* n) {
  if (n != nullptr && n->requires_grad) n->ensure_grad();
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
  check_shape_positive(shape);
  node_ = std::make_shared<detail::Node>();
  node_->value.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape_positive(shape);
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("data length " + std::to_string(values.size()) + " does not match shape " +
                     shape_to_string(shape));
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t i) const {
  const Shape& s = shape();
  if (i >= s.size()) throw ShapeError("dim index out of range");
  return s[i];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::values() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->value;
}

std::span<double> Tensor::values_mut() {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() requires a scalar tensor, shape is " + shape_to_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool rg) {
  if (!node_) throw ContractError("use of undefined tensor");
  node_->requires_grad = rg;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient; run backward first");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::clone(bool requires_grad) const {
  if (!node_) return Tensor();
  return Tensor(node_->shape, node_->value, requires_grad);
}

// ---- Tape ------------------------------------------------------------------

void Tape::record(const Tensor& output, std::function<void()> backprop) {
  if (consumed_) throw ContractError("tape already consumed by a backward pass");
  records_.push_back(Record{output.node_ptr(), std::move(backprop)});
  produced_.insert(output.node());
}

bool Tape::produced(const Tensor& t) const {
  return t.defined() && produced_.count(t.node()) > 0;
}

void Tape::backward(const Tensor& output) {
  if (consumed_) throw ContractError("tape already consumed by a backward pass");
  if (!output.defined() || output.numel() != 1) {
    throw ContractError("backward requires a scalar output");
  }
  if (!produced(output)) {
    throw ContractError("backward output was not produced through this tape");
  }
  consumed_ = true;
  output.node()->ensure_grad();
  output.node()->grad[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    it->backprop();
  }
}

// ---- elementwise binaries --------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_op(Tape* tape, const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
  check_same_shape(a, b, name);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  Tensor result(a.shape(), std::move(out), want_grad(tape, {&a, &b}));
  if (result.requires_grad()) {
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    auto on = result.node_ptr();
    tape->record(result, [an, bn, on, bwd]() {
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        bwd(an.get(), bn.get(), i, on->grad[i]);
      }
    });
    prep_grad(an.get());
    prep_grad(bn.get());
    result.node()->ensure_grad();
  }
  return result;
}

}  // namespace

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  return binary_op(tape, a, b, "add", [](double x, double y) { return x + y; },
                   [](detail::Node* an, detail::Node* bn, std::size_t i, double g) {
                     if (an->requires_grad) an->grad[i] += g;
                     if (bn->requires_grad) bn->grad[i] += g;
                   });
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
  return binary_op(tape, a, b, "sub", [](double x, double y) { return x - y; },
                   [](detail::Node* an, detail::Node* bn, std::size_t i, double g) {
                     if (an->requires_grad) an->grad[i] += g;
                     if (bn->requires_grad) bn->grad[i] -= g;
                   });
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  return binary_op(tape, a, b, "mul", [](double x, double y) { return x * y; },
                   [](detail::Node* an, detail::Node* bn, std::size_t i, double g) {
                     if (an->requires_grad) an->grad[i] += g * bn->value[i];
                     if (bn->requires_grad) bn->grad[i] += g * an->value[i];
                   });
}

Tensor div(Tape* tape, const Tensor& a, const Tensor& b) {
  return binary_op(tape, a, b, "div", [](double x, double y) { return x / y; },
                   [](detail::Node* an, detail::Node* bn, std::size_t i, double g) {
                     const double inv = 1.0 / bn->value[i];
                     if (an->requires_grad) an->grad[i] += g * inv;
                     if (bn->requires_grad) bn->grad[i] -= g * an->value[i] * inv * inv;
                   });
}

Tensor affine(Tape* tape, const Tensor& x, double scale, double shift) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * scale + shift;
  Tensor result(x.shape(), std::move(out), want_grad(tape, {&x}));
  if (result.requires_grad()) {
    auto xn = x.node_ptr();
    auto on = result.node_ptr();
    tape->record(result, [xn, on, scale]() {
      for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i] * scale;
    });
    prep_grad(xn.get());
    result.node()->ensure_grad();
  }
  return result;
}

// ---- row/column broadcasts -------------------------------------------------

namespace {

void check_rowvec(const Tensor& m, const Tensor& v, const char* op) {
  if (m.ndim() != 2 || v.ndim() != 1 || m.dim(1) != v.dim(0)) {
    throw ShapeError(std::string(op) + ": expected (R, C) and (C), got " +
                     shape_to_string(m.shape()) + " and " + shape_to_string(v.shape()));
  }
}

template <typename Fwd>
Tensor rowvec_op(Tape* tape, const Tensor& m, const Tensor& v, const char* name, Fwd fwd,
                 int mode /*0 add, 1 sub, 2 mul*/) {
  check_rowvec(m, v, name);
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  const auto mv = m.values();
  const auto vv = v.values();
  std::vector<double> out(mv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = fwd(mv[r * cols + c], vv[c]);
  }
  Tensor result(m.shape(), std::move(out), want_grad(tape, {&m, &v}));
  if (result.requires_grad()) {
    auto mn = m.node_ptr();
    auto vn = v.node_ptr();
    auto on = result.node_ptr();
    tape->record(result, [mn, vn, on, rows, cols, mode]() {
      if (mn->requires_grad) {
        if (mode == 2) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
              mn->grad[r * cols + c] += on->grad[r * cols + c] * vn->value[c];
        } else {
          axpy(mn->grad, on->grad);
        }
      }
      if (vn->requires_grad) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            const double g = on->grad[r * cols + c];
            if (mode == 0) vn->grad[c] += g;
            else if (mode == 1) vn->grad[c] -= g;
            else vn->grad[c] += g * mn->value[r * cols + c];
          }
        }
      }
    });
    prep_grad(mn.get());
    prep_grad(vn.get());
    result.node()->ensure_grad();
  }
  return result;
}

}  // namespace

Tensor add_rowvec(Tape* tape, const Tensor& m, const Tensor& v) {
  return rowvec_op(tape, m, v, "add_rowvec", [](double x, double y) { return x + y; }, 0);
}

Tensor sub_rowvec(Tape* tape, const Tensor& m, const Tensor& v) {
  return rowvec_op(tape, m, v, "sub_rowvec", [](double x, double y) { return x - y; }, 1);
}

Tensor mul_rowvec(Tape* tape, const Tensor& m, const Tensor& v) {
  return rowvec_op(tape, m, v, "mul_rowvec", [](double x, double y) { return x * y; }, 2);
}

Tensor div_colvec(Tape* tape, const Tensor& m, const Tensor& v) {
  if (m.ndim() != 2 || v.ndim() != 1 || m.dim(0) != v.dim(0)) {
    throw ShapeError("div_colvec: expected (R, C) and (R), got " + shape_to_string(m.shape()) +
                     " and " + shape_to_string(v.shape()));
  }
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  const auto mv = m.values();
  const auto vv = v.values();
  std::vector<double> out(mv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double inv = 1.0 / vv[r];
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = mv[r * cols + c] * inv;
  }
  Tensor result(m.shape(), std::move(out), want_grad(tape, {&m, &v}));
  if (result.requires_grad()) {
    auto mn = m.node_ptr();
    auto vn = v.node_ptr();
    auto on = result.node_ptr();
    tape->record(result, [mn, vn, on, rows, cols]() {
      for (std::size_t r = 0; r < rows; ++r) {
        const double inv = 1.0 / vn->value[r];
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          const double g = on->grad[r * cols + c];
          if (mn->requires_grad) mn->grad[r * cols + c] += g * inv;
          acc += g * mn->value[r * cols + c];
        }
        if (vn->requires_grad) vn->grad[r] -= acc * inv * inv;
      }
    });
    prep_grad(mn.get());
    prep_grad(vn.get());
    result.node()->ensure_grad();
  }
  return result;
}

// ---- matmul ----------------------------------------------------------------

namespace {

// C(M,N) += or = A(M,K) * B(K,N); ikj order keeps the inner loop contiguous.
void mm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k_,
           std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!accumulate) std::fill(crow, crow + n, 0.0);
    const double* arow = a + i * k_;
    for (std::size_t k = 0; k < k_; ++k) {
      const double av = arow[k];
      const double* brow = b + k * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(M,N) += A(M,K) * B(N,K)^T; rows of both operands are contiguous.
void mm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k_,
               std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k_;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k_;
      double acc = 0.0;
      for (std::size_t k = 0; k < k_; ++k) acc += arow[k] * brow[k];
      crow[j] += acc;
    }
  }
}

// C(K,N) += A(M,K)^T * B(M,N).
void mm_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k_,
               std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k_;
    const double* brow = b + i * n;
    for (std::size_t k = 0; k < k_; ++k) {
      const double av = arow[k];
      double* crow = c + k * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  mm_nn(a.values().data(), b.values().data(), out.data(), m, k, n, false);
  Tensor result(Shape{m, n}, std::move(out), want_grad(tape, {&a, &b}));
  if (result.requires_grad()) {
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    auto on = result.node_ptr();
    tape->record(result, [an, bn, on, m, k, n]() {
      if (an->requires_grad) {
        mm_nt_acc(on->grad.data(), bn->value.data(), an->grad.data(), m, n, k);
      }
      if (bn->requires_grad) {
        mm_tn_acc(an->value.data(), on->grad.data(), bn->grad.data(), m, k, n);
      }
    });
    prep_grad(an.get());
    prep_grad(bn.get());
    result.node()->ensure_grad();
  }
  return result;
}

// ---- convolution / pooling -------------------------------------------------

Tensor conv2d(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& bias,
              std::size_t padding) {
  if (x.ndim() != 4 || w.ndim() != 4) {
    throw ShapeError("conv2d: expected x (B,Cin,H,W) and w (Cout,Cin,kh,kw)");
  }
  const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin) throw ShapeError("conv2d: channel mismatch");
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != cout)) {
    throw ShapeError("conv2d: bias must be (Cout)");
  }
  if (h + 2 * padding < kh || wd + 2 * padding < kw) throw ShapeError("conv2d: kernel larger than padded input");
  const std::size_t oh = h + 2 * padding - kh + 1;
  const std::size_t ow = wd + 2 * padding - kw + 1;

  const auto xv = x.values();
  const auto wv = w.values();
  std::vector<double> out(batch * cout * oh * ow, 0.0);
  const long p = static_cast<long>(padding);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    for (std::size_t co = 0; co < cout; ++co) {
      const double bval = bias.defined() ? bias.values()[co] : 0.0;
      double* oplane = out.data() + ((bi * cout + co) * oh) * ow;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* xplane = xv.data() + ((bi * cin + ci) * h) * wd;
        const double* wplane = wv.data() + ((co * cin + ci) * kh) * kw;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          for (std::size_t ox = 0; ox < ow; ++ox) {
            double acc = 0.0;
            for (std::size_t ky = 0; ky < kh; ++ky) {
              const long iy = static_cast<long>(oy + ky) - p;
              if (iy < 0 || iy >= static_cast<long>(h)) continue;
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long ix = static_cast<long>(ox + kx) - p;
                if (ix < 0 || ix >= static_cast<long>(wd)) continue;
                acc += xplane[iy * static_cast<long>(wd) + ix] * wplane[ky * kw + kx];
              }
            }
            oplane[oy * ow + ox] += acc;
          }
        }
      }
      if (bias.defined()) {
        for (std::size_t i = 0; i < oh * ow; ++i) oplane[i] += bval;
      }
    }
  }

  const bool rg = bias.defined() ? want_grad(tape, {&x, &w, &bias}) : want_grad(tape, {&x, &w});
  Tensor result(Shape{batch, cout, oh, ow}, std::move(out), rg);
  if (result.requires_grad()) {
    auto xn = x.node_ptr();
    auto wn = w.node_ptr();
    auto bnode = bias.defined() ? bias.node_ptr() : nullptr;
    auto on = result.node_ptr();
    tape->record(result, [xn, wn, bnode, on, batch, cin, cout, h, wd, kh, kw, oh, ow, p]() {
      for (std::size_t bi = 0; bi < batch; ++bi) {
        for (std::size_t co = 0; co < cout; ++co) {
          const double* gplane = on->grad.data() + ((bi * cout + co) * oh) * ow;
          if (bnode && bnode->requires_grad) {
            double acc = 0.0;
            for (std::size_t i = 0; i < oh * ow; ++i) acc += gplane[i];
            bnode->grad[co] += acc;
          }
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* xplane = xn->value.data() + ((bi * cin + ci) * h) * wd;
            const double* wplane = wn->value.data() + ((co * cin + ci) * kh) * kw;
            double* gxplane = xn->requires_grad ? xn->grad.data() + ((bi * cin + ci) * h) * wd : nullptr;
            double* gwplane = wn->requires_grad ? wn->grad.data() + ((co * cin + ci) * kh) * kw : nullptr;
            for (std::size_t oy = 0; oy < oh; ++oy) {
              for (std::size_t ox = 0; ox < ow; ++ox) {
                const double g = gplane[oy * ow + ox];
                if (g == 0.0) continue;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                  const long iy = static_cast<long>(oy + ky) - p;
                  if (iy < 0 || iy >= static_cast<long>(h)) continue;
                  for (std::size_t kx = 0; kx < kw; ++kx) {
                    const long ix = static_cast<long>(ox + kx) - p;
                    if (ix < 0 || ix >= static_cast<long>(wd)) continue;
                    const std::size_t xi = static_cast<std::size_t>(iy * static_cast<long>(wd) + ix);
                    if (gxplane) gxplane[xi] += g * wplane[ky * kw + kx];
                    if (gwplane) gwplane[ky * kw + kx] += g * xplane[xi];
                  }
                }
              }
            }
          }
        }
      }
    });
    prep_grad(xn.get());
    prep_grad(wn.get());
    if (bnode) prep_grad(bnode.get());
    result.node()->ensure_grad();
  }
  return result;
}

Tensor maxpool2x2(Tape* tape, const Tensor& x) {
  if (x.ndim() != 4) throw ShapeError("maxpool2x2: expected (B,C,H,W)");
  const std::size_t batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw ShapeError("maxpool2x2: spatial dims must be even");
  const std::size_t oh = h / 2, ow = w / 2;
  const auto xv = x.values();
  std::vector<double> out(batch * ch * oh * ow);
  auto arg = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t bc = 0; bc < batch * ch; ++bc) {
    const double* plane = xv.data() + bc * h * w;
    double* oplane = out.data() + bc * oh * ow;
    std::size_t* aplane = arg->data() + bc * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (2 * oy) * w + 2 * ox;
        double bv = plane[best];
        const std::size_t cand[3] = {(2 * oy) * w + 2 * ox + 1, (2 * oy + 1) * w + 2 * ox,
                                     (2 * oy + 1) * w + 2 * ox + 1};
        for (std::size_t c : cand) {
          if (plane[c] > bv) {
            bv = plane[c];
            best = c;
          }
        }
        oplane[oy * ow + ox] = bv;
        aplane[oy * ow + ox] = bc * h * w + best;
      }
    }
  }
  Tensor result(Shape{batch, ch, oh, ow}, std::move(out), want_grad(tape, {&x}));
  if (result.requires_grad()) {
    auto xn = x.node_ptr();
    auto on = result.node_ptr();
    tape->record(result, [xn, on, arg]() {
      for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[(*arg)[i]] += on->grad[i];
    });
    prep_grad(xn.get());
    result.node()->ensure_grad();
  }
  return result;
}

// ---- elementwise unaries ---------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(Tape* tape, const Tensor& x, Fwd fwd, Bwd bwd) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  Tensor result(x.shape(), std::move(out), want_grad(tape, {&x}));
  if (result.requires_grad()) {
    auto xn = x.node_ptr();
    auto on = result.node_ptr();
    tape->record(result, [xn, on, bwd]() {
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        xn->grad[i] += on->grad[i] * bwd(xn->value[i], on->value[i]);
      }
    });
    prep_grad(xn.get());
    result.node()->ensure_grad();
  }
  return result;
}

}  // namespace

Tensor relu(Tape* tape, const Tensor& x) {
  return unary_op(tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
                  [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(Tape* tape, const Tensor& x) {
  return unary_op(tape, x, [](double v) { return std::exp(v); },
                  [](double, double o) { return o; });
}

Tensor log(Tape* tape, const Tensor& x) {
  for (double v : x.values()) {
    if (!(v > 0.0)) throw NumericError("log requires strictly positive inputs");
  }
  return unary_op(tape, x, [](double v) { return std::log(v); },
                  [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(Tape* tape, const Tensor& x) {
  for (double v : x.values()) {
    if (v < 0.0) throw NumericError("sqrt requires non-negative inputs");
  }
  return unary_op(tape, x, [](double v) { return std::sqrt(v); },
                  [](double, double o) { return o > 0.0 ? 0.5 / o : 0.0; });
}

Tensor pow_scalar(Tape* tape, const Tensor& x, double exponent) {
  for (double v : x.values()) {
    if (!(v > 0.0)) throw NumericError("pow_scalar requires strictly positive inputs");
  }
  return unary_op(tape, x, [exponent](double v) { return std::pow(v, exponent); },
                  [exponent](double v, double o) { return exponent * o / v; });
}

Tensor clamp_min(Tape* tape, const Tensor& x, double min_value) {
  return unary_op(tape, x, [min_value](double v) { return v < min_value ? min_value : v; },
                  [min_value](double v, double) { return v > min_value ? 1.0 : 0.0; });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(Tape* tape, const Tensor& x) {
  const auto xv = x.values();
  double acc = 0.0;
  for (double v : xv) acc += v;
  Tensor result = Tensor::scalar(acc, want_grad(tape, {&x}));
  if (result.requires_grad()) {
    auto xn = x.node_ptr();
    auto on = result.node_ptr();
    tape->record(result, [xn, on]() {
      const double g = on->grad[0];
      for (double& gi : xn->grad) gi += g;
    });
    prep_grad(xn.get());
    result.node()->ensure_grad();
  }
  return result;
}

Tensor mean(Tape* tape, const Tensor& x) {
  const auto xv = x.values();
  double acc = 0.0;
  for (double v : xv) acc += v;
  const double inv = 1.0 / static_cast<double>(xv.size());
  Tensor result = Tensor::scalar(acc * inv, want_grad(tape, {&x}));
  if (result.requires_grad()) {
    auto xn = x.node_ptr();
    auto on = result.node_ptr();
    tape->record(result, [xn, on, inv]() {
      const double g = on->grad[0] * inv;
      for (double& gi : xn->grad) gi += g;
    });
    prep_grad(xn.get());
    result.node()->ensure_grad();
  }
  return result;
}

Tensor sum_rows(Tape* tape, const Tensor& x) {
  if (x.ndim() != 2) throw ShapeError("sum_rows: expected a 2-D tensor");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const auto xv = x.values();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += xv[r * cols + c];
    out[r] = acc;
  }
  Tensor result(Shape{rows}, std::move(out), want_grad(tape, {&x}));
  if (result.requires_grad()) {
    auto xn = x.node_ptr();
    auto on = result.node_ptr();
    tape->record(result, [xn, on, rows, cols]() {
      for (std::size_t r = 0; r < rows; ++r) {
        const double g = on->grad[r];
        for (std::size_t c = 0; c < cols; ++c) xn->grad[r * cols + c] += g;
      }
    });
    prep_grad(xn.get());
    result.node()->ensure_grad();
  }
  return result;
}

// ---- softmax family --------------------------------------------------------

namespace {

void softmax_row(const double* in, double* out, std::size_t n) {
  double mx = in[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(in[i] - mx);
    total += out[i];
  }
  const double inv = 1.0 / total;
  for (std::size_t i = 0; i < n; ++i) out[i] *= inv;
}

void check_finite(const Tensor& x, const char* op) {
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

}  // namespace

Tensor softmax(Tape* tape, const Tensor& x) {
  if (x.ndim() != 1 && x.ndim() != 2) throw ShapeError("softmax: expected a 1-D or 2-D tensor");
  check_finite(x, "softmax");
  const std::size_t rows = x.ndim() == 1 ? 1 : x.dim(0);
  const std::size_t cols = x.ndim() == 1 ? x.dim(0) : x.dim(1);
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) softmax_row(xv.data() + r * cols, out.data() + r * cols, cols);
  Tensor result(x.shape(), std::move(out), want_grad(tape, {&x}));
  if (result.requires_grad()) {
    auto xn = x.node_ptr();
    auto on = result.node_ptr();
    tape->record(result, [xn, on, rows, cols]() {
      // dx = p * (dy - sum(dy * p)) per row
      for (std::size_t r = 0; r < rows; ++r) {
        const double* p = on->value.data() + r * cols;
        const double* gy = on->grad.data() + r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += gy[c] * p[c];
        double* gx = xn->grad.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gx[c] += p[c] * (gy[c] - dot);
      }
    });
    prep_grad(xn.get());
    result.node()->ensure_grad();
  }
  return result;
}

Tensor logsumexp_rows(Tape* tape, const Tensor& x) {
  if (x.ndim() != 2) throw ShapeError("logsumexp_rows: expected a 2-D tensor");
  check_finite(x, "logsumexp_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const auto xv = x.values();
  std::vector<double> out(rows);
  auto probs = std::make_shared<std::vector<double>>(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * cols;
    double mx = row[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
    double total = 0.0;
    double* prow = probs->data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      prow[c] = std::exp(row[c] - mx);
      total += prow[c];
    }
    out[r] = mx + std::log(total);
    const double inv = 1.0 / total;
    for (std::size_t c = 0; c < cols; ++c) prow[c] *= inv;
  }
  Tensor result(Shape{rows}, std::move(out), want_grad(tape, {&x}));
  if (result.requires_grad()) {
    auto xn = x.node_ptr();
    auto on = result.node_ptr();
    tape->record(result, [xn, on, probs, rows, cols]() {
      for (std::size_t r = 0; r < rows; ++r) {
        const double g = on->grad[r];
        const double* prow = probs->data() + r * cols;
        double* gx = xn->grad.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gx[c] += g * prow[c];
      }
    });
    prep_grad(xn.get());
    result.node()->ensure_grad();
  }
  return result;
}

Tensor gather_rows(Tape* tape, const Tensor& x, const std::vector<std::size_t>& idx) {
  if (x.ndim() != 2) throw ShapeError("gather_rows: expected a 2-D tensor");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (idx.size() != rows) throw ShapeError("gather_rows: index count must equal row count");
  for (std::size_t i : idx) {
    if (i >= cols) throw ValueError("gather_rows: index " + std::to_string(i) + " out of range [0, " + std::to_string(cols) + ")");
  }
  const auto xv = x.values();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = xv[r * cols + idx[r]];
  Tensor result(Shape{rows}, std::move(out), want_grad(tape, {&x}));
  if (result.requires_grad()) {
    auto xn = x.node_ptr();
    auto on = result.node_ptr();
    auto ix = std::make_shared<std::vector<std::size_t>>(idx);
    tape->record(result, [xn, on, ix, cols]() {
      for (std::size_t r = 0; r < ix->size(); ++r) xn->grad[r * cols + (*ix)[r]] += on->grad[r];
    });
    prep_grad(xn.get());
    result.node()->ensure_grad();
  }
  return result;
}

Tensor mask_index(Tape* tape, const Tensor& x, const std::vector<std::size_t>& idx) {
  if (x.ndim() != 2) throw ShapeError("mask_index: expected a 2-D tensor");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (idx.size() != rows) throw ShapeError("mask_index: index count must equal row count");
  for (std::size_t i : idx) {
    if (i >= cols) throw ValueError("mask_index: index out of range");
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t r = 0; r < rows; ++r) out[r * cols + idx[r]] = 0.0;
  Tensor result(x.shape(), std::move(out), want_grad(tape, {&x}));
  if (result.requires_grad()) {
    auto xn = x.node_ptr();
    auto on = result.node_ptr();
    auto ix = std::make_shared<std::vector<std::size_t>>(idx);
    tape->record(result, [xn, on, ix, rows, cols]() {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          if (c != (*ix)[r]) xn->grad[r * cols + c] += on->grad[r * cols + c];
        }
      }
    });
    prep_grad(xn.get());
    result.node()->ensure_grad();
  }
  return result;
}

Tensor reshape(Tape* tape, const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw ShapeError("reshape: numel mismatch " + shape_to_string(x.shape()) + " -> " +
                     shape_to_string(new_shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  Tensor result(std::move(new_shape), std::move(out), want_grad(tape, {&x}));
  if (result.requires_grad()) {
    auto xn = x.node_ptr();
    auto on = result.node_ptr();
    tape->record(result, [xn, on]() { axpy(xn->grad, on->grad); });
    prep_grad(xn.get());
    result.node()->ensure_grad();
  }
  return result;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw ContractError("argmax of empty span");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace drsl
