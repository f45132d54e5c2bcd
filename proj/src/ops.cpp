#include "pvc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pvc {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

void require_last(const Tensor& x, const Tensor& v, const char* op) {
  if (v.ndim() != 1 || v.dim(0) != x.shape().back()) {
    throw std::invalid_argument(std::string(op) + ": vector " + shape_str(v.shape()) + " does not match last axis of " +
                                shape_str(x.shape()));
  }
}

// Splits x into (outer, axis extent, inner) around `axis`.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) throw std::invalid_argument("axis " + std::to_string(axis) + " out of range");
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

template <class F>
Tensor map(const Tensor& x, F f, const char* where) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  y.check_finite(where);
  return y;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.raw() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b.raw() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  c.check_finite("matmul");
  return c;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias) {
  if (w.ndim() != 2 || x.shape().back() != w.dim(0)) {
    throw std::invalid_argument("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                                shape_str(w.shape()));
  }
  const std::size_t in = w.dim(0), out = w.dim(1);
  if (bias && (bias->ndim() != 1 || bias->dim(0) != out)) {
    throw std::invalid_argument("linear: bias " + shape_str(bias->shape()) + " does not match output width");
  }
  const std::size_t rows = x.size() / in;
  Shape shape = x.shape();
  shape.back() = out;
  Tensor y(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    double* yrow = y.raw() + r * out;
    if (bias) std::copy(bias->raw(), bias->raw() + out, yrow);
    const double* xrow = x.raw() + r * in;
    for (std::size_t p = 0; p < in; ++p) {
      const double xp = xrow[p];
      const double* wrow = w.raw() + p * out;
      for (std::size_t j = 0; j < out; ++j) yrow[j] += xp * wrow[j];
    }
  }
  y.check_finite("linear");
  return y;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisView v = axis_view(x.shape(), axis);
  Tensor y(x.shape());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.extent * v.inner + in;
      double mx = x[base];
      for (std::size_t e = 1; e < v.extent; ++e) mx = std::max(mx, x[base + e * v.inner]);
      double s = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) {
        const double ex = std::exp(x[base + e * v.inner] - mx);
        y[base + e * v.inner] = ex;
        s += ex;
      }
      for (std::size_t e = 0; e < v.extent; ++e) y[base + e * v.inner] /= s;
    }
  }
  y.check_finite("softmax");
  return y;
}

Tensor layer_norm(const Tensor& x, std::size_t axis, const Tensor* gamma, const Tensor* beta, double eps) {
  const AxisView v = axis_view(x.shape(), axis);
  for (const Tensor* p : {gamma, beta}) {
    if (p && (p->ndim() != 1 || p->dim(0) != v.extent)) {
      throw std::invalid_argument("layer_norm: affine extent " + shape_str(p->shape()) + " does not match axis extent " +
                                  std::to_string(v.extent));
    }
  }
  Tensor y(x.shape());
  const double n = static_cast<double>(v.extent);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.extent * v.inner + in;
      // Deviations are taken from the first element so constant slices give exactly zero.
      const double pivot = x[base];
      double mean = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) mean += x[base + e * v.inner] - pivot;
      mean /= n;
      double var = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) {
        const double d = (x[base + e * v.inner] - pivot) - mean;
        var += d * d;
      }
      var /= n;
      const double rstd = 1.0 / std::sqrt(var + eps);
      for (std::size_t e = 0; e < v.extent; ++e) {
        double h = ((x[base + e * v.inner] - pivot) - mean) * rstd;
        if (gamma) h *= (*gamma)[e];
        if (beta) h += (*beta)[e];
        y[base + e * v.inner] = h;
      }
    }
  }
  y.check_finite("layer_norm");
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  return layer_norm(x, x.ndim() - 1, &gamma, &beta, eps);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double silu(double x) { return x * sigmoid(x); }

double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
  return cdf + x * pdf;
}

Tensor silu(const Tensor& x) { return map(x, [](double v) { return silu(v); }, "silu"); }
Tensor gelu(const Tensor& x) { return map(x, [](double v) { return gelu(v); }, "gelu"); }

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  y.check_finite("add");
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] - b[i];
  y.check_finite("sub");
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
  y.check_finite("mul");
  return y;
}

Tensor scale(const Tensor& a, double s) {
  return map(a, [s](double v) { return v * s; }, "scale");
}

Tensor mul_last(const Tensor& x, const Tensor& v) {
  require_last(x, v, "mul_last");
  const std::size_t c = v.dim(0);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * v[i % c];
  y.check_finite("mul_last");
  return y;
}

Tensor add_last(const Tensor& x, const Tensor& v) {
  require_last(x, v, "add_last");
  const std::size_t c = v.dim(0);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + v[i % c];
  y.check_finite("add_last");
  return y;
}

Tensor sum_to_last(const Tensor& x) {
  const std::size_t c = x.shape().back();
  Tensor y({c});
  for (std::size_t i = 0; i < x.size(); ++i) y[i % c] += x[i];
  return y;
}

std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const std::size_t nd = x.ndim();
  if (perm.size() != nd) throw std::invalid_argument("permute: rank mismatch");
  std::vector<bool> seen(nd, false);
  for (std::size_t p : perm) {
    if (p >= nd || seen[p]) throw std::invalid_argument("permute: not a permutation");
    seen[p] = true;
  }
  Shape out_shape(nd);
  for (std::size_t i = 0; i < nd; ++i) out_shape[i] = x.dim(perm[i]);

  std::vector<std::size_t> in_strides(nd, 1);
  for (std::size_t i = nd - 1; i > 0; --i) in_strides[i - 1] = in_strides[i] * x.dim(i);
  // Stride in the input for a unit step along each output axis.
  std::vector<std::size_t> step(nd);
  for (std::size_t i = 0; i < nd; ++i) step[i] = in_strides[perm[i]];

  Tensor y(out_shape);
  std::vector<std::size_t> idx(nd, 0);
  std::size_t src = 0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    y[n] = x[src];
    for (std::size_t a = nd; a-- > 0;) {
      ++idx[a];
      src += step[a];
      if (idx[a] < out_shape[a]) break;
      src -= step[a] * out_shape[a];
      idx[a] = 0;
    }
  }
  return y;
}

Tensor transpose(const Tensor& m) {
  if (m.ndim() != 2) throw std::invalid_argument("transpose expects a matrix");
  return permute(m, {1, 0});
}

}  // namespace pvc
