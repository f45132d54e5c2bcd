#pragma once

#include <cstddef>
#include <vector>

#include "pvc/tensor.hpp"

namespace pvc {

inline constexpr double kNormEps = 1e-6;

// c[i,j] = sum_p a[i,p] * b[p,j], summed in increasing p.
Tensor matmul(const Tensor& a, const Tensor& b);

// y = x . w (+ bias) applied over the last axis of x; w is [in x out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias = nullptr);

Tensor softmax(const Tensor& x, std::size_t axis);

// Normalizes each slice along `axis`. gamma/beta have the axis extent; either may be null (identity affine).
Tensor layer_norm(const Tensor& x, std::size_t axis, const Tensor* gamma, const Tensor* beta, double eps = kNormEps);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = kNormEps);

double sigmoid(double x);
double silu(double x);
double silu_grad(double x);
double gelu(double x);
double gelu_grad(double x);

Tensor silu(const Tensor& x);
Tensor gelu(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// x[..., c] * v[c] and x[..., c] + v[c] over the last axis.
Tensor mul_last(const Tensor& x, const Tensor& v);
Tensor add_last(const Tensor& x, const Tensor& v);

// Sums all leading axes, leaving a vector over the last axis.
Tensor sum_to_last(const Tensor& x);

// out.shape[i] = x.shape[perm[i]].
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);
std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& perm);
Tensor transpose(const Tensor& m);

}  // namespace pvc
