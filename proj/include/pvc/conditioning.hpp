#pragma once

#include <cstddef>
#include <vector>

#include "pvc/ops.hpp"
#include "pvc/tensor.hpp"

namespace pvc {

inline constexpr std::size_t kSinusoidalDim = 256;
inline constexpr double kDefaultTimestampScale = 1000.0;

// Relative frame timestamps: 0, 1/(T-1), ..., 1. A single frame is stamped 0.
std::vector<double> relative_timestamps(std::size_t frames);

// [T x 256]: sin(t * f_j) for j < 128 followed by cos(t * f_j), f_j = scale * 10000^(-j/127).
Tensor sinusoidal_embed(const std::vector<double>& timestamps, double scale = kDefaultTimestampScale);

struct TemporalEmbeddingParams {
  Tensor w1;  // [256 x H]
  Tensor w2;  // [H x D_out]

  std::size_t out_dim() const { return w2.dim(1); }
  std::size_t parameter_count() const { return w1.size() + w2.size(); }
};

TemporalEmbeddingParams make_temporal_embedding(std::size_t hidden, std::size_t out_dim);

// TE = SiLU(t_tilde . w1) . w2, row-wise.
Tensor temporal_embedding(const Tensor& t_tilde, const TemporalEmbeddingParams& p);

struct AdaLnParams {
  Tensor w3, w4;  // scale path: [D x H], [H x D]
  Tensor w5, w6;  // shift path: [D x H], [H x D]

  std::size_t dim() const { return w3.dim(0); }
  std::size_t parameter_count() const { return w3.size() + w4.size() + w5.size() + w6.size(); }
};

AdaLnParams make_ada_ln(std::size_t dim, std::size_t hidden);

struct AffineCoeffs {
  Tensor gamma;
  Tensor beta;
};

// Per-token gamma(z) = SiLU(z . w3) . w4, beta(z) = SiLU(z . w5) . w6.
AffineCoeffs affine_coeffs(const Tensor& z, const AdaLnParams& p);

// gamma(z) * LayerNorm(x) + beta(z); the inner LayerNorm has no affine of its own.
Tensor ada_ln(const Tensor& x, const Tensor& z, const AdaLnParams& p, double eps = kNormEps);

}  // namespace pvc
