#include "pvc/conditioning.hpp"

#include <cmath>
#include <stdexcept>

namespace pvc {

std::vector<double> relative_timestamps(std::size_t frames) {
  if (frames == 0) throw std::invalid_argument("relative_timestamps: frame count must be positive");
  std::vector<double> t(frames, 0.0);
  if (frames == 1) return t;
  const double denom = static_cast<double>(frames - 1);
  for (std::size_t i = 0; i < frames; ++i) t[i] = static_cast<double>(i) / denom;
  return t;
}

Tensor sinusoidal_embed(const std::vector<double>& timestamps, double scale) {
  if (timestamps.empty()) throw std::invalid_argument("sinusoidal_embed: no timestamps");
  constexpr std::size_t half = kSinusoidalDim / 2;
  std::vector<double> freq(half);
  for (std::size_t j = 0; j < half; ++j) {
    freq[j] = scale * std::pow(10000.0, -static_cast<double>(j) / static_cast<double>(half - 1));
  }
  Tensor out({timestamps.size(), kSinusoidalDim});
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    const double t = timestamps[i];
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("sinusoidal_embed: timestamp outside [0,1]");
    double* row = out.raw() + i * kSinusoidalDim;
    for (std::size_t j = 0; j < half; ++j) {
      row[j] = std::sin(t * freq[j]);
      row[half + j] = std::cos(t * freq[j]);
    }
  }
  return out;
}

TemporalEmbeddingParams make_temporal_embedding(std::size_t hidden, std::size_t out_dim) {
  return {Tensor::zeros({kSinusoidalDim, hidden}), Tensor::zeros({hidden, out_dim})};
}

Tensor temporal_embedding(const Tensor& t_tilde, const TemporalEmbeddingParams& p) {
  if (t_tilde.ndim() != 2 || t_tilde.dim(1) != p.w1.dim(0) || p.w1.dim(1) != p.w2.dim(0)) {
    throw std::invalid_argument("temporal_embedding: incompatible shapes " + shape_str(t_tilde.shape()) + ", w1 " +
                                shape_str(p.w1.shape()) + ", w2 " + shape_str(p.w2.shape()));
  }
  return linear(silu(linear(t_tilde, p.w1)), p.w2);
}

AdaLnParams make_ada_ln(std::size_t dim, std::size_t hidden) {
  return {Tensor::zeros({dim, hidden}), Tensor::zeros({hidden, dim}), Tensor::zeros({dim, hidden}),
          Tensor::zeros({hidden, dim})};
}

AffineCoeffs affine_coeffs(const Tensor& z, const AdaLnParams& p) {
  const std::size_t d = p.dim();
  if (z.shape().back() != d || p.w4.dim(1) != d || p.w6.dim(1) != d) {
    throw std::invalid_argument("affine_coeffs: condition " + shape_str(z.shape()) + " does not match AdaLN width " +
                                std::to_string(d));
  }
  return {linear(silu(linear(z, p.w3)), p.w4), linear(silu(linear(z, p.w5)), p.w6)};
}

Tensor ada_ln(const Tensor& x, const Tensor& z, const AdaLnParams& p, double eps) {
  if (x.shape() != z.shape()) {
    throw std::invalid_argument("ada_ln: input " + shape_str(x.shape()) + " and condition " + shape_str(z.shape()) +
                                " differ");
  }
  const AffineCoeffs c = affine_coeffs(z, p);
  const Tensor normed = layer_norm(x, x.ndim() - 1, nullptr, nullptr, eps);
  return add(mul(c.gamma, normed), c.beta);
}

}  // namespace pvc
