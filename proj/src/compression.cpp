#include "pvc/compression.hpp"

#include <cmath>
#include <stdexcept>

#include "pvc/ops.hpp"

namespace pvc {

namespace {

std::size_t grid_side_for(std::size_t tokens, std::size_t k) {
  if (k == 0) throw std::invalid_argument("pixel_shuffle: kernel must be positive");
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(tokens))));
  if (side * side != tokens) {
    throw std::invalid_argument("pixel_shuffle: token count " + std::to_string(tokens) + " is not a perfect square");
  }
  if (side % k != 0) {
    throw std::invalid_argument("pixel_shuffle: grid side " + std::to_string(side) + " not divisible by kernel " +
                                std::to_string(k));
  }
  return side;
}

// Calls f(src_token, dst_token, block_slot) for every source token of one frame.
template <class F>
void for_each_block_slot(std::size_t side, std::size_t k, F f) {
  const std::size_t blocks = side / k;
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t col = 0; col < side; ++col) {
      f(r * side + col, (r / k) * blocks + col / k, (r % k) * k + col % k);
    }
  }
}

}  // namespace

CompressionParams make_compression(const PvcConfig& cfg) {
  const std::size_t d = cfg.shuffled_channels(), f = cfg.compression_hidden(), out = cfg.compression_out();
  return {make_ada_ln(d, d), make_temporal_embedding(d, d), Tensor::zeros({d, f}), Tensor::zeros({f}),
          Tensor::zeros({f, out}), Tensor::zeros({out})};
}

CompressionParams init_compression(const PvcConfig& cfg, Rng& rng) {
  cfg.validate();
  CompressionParams p = make_compression(cfg);
  for_each_tensor(p, "", [&](const std::string&, Tensor& t) {
    if (t.ndim() == 2) t = rng.gaussian_tensor(t.shape(), 0.02);
  });
  return p;
}

void for_each_tensor(CompressionParams& p, const std::string& prefix, const TensorVisitor& f) {
  f(prefix + "adaln.w3", p.adaln.w3);
  f(prefix + "adaln.w4", p.adaln.w4);
  f(prefix + "adaln.w5", p.adaln.w5);
  f(prefix + "adaln.w6", p.adaln.w6);
  f(prefix + "te.w1", p.te.w1);
  f(prefix + "te.w2", p.te.w2);
  f(prefix + "mlp.w_in", p.w_in);
  f(prefix + "mlp.b_in", p.b_in);
  f(prefix + "mlp.w_out", p.w_out);
  f(prefix + "mlp.b_out", p.b_out);
}

void for_each_tensor(const CompressionParams& p, const std::string& prefix, const ConstTensorVisitor& f) {
  for_each_tensor(const_cast<CompressionParams&>(p), prefix, [&](const std::string& n, Tensor& t) { f(n, t); });
}

Tensor pixel_shuffle(const Tensor& x, std::size_t k) {
  if (x.ndim() != 4) throw std::invalid_argument("pixel_shuffle expects [B,T,N,C], got " + shape_str(x.shape()));
  const std::size_t frames = x.dim(0) * x.dim(1), n = x.dim(2), c = x.dim(3);
  const std::size_t side = grid_side_for(n, k);
  const std::size_t m = n / (k * k), width = k * k * c;
  Tensor out({x.dim(0), x.dim(1), m, width});
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = x.raw() + f * n * c;
    double* dst = out.raw() + f * m * width;
    for_each_block_slot(side, k, [&](std::size_t s, std::size_t d, std::size_t slot) {
      std::copy(src + s * c, src + (s + 1) * c, dst + d * width + slot * c);
    });
  }
  return out;
}

Tensor pixel_unshuffle(const Tensor& x, std::size_t k) {
  if (x.ndim() != 4 || k == 0 || x.dim(3) % (k * k) != 0) {
    throw std::invalid_argument("pixel_unshuffle: expected [B,T,M,k^2*C], got " + shape_str(x.shape()));
  }
  const std::size_t frames = x.dim(0) * x.dim(1), m = x.dim(2), width = x.dim(3);
  const std::size_t c = width / (k * k), n = m * k * k;
  const std::size_t side = grid_side_for(n, k);
  Tensor out({x.dim(0), x.dim(1), n, c});
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = x.raw() + f * m * width;
    double* dst = out.raw() + f * n * c;
    for_each_block_slot(side, k, [&](std::size_t s, std::size_t d, std::size_t slot) {
      std::copy(src + d * width + slot * c, src + d * width + (slot + 1) * c, dst + s * c);
    });
  }
  return out;
}

CompressionTrace trace_compression(const VideoBatch& v, const CompressionParams& p, const PvcConfig& cfg) {
  v.validate();
  if (v.channels() != cfg.channels) throw std::invalid_argument("compress: channel width does not match config");
  CompressionTrace tr;
  tr.shuffled = pixel_shuffle(v.features, cfg.shuffle_kernel);
  const std::size_t t = v.frames(), m = tr.shuffled.dim(2), d = tr.shuffled.dim(3);
  if (p.adaln.dim() != d || p.te.out_dim() != d) {
    throw std::invalid_argument("compress: conditioning width does not match k^2*C = " + std::to_string(d));
  }
  tr.te = temporal_embedding(sinusoidal_embed(v.timestamps, cfg.ts_scale), p.te);
  tr.z = tr.shuffled;
  for (std::size_t i = 0; i < tr.z.size(); ++i) tr.z[i] += tr.te[((i / (m * d)) % t) * d + i % d];
  tr.u = ada_ln(tr.shuffled, tr.z, p.adaln, cfg.norm_eps);
  tr.pre = linear(tr.u, p.w_in, &p.b_in);
  tr.hidden = silu(tr.pre);
  tr.out = linear(tr.hidden, p.w_out, &p.b_out);
  return tr;
}

Tensor compress(const VideoBatch& v, const CompressionParams& p, const PvcConfig& cfg) {
  return trace_compression(v, p, cfg).out;
}

}  // namespace pvc
