#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "pvc/compression.hpp"
#include "pvc/conditioning.hpp"
#include "pvc/config.hpp"
#include "pvc/tensor.hpp"
#include "pvc/vit.hpp"

namespace pvc {

// Reverse-mode derivatives of the forward passes, derived by hand per module.

struct LinearGrads {
  Tensor dx, dw, db;
};
// For y = x . w + b over the last axis of x.
LinearGrads linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy);

struct LayerNormGrads {
  Tensor dx, dgamma, dbeta;
};
// LayerNorm over the last axis; gamma may be null (no affine).
LayerNormGrads layer_norm_backward(const Tensor& x, const Tensor* gamma, const Tensor& dy, double eps);

struct TemporalEmbeddingGrads {
  Tensor d_t_tilde;
  TemporalEmbeddingParams dparams;
};
TemporalEmbeddingGrads backward_temporal_embedding(const Tensor& t_tilde, const TemporalEmbeddingParams& p,
                                                   const Tensor& dte);

struct AdaLnGrads {
  Tensor dx, dz;
  AdaLnParams dparams;
};
AdaLnGrads backward_adaln(const Tensor& x, const Tensor& z, const AdaLnParams& p, const Tensor& dy, double eps);

struct AttentionGrads {
  Tensor dx;
  AttentionParams dparams;
};
AttentionGrads backward_attention(const Tensor& x, const AttentionParams& p, std::size_t heads, bool causal,
                                  const Tensor& dy);

// dparams mirrors the layer's structure, one gradient per parameter tensor.
struct LayerGrads {
  Tensor dx;
  LayerParams dparams;
};
LayerGrads backward_layer(const Tensor& x, const std::vector<double>& timestamps, const LayerParams& p,
                          const PvcConfig& cfg, const Tensor& dy);

struct CompressionGrads {
  Tensor dx;
  CompressionParams dparams;
};
CompressionGrads backward_compression(const VideoBatch& v, const CompressionParams& p, const PvcConfig& cfg,
                                      const Tensor& dy);

// Input gradient through every ViT layer (patchify excluded).
Tensor backward_vit_input(const Tensor& x, const std::vector<double>& timestamps, const PvcConfig& cfg,
                          const VitParams& params, const Tensor& dy);

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

struct TensorCheck {
  std::string name;
  Shape shape;
  // ||g_analytic - g_fd|| / max(||g_fd||, 1e-8) with L2 norms over the tensor.
  double max_rel_error = 0.0;
  // Worst single-entry ratio; diagnostic only, dominated by finite-difference
  // roundoff on entries near zero.
  double max_entry_rel_error = 0.0;
  double max_abs_analytic = 0.0;
  double max_abs_fd = 0.0;
  // Tensors whose exact gradient is identically zero (attention key bias) are
  // judged on absolute magnitude instead of relative error.
  bool structural_zero = false;
  bool pass = false;
};

struct GradCheckReport {
  std::string module;
  std::uint64_t seed = 0;
  double tol = 0.0;
  double step = 0.0;
  Shape probe_shape;
  std::vector<TensorCheck> tensors;

  bool pass() const;
  double max_rel_error() const;
  std::string to_text() const;
};

inline constexpr double kStructuralZeroBound = 1e-9;

const std::vector<std::string>& grad_check_modules();
// Throws std::invalid_argument for an unknown module id.
GradCheckReport run_grad_check(std::string_view module_id, std::uint64_t seed, double tol, double step = 1e-5);

}  // namespace pvc
