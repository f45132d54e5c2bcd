#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pvc/conditioning.hpp"
#include "pvc/config.hpp"
#include "pvc/rng.hpp"
#include "pvc/tensor.hpp"

namespace pvc {

struct AttentionParams {
  Tensor wq, wk, wv, wo;  // [C x C]
  Tensor bq, bk, bv, bo;  // [C]
};

struct LayerNormParams {
  Tensor gamma, beta;
};

struct FfnParams {
  Tensor w_in, b_in;    // [C x F], [F]
  Tensor w_out, b_out;  // [F x C], [C]
};

// The extra machinery of a progressive layer: causal T-MHA behind a gate,
// fed by AdaLN conditioned on x + TE.
struct TemporalBranch {
  AttentionParams tmha;
  AdaLnParams adaln;
  TemporalEmbeddingParams te;
  Tensor gate_alpha;  // [C], zero at construction

  std::size_t parameter_count() const;
};

struct LayerParams {
  AttentionParams smha;
  LayerNormParams ln1, ln2;
  FfnParams ffn;
  std::optional<TemporalBranch> temporal;

  bool progressive() const { return temporal.has_value(); }
  // Parameters a progressive layer adds on top of the plain layer.
  std::size_t added_parameter_count() const { return temporal ? temporal->parameter_count() : 0; }
};

struct PatchEmbedParams {
  Tensor weight;     // [patch*patch*3 x C]
  Tensor bias;       // [C]
  Tensor pos_embed;  // [N x C]
};

struct VitParams {
  PatchEmbedParams stem;
  std::vector<LayerParams> layers;
};

struct VideoBatch {
  Tensor features;  // [B, T, N, C]
  std::vector<double> timestamps;
  bool is_static = false;

  std::size_t batch() const { return features.dim(0); }
  std::size_t frames() const { return features.dim(1); }
  std::size_t tokens() const { return features.dim(2); }
  std::size_t channels() const { return features.dim(3); }
  // Checks rank, timestamp count and the static-frames invariant.
  void validate() const;
};

using TensorVisitor = std::function<void(const std::string&, Tensor&)>;
using ConstTensorVisitor = std::function<void(const std::string&, const Tensor&)>;

void for_each_tensor(AttentionParams& p, const std::string& prefix, const TensorVisitor& f);
void for_each_tensor(LayerParams& p, const std::string& prefix, const TensorVisitor& f);
void for_each_tensor(const LayerParams& p, const std::string& prefix, const ConstTensorVisitor& f);
void for_each_tensor(VitParams& p, const TensorVisitor& f);
void for_each_tensor(const VitParams& p, const ConstTensorVisitor& f);

AttentionParams make_attention(std::size_t channels);
LayerParams make_layer(const PvcConfig& cfg, bool progressive);

// Weights ~ N(0, 0.02^2), biases 0, LayerNorm at identity, gate exactly 0.
VitParams init_vit(const PvcConfig& cfg, Rng& rng);

// Frame-major [B,T,N,C] <-> position-major [B*N,T,C].
Tensor to_temporal_layout(const Tensor& x);
Tensor from_temporal_layout(const Tensor& x, std::size_t batch, std::size_t tokens);

// Intermediates kept by multi_head_attention for the backward pass.
struct AttentionTrace {
  Tensor q, k, v;             // [S, L, C] after bias
  std::vector<double> probs;  // [S, heads, L, L]; masked entries are exactly 0
  Tensor context;             // [S, L, C] concatenated heads before the output projection
};

// Softmax self-attention over axis 1 of x [S, L, C], independently per sequence.
Tensor multi_head_attention(const Tensor& x, const AttentionParams& p, std::size_t heads, bool causal,
                            AttentionTrace* trace = nullptr);

// Attention among the N tokens of each frame: x is [B*T, N, C].
Tensor spatial_mha(const Tensor& x, const AttentionParams& p, std::size_t heads);
// Causal attention along T at each spatial position: x is [B*N, T, C].
Tensor temporal_mha_causal(const Tensor& x, const AttentionParams& p, std::size_t heads);

// GELU MLP over the last axis.
Tensor ffn_forward(const Tensor& x, const FfnParams& p);

// [B,T,H,W,3] pixels -> [B,T,N,C] tokens with the shared position embedding added.
VideoBatch patchify(const Tensor& pixels, const PvcConfig& cfg, const PatchEmbedParams& stem,
                    std::vector<double> timestamps, bool is_static);

// Every intermediate of one layer, in execution order.
struct LayerTrace {
  Tensor x0;         // input
  Tensor h1;         // LN1(x0)
  Tensor a1;         // S-MHA(h1) in [B,T,N,C]
  Tensor x1;         // x0 + a1
  Tensor te;         // [T, C] temporal embedding (progressive only)
  Tensor z;          // x1 + TE
  Tensor u;          // AdaLN(x1; z)
  Tensor m;          // T-MHA(u) in [B,T,N,C]
  Tensor x2;         // x1 + alpha * m
  Tensor h3;         // LN2(x2)
  Tensor f;          // FFN(h3)
  Tensor out;        // x2 + f
};

LayerTrace trace_layer(const Tensor& x, const std::vector<double>& timestamps, const LayerParams& p,
                       const PvcConfig& cfg);

VideoBatch progressive_layer_forward(const VideoBatch& v, const LayerParams& p, const PvcConfig& cfg);

// Runs all layers; params.layers must hold L layers with exactly the last L~ progressive.
VideoBatch vit_forward(const VideoBatch& v, const PvcConfig& cfg, const VitParams& params);

// Reference path: every frame through the plain layers alone, ignoring all temporal branches.
Tensor plain_vit_per_frame(const Tensor& features, const PvcConfig& cfg, const VitParams& params);

void check_vit_params(const PvcConfig& cfg, const VitParams& params);

}  // namespace pvc
