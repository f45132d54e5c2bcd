#include "pvc/vit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pvc/ops.hpp"

namespace pvc {

namespace {

constexpr double kInitStd = 0.02;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

std::size_t TemporalBranch::parameter_count() const {
  std::size_t n = gate_alpha.size() + adaln.parameter_count() + te.parameter_count();
  for (const Tensor* t : {&tmha.wq, &tmha.wk, &tmha.wv, &tmha.wo, &tmha.bq, &tmha.bk, &tmha.bv, &tmha.bo}) {
    n += t->size();
  }
  return n;
}

void VideoBatch::validate() const {
  require(features.ndim() == 4, "video batch features must be [B,T,N,C], got " + shape_str(features.shape()));
  require(timestamps.size() == frames(), "video batch has " + std::to_string(frames()) + " frames but " +
                                             std::to_string(timestamps.size()) + " timestamps");
  if (!is_static) return;
  const std::size_t frame = tokens() * channels();
  for (std::size_t b = 0; b < batch(); ++b) {
    const double* first = features.raw() + b * frames() * frame;
    for (std::size_t t = 1; t < frames(); ++t) {
      require(std::equal(first, first + frame, first + t * frame), "static video batch has differing frames");
    }
  }
}

void for_each_tensor(AttentionParams& p, const std::string& prefix, const TensorVisitor& f) {
  f(prefix + "wq", p.wq);
  f(prefix + "wk", p.wk);
  f(prefix + "wv", p.wv);
  f(prefix + "wo", p.wo);
  f(prefix + "bq", p.bq);
  f(prefix + "bk", p.bk);
  f(prefix + "bv", p.bv);
  f(prefix + "bo", p.bo);
}

void for_each_tensor(LayerParams& p, const std::string& prefix, const TensorVisitor& f) {
  for_each_tensor(p.smha, prefix + "smha.", f);
  f(prefix + "ln1.gamma", p.ln1.gamma);
  f(prefix + "ln1.beta", p.ln1.beta);
  f(prefix + "ln2.gamma", p.ln2.gamma);
  f(prefix + "ln2.beta", p.ln2.beta);
  f(prefix + "ffn.w_in", p.ffn.w_in);
  f(prefix + "ffn.b_in", p.ffn.b_in);
  f(prefix + "ffn.w_out", p.ffn.w_out);
  f(prefix + "ffn.b_out", p.ffn.b_out);
  if (!p.temporal) return;
  TemporalBranch& tb = *p.temporal;
  for_each_tensor(tb.tmha, prefix + "tmha.", f);
  f(prefix + "adaln.w3", tb.adaln.w3);
  f(prefix + "adaln.w4", tb.adaln.w4);
  f(prefix + "adaln.w5", tb.adaln.w5);
  f(prefix + "adaln.w6", tb.adaln.w6);
  f(prefix + "te.w1", tb.te.w1);
  f(prefix + "te.w2", tb.te.w2);
  f(prefix + "gate_alpha", tb.gate_alpha);
}

void for_each_tensor(const LayerParams& p, const std::string& prefix, const ConstTensorVisitor& f) {
  for_each_tensor(const_cast<LayerParams&>(p), prefix, [&](const std::string& n, Tensor& t) { f(n, t); });
}

void for_each_tensor(VitParams& p, const TensorVisitor& f) {
  f("stem.weight", p.stem.weight);
  f("stem.bias", p.stem.bias);
  f("stem.pos_embed", p.stem.pos_embed);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    for_each_tensor(p.layers[i], "layer" + std::to_string(i) + ".", f);
  }
}

void for_each_tensor(const VitParams& p, const ConstTensorVisitor& f) {
  for_each_tensor(const_cast<VitParams&>(p), [&](const std::string& n, Tensor& t) { f(n, t); });
}

AttentionParams make_attention(std::size_t c) {
  return {Tensor::zeros({c, c}), Tensor::zeros({c, c}), Tensor::zeros({c, c}), Tensor::zeros({c, c}),
          Tensor::zeros({c}),    Tensor::zeros({c}),    Tensor::zeros({c}),    Tensor::zeros({c})};
}

LayerParams make_layer(const PvcConfig& cfg, bool progressive) {
  const std::size_t c = cfg.channels;
  LayerParams p;
  p.smha = make_attention(c);
  p.ln1 = {Tensor::ones({c}), Tensor::zeros({c})};
  p.ln2 = {Tensor::ones({c}), Tensor::zeros({c})};
  p.ffn = {Tensor::zeros({c, cfg.ffn_dim}), Tensor::zeros({cfg.ffn_dim}), Tensor::zeros({cfg.ffn_dim, c}),
           Tensor::zeros({c})};
  if (progressive) {
    p.temporal = TemporalBranch{make_attention(c), make_ada_ln(c, c), make_temporal_embedding(c, c), Tensor::zeros({c})};
  }
  return p;
}

VitParams init_vit(const PvcConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t c = cfg.channels;
  VitParams params;
  params.stem.weight = rng.gaussian_tensor({cfg.patch_size * cfg.patch_size * 3, c}, kInitStd);
  params.stem.bias = Tensor::zeros({c});
  params.stem.pos_embed = rng.gaussian_tensor({cfg.tokens_per_frame(), c}, kInitStd);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    LayerParams layer = make_layer(cfg, l >= cfg.plain_layers());
    auto init_weights = [&](const std::string& name, Tensor& t) {
      // Weight matrices are 2-D; biases, LayerNorm affines and the gate keep their constructed values.
      if (t.ndim() == 2) t = rng.gaussian_tensor(t.shape(), kInitStd);
      (void)name;
    };
    for_each_tensor(layer, "", init_weights);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Tensor to_temporal_layout(const Tensor& x) {
  require(x.ndim() == 4, "to_temporal_layout expects [B,T,N,C]");
  const std::size_t b = x.dim(0), t = x.dim(1), n = x.dim(2), c = x.dim(3);
  return permute(x, {0, 2, 1, 3}).reshaped({b * n, t, c});
}

Tensor from_temporal_layout(const Tensor& x, std::size_t batch, std::size_t tokens) {
  require(x.ndim() == 3 && x.dim(0) == batch * tokens, "from_temporal_layout: shape mismatch");
  return permute(x.reshaped({batch, tokens, x.dim(1), x.dim(2)}), {0, 2, 1, 3});
}

Tensor multi_head_attention(const Tensor& x, const AttentionParams& p, std::size_t heads, bool causal,
                            AttentionTrace* trace) {
  require(x.ndim() == 3, "attention input must be [S, L, C], got " + shape_str(x.shape()));
  const std::size_t seqs = x.dim(0), len = x.dim(1), c = x.dim(2);
  require(heads > 0 && c % heads == 0, "attention: channels " + std::to_string(c) + " not divisible by heads");
  require(p.wq.ndim() == 2 && p.wq.dim(0) == c, "attention: weight width does not match input channels");
  const std::size_t dh = c / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = linear(x, p.wq, &p.bq);
  Tensor k = linear(x, p.wk, &p.bk);
  Tensor v = linear(x, p.wv, &p.bv);
  Tensor context({seqs, len, c});
  std::vector<double> probs(seqs * heads * len * len, 0.0);
  std::vector<double> row(len);

  for (std::size_t s = 0; s < seqs; ++s) {
    const std::size_t base = s * len * c;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t ho = h * dh;
      double* prob = probs.data() + (s * heads + h) * len * len;
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t keys = causal ? i + 1 : len;
        const double* qi = q.raw() + base + i * c + ho;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < keys; ++j) {
          const double* kj = k.raw() + base + j * c + ho;
          double dot = 0.0;
          for (std::size_t d = 0; d < dh; ++d) dot += qi[d] * kj[d];
          row[j] = dot * inv_sqrt;
          mx = std::max(mx, row[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < keys; ++j) {
          row[j] = std::exp(row[j] - mx);
          total += row[j];
        }
        double* out = context.raw() + base + i * c + ho;
        for (std::size_t j = 0; j < keys; ++j) {
          const double pij = row[j] / total;
          prob[i * len + j] = pij;
          const double* vj = v.raw() + base + j * c + ho;
          for (std::size_t d = 0; d < dh; ++d) out[d] += pij * vj[d];
        }
      }
    }
  }
  Tensor y = linear(context, p.wo, &p.bo);
  if (trace) {
    trace->q = std::move(q);
    trace->k = std::move(k);
    trace->v = std::move(v);
    trace->probs = std::move(probs);
    trace->context = std::move(context);
  }
  return y;
}

Tensor spatial_mha(const Tensor& x, const AttentionParams& p, std::size_t heads) {
  return multi_head_attention(x, p, heads, false);
}

Tensor temporal_mha_causal(const Tensor& x, const AttentionParams& p, std::size_t heads) {
  return multi_head_attention(x, p, heads, true);
}

Tensor ffn_forward(const Tensor& x, const FfnParams& p) {
  return linear(gelu(linear(x, p.w_in, &p.b_in)), p.w_out, &p.b_out);
}

VideoBatch patchify(const Tensor& pixels, const PvcConfig& cfg, const PatchEmbedParams& stem,
                    std::vector<double> timestamps, bool is_static) {
  require(pixels.ndim() == 5 && pixels.dim(4) == 3, "patchify expects [B,T,H,W,3], got " + shape_str(pixels.shape()));
  const std::size_t bsz = pixels.dim(0), frames = pixels.dim(1), height = pixels.dim(2), width = pixels.dim(3);
  const std::size_t ps = cfg.patch_size;
  require(ps > 0 && height % ps == 0 && width % ps == 0, "patchify: image size not divisible by patch size");
  require(height == cfg.image_size && width == cfg.image_size,
          "patchify: expected " + std::to_string(cfg.image_size) + "px square frames");
  const std::size_t gh = height / ps, gw = width / ps, n = gh * gw, c = stem.bias.dim(0);
  const std::size_t patch_len = ps * ps * 3;
  require(stem.weight.dim(0) == patch_len && stem.weight.dim(1) == c, "patchify: stem weight shape mismatch");
  require(stem.pos_embed.dim(0) == n && stem.pos_embed.dim(1) == c, "patchify: position embedding shape mismatch");

  Tensor patches({bsz * frames * n, patch_len});
  for (std::size_t f = 0; f < bsz * frames; ++f) {
    const double* img = pixels.raw() + f * height * width * 3;
    for (std::size_t py = 0; py < gh; ++py) {
      for (std::size_t px = 0; px < gw; ++px) {
        double* dst = patches.raw() + (f * n + py * gw + px) * patch_len;
        for (std::size_t y = 0; y < ps; ++y) {
          const double* src = img + ((py * ps + y) * width + px * ps) * 3;
          std::copy(src, src + ps * 3, dst + y * ps * 3);
        }
      }
    }
  }
  Tensor tokens = linear(patches, stem.weight, &stem.bias).reshaped({bsz * frames, n, c});
  for (std::size_t f = 0; f < bsz * frames; ++f) {
    double* dst = tokens.raw() + f * n * c;
    for (std::size_t i = 0; i < n * c; ++i) dst[i] += stem.pos_embed[i];
  }
  VideoBatch out{tokens.reshaped({bsz, frames, n, c}), std::move(timestamps), is_static};
  out.validate();
  return out;
}

LayerTrace trace_layer(const Tensor& x, const std::vector<double>& timestamps, const LayerParams& p,
                       const PvcConfig& cfg) {
  require(x.ndim() == 4 && x.dim(3) == cfg.channels, "layer input must be [B,T,N,C] with C=" +
                                                          std::to_string(cfg.channels));
  const std::size_t b = x.dim(0), t = x.dim(1), n = x.dim(2), c = x.dim(3);
  LayerTrace tr;
  tr.x0 = x;
  tr.h1 = layer_norm(x, p.ln1.gamma, p.ln1.beta, cfg.norm_eps);
  tr.a1 = spatial_mha(tr.h1.reshaped({b * t, n, c}), p.smha, cfg.heads).reshaped({b, t, n, c});
  tr.x1 = add(tr.x0, tr.a1);
  tr.x2 = tr.x1;
  if (p.temporal) {
    const TemporalBranch& tb = *p.temporal;
    require(timestamps.size() == t, "layer: timestamp count does not match frame count");
    tr.te = temporal_embedding(sinusoidal_embed(timestamps, cfg.ts_scale), tb.te);
    tr.z = tr.x1;
    for (std::size_t i = 0; i < tr.z.size(); ++i) {
      const std::size_t frame = (i / (n * c)) % t;
      tr.z[i] += tr.te[frame * c + i % c];
    }
    tr.u = ada_ln(tr.x1, tr.z, tb.adaln, cfg.norm_eps);
    tr.m = from_temporal_layout(temporal_mha_causal(to_temporal_layout(tr.u), tb.tmha, cfg.heads), b, n);
    tr.x2 = add(tr.x1, mul_last(tr.m, tb.gate_alpha));
  }
  tr.h3 = layer_norm(tr.x2, p.ln2.gamma, p.ln2.beta, cfg.norm_eps);
  tr.f = ffn_forward(tr.h3, p.ffn);
  tr.out = add(tr.x2, tr.f);
  return tr;
}

VideoBatch progressive_layer_forward(const VideoBatch& v, const LayerParams& p, const PvcConfig& cfg) {
  VideoBatch out;
  out.features = trace_layer(v.features, v.timestamps, p, cfg).out;
  out.timestamps = v.timestamps;
  // Frames are no longer guaranteed equal once temporal conditioning has run.
  out.is_static = v.is_static && !p.progressive();
  return out;
}

void check_vit_params(const PvcConfig& cfg, const VitParams& params) {
  if (params.layers.size() != cfg.layers) {
    throw std::invalid_argument("model has " + std::to_string(params.layers.size()) + " layers, config expects " +
                                std::to_string(cfg.layers));
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const bool want = l >= cfg.plain_layers();
    if (params.layers[l].progressive() != want) {
      throw std::invalid_argument("layer " + std::to_string(l) + (want ? " must" : " must not") +
                                  " carry a temporal branch");
    }
  }
}

VideoBatch vit_forward(const VideoBatch& v, const PvcConfig& cfg, const VitParams& params) {
  check_vit_params(cfg, params);
  v.validate();
  VideoBatch cur = v;
  for (const LayerParams& layer : params.layers) cur = progressive_layer_forward(cur, layer, cfg);
  return cur;
}

Tensor plain_vit_per_frame(const Tensor& features, const PvcConfig& cfg, const VitParams& params) {
  check_vit_params(cfg, params);
  require(features.ndim() == 4, "plain_vit_per_frame expects [B,T,N,C]");
  const std::size_t frames = features.dim(0) * features.dim(1), n = features.dim(2), c = features.dim(3);
  Tensor out(features.shape());
  for (std::size_t f = 0; f < frames; ++f) {
    Tensor x({1, n, c}, std::vector<double>(features.raw() + f * n * c, features.raw() + (f + 1) * n * c));
    for (const LayerParams& p : params.layers) {
      x = add(x, spatial_mha(layer_norm(x, p.ln1.gamma, p.ln1.beta, cfg.norm_eps), p.smha, cfg.heads));
      x = add(x, ffn_forward(layer_norm(x, p.ln2.gamma, p.ln2.beta, cfg.norm_eps), p.ffn));
    }
    std::copy(x.raw(), x.raw() + n * c, out.raw() + f * n * c);
  }
  return out;
}

}  // namespace pvc
