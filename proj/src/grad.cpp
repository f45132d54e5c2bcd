#include "pvc/grad.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pvc/checks.hpp"
#include "pvc/manifest.hpp"
#include "pvc/ops.hpp"

namespace pvc {

LinearGrads linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  if (x.shape().back() != in || dy.shape().back() != out || x.size() / in != dy.size() / out) {
    throw std::invalid_argument("linear_backward: shape mismatch");
  }
  const std::size_t rows = x.size() / in;
  LinearGrads g{Tensor(x.shape()), Tensor({in, out}), Tensor({out})};
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.raw() + r * in;
    const double* gr = dy.raw() + r * out;
    double* dxr = g.dx.raw() + r * in;
    for (std::size_t p = 0; p < in; ++p) {
      const double* wr = w.raw() + p * out;
      double* dwr = g.dw.raw() + p * out;
      double acc = 0.0;
      for (std::size_t j = 0; j < out; ++j) {
        acc += gr[j] * wr[j];
        dwr[j] += xr[p] * gr[j];
      }
      dxr[p] = acc;
    }
    for (std::size_t j = 0; j < out; ++j) g.db[j] += gr[j];
  }
  return g;
}

LayerNormGrads layer_norm_backward(const Tensor& x, const Tensor* gamma, const Tensor& dy, double eps) {
  if (x.shape() != dy.shape()) throw std::invalid_argument("layer_norm_backward: shape mismatch");
  const std::size_t c = x.shape().back(), rows = x.size() / c;
  const double n = static_cast<double>(c);
  LayerNormGrads g{Tensor(x.shape()), Tensor({c}), Tensor({c})};
  std::vector<double> xhat(c), gx(c);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.raw() + r * c;
    const double* dr = dy.raw() + r * c;
    const double pivot = xr[0];
    double mean = 0.0;
    for (std::size_t i = 0; i < c; ++i) mean += xr[i] - pivot;
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < c; ++i) var += ((xr[i] - pivot) - mean) * ((xr[i] - pivot) - mean);
    var /= n;
    const double rstd = 1.0 / std::sqrt(var + eps);
    double mean_g = 0.0, mean_gx = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      xhat[i] = ((xr[i] - pivot) - mean) * rstd;
      gx[i] = gamma ? dr[i] * (*gamma)[i] : dr[i];
      mean_g += gx[i];
      mean_gx += gx[i] * xhat[i];
      g.dgamma[i] += dr[i] * xhat[i];
      g.dbeta[i] += dr[i];
    }
    mean_g /= n;
    mean_gx /= n;
    double* out = g.dx.raw() + r * c;
    for (std::size_t i = 0; i < c; ++i) out[i] = rstd * (gx[i] - mean_g - xhat[i] * mean_gx);
  }
  return g;
}

namespace {

Tensor silu_backward(const Tensor& pre, const Tensor& dy) {
  Tensor d(pre.shape());
  for (std::size_t i = 0; i < pre.size(); ++i) d[i] = dy[i] * silu_grad(pre[i]);
  return d;
}

Tensor gelu_backward(const Tensor& pre, const Tensor& dy) {
  Tensor d(pre.shape());
  for (std::size_t i = 0; i < pre.size(); ++i) d[i] = dy[i] * gelu_grad(pre[i]);
  return d;
}

// Gradient of SiLU(z . w_a) . w_b with respect to z, w_a and w_b.
struct GatedPathGrads {
  Tensor dz, dwa, dwb;
};

GatedPathGrads backward_silu_mlp(const Tensor& z, const Tensor& wa, const Tensor& wb, const Tensor& dy) {
  const Tensor pre = linear(z, wa);
  const LinearGrads outer = linear_backward(silu(pre), wb, dy);
  const LinearGrads inner = linear_backward(z, wa, silu_backward(pre, outer.dx));
  return {inner.dx, inner.dw, outer.dw};
}

// Sums a [B,T,R,D] tensor over B and R, leaving [T,D].
Tensor sum_per_frame(const Tensor& x) {
  const std::size_t t = x.dim(1), r = x.dim(2), d = x.dim(3);
  Tensor out({t, d});
  for (std::size_t i = 0; i < x.size(); ++i) out[((i / (r * d)) % t) * d + i % d] += x[i];
  return out;
}

}  // namespace

TemporalEmbeddingGrads backward_temporal_embedding(const Tensor& t_tilde, const TemporalEmbeddingParams& p,
                                                   const Tensor& dte) {
  const GatedPathGrads g = backward_silu_mlp(t_tilde, p.w1, p.w2, dte);
  return {g.dz, {g.dwa, g.dwb}};
}

AdaLnGrads backward_adaln(const Tensor& x, const Tensor& z, const AdaLnParams& p, const Tensor& dy, double eps) {
  if (x.shape() != z.shape() || x.shape() != dy.shape()) throw std::invalid_argument("backward_adaln: shape mismatch");
  const Tensor normed = layer_norm(x, x.ndim() - 1, nullptr, nullptr, eps);
  const AffineCoeffs c = affine_coeffs(z, p);
  const LayerNormGrads ln = layer_norm_backward(x, nullptr, mul(dy, c.gamma), eps);
  const GatedPathGrads scale_path = backward_silu_mlp(z, p.w3, p.w4, mul(dy, normed));
  const GatedPathGrads shift_path = backward_silu_mlp(z, p.w5, p.w6, dy);
  return {ln.dx, add(scale_path.dz, shift_path.dz), {scale_path.dwa, scale_path.dwb, shift_path.dwa, shift_path.dwb}};
}

AttentionGrads backward_attention(const Tensor& x, const AttentionParams& p, std::size_t heads, bool causal,
                                  const Tensor& dy) {
  AttentionTrace tr;
  multi_head_attention(x, p, heads, causal, &tr);
  const std::size_t seqs = x.dim(0), len = x.dim(1), c = x.dim(2), dh = c / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  const LinearGrads out = linear_backward(tr.context, p.wo, dy);
  Tensor dq(x.shape()), dk(x.shape()), dv(x.shape());
  std::vector<double> dp(len);
  for (std::size_t s = 0; s < seqs; ++s) {
    const std::size_t base = s * len * c;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t ho = base + h * dh;
      const double* prob = tr.probs.data() + (s * heads + h) * len * len;
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t keys = causal ? i + 1 : len;
        const double* dctx = out.dx.raw() + ho + i * c;
        double row = 0.0;
        for (std::size_t j = 0; j < keys; ++j) {
          const double* vj = tr.v.raw() + ho + j * c;
          double acc = 0.0;
          for (std::size_t d = 0; d < dh; ++d) acc += dctx[d] * vj[d];
          dp[j] = acc;
          row += prob[i * len + j] * acc;
        }
        const double* qi = tr.q.raw() + ho + i * c;
        double* dqi = dq.raw() + ho + i * c;
        for (std::size_t j = 0; j < keys; ++j) {
          const double pij = prob[i * len + j];
          const double ds = pij * (dp[j] - row) * inv_sqrt;
          const double* kj = tr.k.raw() + ho + j * c;
          double* dkj = dk.raw() + ho + j * c;
          double* dvj = dv.raw() + ho + j * c;
          for (std::size_t d = 0; d < dh; ++d) {
            dvj[d] += pij * dctx[d];
            dqi[d] += ds * kj[d];
            dkj[d] += ds * qi[d];
          }
        }
      }
    }
  }
  const LinearGrads gq = linear_backward(x, p.wq, dq);
  const LinearGrads gk = linear_backward(x, p.wk, dk);
  const LinearGrads gv = linear_backward(x, p.wv, dv);
  return {add(add(gq.dx, gk.dx), gv.dx), {gq.dw, gk.dw, gv.dw, out.dw, gq.db, gk.db, gv.db, out.db}};
}

LayerGrads backward_layer(const Tensor& x, const std::vector<double>& timestamps, const LayerParams& p,
                          const PvcConfig& cfg, const Tensor& dy) {
  const LayerTrace tr = trace_layer(x, timestamps, p, cfg);
  if (dy.shape() != tr.out.shape()) throw std::invalid_argument("backward_layer: upstream shape mismatch");
  const std::size_t b = x.dim(0), t = x.dim(1), n = x.dim(2), c = x.dim(3);
  LayerGrads g;
  g.dparams = make_layer(cfg, p.progressive());

  // x3 = x2 + FFN(LN2(x2))
  const Tensor pre = linear(tr.h3, p.ffn.w_in, &p.ffn.b_in);
  const LinearGrads ffn_out = linear_backward(gelu(pre), p.ffn.w_out, dy);
  const LinearGrads ffn_in = linear_backward(tr.h3, p.ffn.w_in, gelu_backward(pre, ffn_out.dx));
  const LayerNormGrads ln2 = layer_norm_backward(tr.x2, &p.ln2.gamma, ffn_in.dx, cfg.norm_eps);
  g.dparams.ffn = {ffn_in.dw, ffn_in.db, ffn_out.dw, ffn_out.db};
  g.dparams.ln2 = {ln2.dgamma, ln2.dbeta};
  Tensor dx = add(dy, ln2.dx);

  // x2 = x1 + alpha * T-MHA(AdaLN(x1; x1 + TE))
  if (p.temporal) {
    const TemporalBranch& tb = *p.temporal;
    TemporalBranch& gb = *g.dparams.temporal;
    gb.gate_alpha = sum_to_last(mul(dx, tr.m));
    const AttentionGrads att =
        backward_attention(to_temporal_layout(tr.u), tb.tmha, cfg.heads, true, to_temporal_layout(mul_last(dx, tb.gate_alpha)));
    gb.tmha = att.dparams;
    const AdaLnGrads ada = backward_adaln(tr.x1, tr.z, tb.adaln, from_temporal_layout(att.dx, b, n), cfg.norm_eps);
    gb.adaln = ada.dparams;
    gb.te = backward_temporal_embedding(sinusoidal_embed(timestamps, cfg.ts_scale), tb.te, sum_per_frame(ada.dz))
                .dparams;
    // z = x1 + TE feeds back into x1 alongside the normalized branch.
    dx = add(dx, add(ada.dx, ada.dz));
  }

  // x1 = x0 + S-MHA(LN1(x0))
  const AttentionGrads sp =
      backward_attention(tr.h1.reshaped({b * t, n, c}), p.smha, cfg.heads, false, dx.reshaped({b * t, n, c}));
  g.dparams.smha = sp.dparams;
  const LayerNormGrads ln1 = layer_norm_backward(tr.x0, &p.ln1.gamma, sp.dx.reshaped({b, t, n, c}), cfg.norm_eps);
  g.dparams.ln1 = {ln1.dgamma, ln1.dbeta};
  g.dx = add(dx, ln1.dx);
  return g;
}

CompressionGrads backward_compression(const VideoBatch& v, const CompressionParams& p, const PvcConfig& cfg,
                                      const Tensor& dy) {
  const CompressionTrace tr = trace_compression(v, p, cfg);
  if (dy.shape() != tr.out.shape()) throw std::invalid_argument("backward_compression: upstream shape mismatch");
  CompressionGrads g;
  const LinearGrads out = linear_backward(tr.hidden, p.w_out, dy);
  const LinearGrads in = linear_backward(tr.u, p.w_in, silu_backward(tr.pre, out.dx));
  const AdaLnGrads ada = backward_adaln(tr.shuffled, tr.z, p.adaln, in.dx, cfg.norm_eps);
  const TemporalEmbeddingGrads te =
      backward_temporal_embedding(sinusoidal_embed(v.timestamps, cfg.ts_scale), p.te, sum_per_frame(ada.dz));
  g.dparams = {ada.dparams, te.dparams, in.dw, in.db, out.dw, out.db};
  g.dx = pixel_unshuffle(add(ada.dx, ada.dz), cfg.shuffle_kernel);
  return g;
}

Tensor backward_vit_input(const Tensor& x, const std::vector<double>& timestamps, const PvcConfig& cfg,
                          const VitParams& params, const Tensor& dy) {
  check_vit_params(cfg, params);
  std::vector<Tensor> inputs{x};
  for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) {
    inputs.push_back(trace_layer(inputs.back(), timestamps, params.layers[l], cfg).out);
  }
  Tensor g = dy;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    g = backward_layer(inputs[l], timestamps, params.layers[l], cfg, g).dx;
  }
  return g;
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  Tensor probe = x;
  Tensor grad(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw std::domain_error("finite_diff_grad: non-finite objective");
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

bool GradCheckReport::pass() const {
  return !tensors.empty() && std::all_of(tensors.begin(), tensors.end(), [](const TensorCheck& t) { return t.pass; });
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const TensorCheck& t : tensors) {
    if (!t.structural_zero) m = std::max(m, t.max_rel_error);
  }
  return m;
}

std::string GradCheckReport::to_text() const {
  std::ostringstream os;
  os << "module = " << module << "\n"
     << "seed = " << seed << "\n"
     << "tol = " << format_double(tol) << "\n"
     << "step = " << format_double(step) << "\n"
     << "probe_shape = " << shape_str(probe_shape) << "\n";
  for (const TensorCheck& t : tensors) {
    const std::string key = "tensor." + t.name;
    os << key << ".shape = " << shape_str(t.shape) << "\n";
    if (t.structural_zero) {
      os << key << ".kind = structural_zero\n"
         << key << ".max_abs_analytic = " << format_double(t.max_abs_analytic) << "\n"
         << key << ".max_abs_fd = " << format_double(t.max_abs_fd) << "\n";
    } else {
      os << key << ".max_rel_error = " << format_double(t.max_rel_error) << "\n"
         << key << ".max_entry_rel_error = " << format_double(t.max_entry_rel_error) << "\n";
    }
    os << key << ".status = " << (t.pass ? "pass" : "fail") << "\n";
  }
  os << "max_rel_error = " << format_double(max_rel_error()) << "\n"
     << "result = " << (pass() ? "pass" : "fail") << "\n";
  return os.str();
}

namespace {

double weighted_sum(const Tensor& upstream, const Tensor& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += upstream[i] * y[i];
  return s;
}

bool is_key_bias(const std::string& name) { return name.size() >= 2 && name.compare(name.size() - 2, 2, "bk") == 0; }

// Compares an analytic gradient against central differences of `loss` with respect to `value`.
TensorCheck compare(const std::string& name, Tensor& value, const Tensor& analytic,
                    const std::function<double()>& loss, double step, double tol) {
  const Tensor fd = finite_diff_grad(
      [&](const Tensor& probe) {
        Tensor saved = value;
        value = probe;
        const double l = loss();
        value = std::move(saved);
        return l;
      },
      value, step);
  TensorCheck tc;
  tc.name = name;
  tc.shape = value.shape();
  tc.structural_zero = is_key_bias(name);
  double diff2 = 0.0, fd2 = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    diff2 += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
    fd2 += fd[i] * fd[i];
    tc.max_entry_rel_error =
        std::max(tc.max_entry_rel_error, std::abs(analytic[i] - fd[i]) / std::max(std::abs(fd[i]), 1e-8));
    tc.max_abs_analytic = std::max(tc.max_abs_analytic, std::abs(analytic[i]));
    tc.max_abs_fd = std::max(tc.max_abs_fd, std::abs(fd[i]));
  }
  tc.max_rel_error = std::sqrt(diff2) / std::max(std::sqrt(fd2), 1e-8);
  tc.pass = tc.structural_zero ? (tc.max_abs_analytic <= kStructuralZeroBound && tc.max_abs_fd <= kStructuralZeroBound)
                               : tc.max_rel_error < tol;
  return tc;
}

// Probe geometry: B=1, T=3, N=4, C=8, two heads.
constexpr std::size_t kB = 1, kT = 3, kN = 4, kC = 8, kHeads = 2;

PvcConfig probe_config() {
  PvcConfig cfg;
  cfg.image_size = 2;
  cfg.patch_size = 1;
  cfg.channels = kC;
  cfg.heads = kHeads;
  cfg.ffn_dim = 2 * kC;
  cfg.layers = 1;
  cfg.temporal_layers = 1;
  cfg.shuffle_kernel = 2;
  cfg.min_frames = 1;
  cfg.compress_hidden = 4 * kC;
  cfg.compress_out = kC;
  cfg.validate();
  return cfg;
}

}  // namespace

const std::vector<std::string>& grad_check_modules() {
  static const std::vector<std::string> ids{"adaln", "temporal_embedding", "tmha_causal", "progressive_layer",
                                            "compression"};
  return ids;
}

GradCheckReport run_grad_check(std::string_view module_id, std::uint64_t seed, double tol, double step) {
  const auto& ids = grad_check_modules();
  if (std::find(ids.begin(), ids.end(), module_id) == ids.end()) {
    throw std::invalid_argument("unknown grad-check module '" + std::string(module_id) + "'");
  }
  Rng rng(seed);
  const PvcConfig cfg = probe_config();
  const std::vector<double> ts = relative_timestamps(kT);
  GradCheckReport rep;
  rep.module = std::string(module_id);
  rep.seed = seed;
  rep.tol = tol;
  rep.step = step;
  auto check = [&](const std::string& name, Tensor& value, const Tensor& analytic, const std::function<double()>& loss) {
    rep.tensors.push_back(compare(name, value, analytic, loss, step, tol));
  };

  if (module_id == "adaln") {
    Tensor x = rng.gaussian_tensor({kB, kT, kN, kC}, 1.0);
    Tensor z = rng.gaussian_tensor({kB, kT, kN, kC}, 1.0);
    AdaLnParams p = make_ada_ln(kC, kC);
    randomize(p, rng);
    const Tensor up = rng.gaussian_tensor(x.shape(), 1.0);
    rep.probe_shape = x.shape();
    const AdaLnGrads g = backward_adaln(x, z, p, up, cfg.norm_eps);
    auto loss = [&] { return weighted_sum(up, ada_ln(x, z, p, cfg.norm_eps)); };
    check("x", x, g.dx, loss);
    check("z", z, g.dz, loss);
    check("w3", p.w3, g.dparams.w3, loss);
    check("w4", p.w4, g.dparams.w4, loss);
    check("w5", p.w5, g.dparams.w5, loss);
    check("w6", p.w6, g.dparams.w6, loss);
  } else if (module_id == "temporal_embedding") {
    Tensor tt = sinusoidal_embed(ts, cfg.ts_scale);
    TemporalEmbeddingParams p = make_temporal_embedding(kC, kC);
    randomize(p, rng);
    const Tensor up = rng.gaussian_tensor({kT, kC}, 1.0);
    rep.probe_shape = tt.shape();
    const TemporalEmbeddingGrads g = backward_temporal_embedding(tt, p, up);
    auto loss = [&] { return weighted_sum(up, temporal_embedding(tt, p)); };
    check("t_tilde", tt, g.d_t_tilde, loss);
    check("w1", p.w1, g.dparams.w1, loss);
    check("w2", p.w2, g.dparams.w2, loss);
  } else if (module_id == "tmha_causal") {
    Tensor x = rng.gaussian_tensor({kB * kN, kT, kC}, 1.0);
    AttentionParams p = make_attention(kC);
    randomize(p, rng);
    const Tensor up = rng.gaussian_tensor(x.shape(), 1.0);
    rep.probe_shape = x.shape();
    AttentionGrads g = backward_attention(x, p, kHeads, true, up);
    auto loss = [&] { return weighted_sum(up, temporal_mha_causal(x, p, kHeads)); };
    check("x", x, g.dx, loss);
    std::vector<Tensor*> grads;
    for_each_tensor(g.dparams, "", [&](const std::string&, Tensor& t) { grads.push_back(&t); });
    std::size_t i = 0;
    for_each_tensor(p, "", [&](const std::string& n, Tensor& t) { check(n, t, *grads[i++], loss); });
  } else if (module_id == "progressive_layer") {
    Tensor x = rng.gaussian_tensor({kB, kT, kN, kC}, 1.0);
    LayerParams p = make_layer(cfg, true);
    randomize(p, rng);
    const Tensor up = rng.gaussian_tensor(x.shape(), 1.0);
    rep.probe_shape = x.shape();
    LayerGrads g = backward_layer(x, ts, p, cfg, up);
    auto loss = [&] { return weighted_sum(up, trace_layer(x, ts, p, cfg).out); };
    check("x", x, g.dx, loss);
    std::vector<Tensor*> grads;
    for_each_tensor(g.dparams, "", [&](const std::string&, Tensor& t) { grads.push_back(&t); });
    std::size_t i = 0;
    for_each_tensor(p, "", [&](const std::string& n, Tensor& t) { check(n, t, *grads[i++], loss); });
  } else {  // compression
    VideoBatch v{rng.gaussian_tensor({kB, kT, kN, kC}, 1.0), ts, false};
    CompressionParams p = make_compression(cfg);
    randomize(p, rng);
    const Tensor up = rng.gaussian_tensor({kB, kT, kN / 4, cfg.compression_out()}, 1.0);
    rep.probe_shape = v.features.shape();
    CompressionGrads g = backward_compression(v, p, cfg, up);
    auto loss = [&] { return weighted_sum(up, compress(v, p, cfg)); };
    check("x", v.features, g.dx, loss);
    std::vector<Tensor*> grads;
    for_each_tensor(g.dparams, "", [&](const std::string&, Tensor& t) { grads.push_back(&t); });
    std::size_t i = 0;
    for_each_tensor(p, "", [&](const std::string& n, Tensor& t) { check(n, t, *grads[i++], loss); });
  }
  return rep;
}

}  // namespace pvc
