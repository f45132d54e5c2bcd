#include "pvc/checks.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <string>

#include "pvc/grad.hpp"
#include "pvc/ops.hpp"

namespace pvc {

namespace {

void randomize_tensor(const std::string& name, Tensor& t, Rng& rng) {
  if (t.ndim() == 2) {
    t = rng.gaussian_tensor(t.shape(), 1.0 / std::sqrt(static_cast<double>(t.dim(0))));
  } else if (name.find("gamma") != std::string::npos) {
    t = rng.uniform_tensor(t.shape(), 0.5, 1.5);
  } else if (name.find("gate_alpha") != std::string::npos) {
    for (double& v : t.data()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
  } else {
    t = rng.gaussian_tensor(t.shape(), 0.1);
  }
}

}  // namespace

void randomize(LayerParams& p, Rng& rng, bool zero_gate) {
  for_each_tensor(p, "", [&](const std::string& n, Tensor& t) { randomize_tensor(n, t, rng); });
  if (zero_gate && p.temporal) p.temporal->gate_alpha.fill(0.0);
}

void randomize(VitParams& p, Rng& rng, bool zero_gate) {
  for_each_tensor(p, [&](const std::string& n, Tensor& t) { randomize_tensor(n, t, rng); });
  if (zero_gate) {
    for (LayerParams& l : p.layers) {
      if (l.temporal) l.temporal->gate_alpha.fill(0.0);
    }
  }
}

void randomize(CompressionParams& p, Rng& rng) {
  for_each_tensor(p, "", [&](const std::string& n, Tensor& t) { randomize_tensor(n, t, rng); });
}

void randomize(AttentionParams& p, Rng& rng) {
  for_each_tensor(p, "", [&](const std::string& n, Tensor& t) { randomize_tensor(n, t, rng); });
}

void randomize(AdaLnParams& p, Rng& rng) {
  for (Tensor* t : {&p.w3, &p.w4, &p.w5, &p.w6}) randomize_tensor("w", *t, rng);
}

void randomize(TemporalEmbeddingParams& p, Rng& rng) {
  randomize_tensor("w1", p.w1, rng);
  randomize_tensor("w2", p.w2, rng);
}

void zero_conditioning(VitParams& vit, CompressionParams& comp) {
  for (LayerParams& l : vit.layers) {
    if (!l.temporal) continue;
    for (Tensor* t : {&l.temporal->adaln.w3, &l.temporal->adaln.w4, &l.temporal->adaln.w5, &l.temporal->adaln.w6,
                      &l.temporal->te.w1, &l.temporal->te.w2}) {
      t->fill(0.0);
    }
  }
  for (Tensor* t : {&comp.adaln.w3, &comp.adaln.w4, &comp.adaln.w5, &comp.adaln.w6, &comp.te.w1, &comp.te.w2}) {
    t->fill(0.0);
  }
}

Tensor random_features(const PvcConfig& cfg, std::size_t batch, std::size_t frames, Rng& rng) {
  return rng.gaussian_tensor({batch, frames, cfg.tokens_per_frame(), cfg.channels}, 1.0);
}

double frame_l2_distance(const Tensor& x, std::size_t t0, std::size_t t1) {
  const std::size_t frames = x.dim(1), frame = x.size() / (x.dim(0) * frames);
  double s = 0.0;
  for (std::size_t b = 0; b < x.dim(0); ++b) {
    const double* a = x.raw() + (b * frames + t0) * frame;
    const double* c = x.raw() + (b * frames + t1) * frame;
    for (std::size_t i = 0; i < frame; ++i) s += (a[i] - c[i]) * (a[i] - c[i]);
  }
  return std::sqrt(s);
}

bool frames_bitwise_equal(const Tensor& x, std::size_t t0, std::size_t t1) {
  const std::size_t frames = x.dim(1), frame = x.size() / (x.dim(0) * frames);
  for (std::size_t b = 0; b < x.dim(0); ++b) {
    const double* a = x.raw() + (b * frames + t0) * frame;
    const double* c = x.raw() + (b * frames + t1) * frame;
    if (std::memcmp(a, c, frame * sizeof(double)) != 0) return false;
  }
  return true;
}

InitIdentityResult check_init_identity(const PvcConfig& cfg, std::uint64_t seed, std::size_t frames, double tol) {
  Rng rng(seed);
  VitParams params = init_vit(cfg, rng);
  randomize(params, rng, /*zero_gate=*/true);
  const VideoBatch in{random_features(cfg, 2, frames, rng), relative_timestamps(frames), false};
  const Tensor stacked = vit_forward(in, cfg, params).features;
  const Tensor plain = plain_vit_per_frame(in.features, cfg, params);
  InitIdentityResult r;
  r.seed = seed;
  r.max_abs_diff = max_abs_diff(stacked, plain);
  r.pass = r.max_abs_diff < tol;
  return r;
}

CausalityResult check_causality(const PvcConfig& cfg, std::uint64_t seed, std::size_t frames, double tol) {
  Rng rng(seed);
  VitParams params = init_vit(cfg, rng);
  randomize(params, rng);
  const std::vector<double> ts = relative_timestamps(frames);
  const VideoBatch base{random_features(cfg, 1, frames, rng), ts, false};
  const Tensor ref = vit_forward(base, cfg, params).features;
  const std::size_t frame = cfg.tokens_per_frame() * cfg.channels;

  CausalityResult r;
  r.seed = seed;
  r.frames = frames;
  r.min_suffix_change = INFINITY;
  for (std::size_t j = 1; j < frames; ++j) {
    VideoBatch pert = base;
    for (std::size_t i = j * frame; i < (j + 1) * frame; ++i) pert.features[i] += rng.gaussian();
    const Tensor out = vit_forward(pert, cfg, params).features;
    double suffix = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = std::abs(out[i] - ref[i]);
      if (i / frame < j) {
        r.max_prefix_change = std::max(r.max_prefix_change, d);
      } else {
        suffix = std::max(suffix, d);
      }
    }
    r.min_suffix_change = std::min(r.min_suffix_change, suffix);
  }
  if (frames < 2) r.min_suffix_change = 0.0;

  // Upstream gradient only on frame t; every later input frame must receive exactly zero.
  for (std::size_t t = 0; t + 1 < frames; ++t) {
    Tensor up(ref.shape());
    for (std::size_t i = t * frame; i < (t + 1) * frame; ++i) up[i] = rng.gaussian();
    const Tensor g = backward_vit_input(base.features, ts, cfg, params, up);
    for (std::size_t i = (t + 1) * frame; i < g.size(); ++i) r.max_future_grad = std::max(r.max_future_grad, std::abs(g[i]));
  }
  r.pass = r.max_prefix_change <= tol && r.max_future_grad == 0.0 && (frames < 2 || r.min_suffix_change > 0.0);
  return r;
}

StaticDistinctnessResult check_static_distinctness(const PvcConfig& cfg, std::uint64_t seed, double min_l2) {
  Rng rng(seed);
  PvcModel model{cfg, init_vit(cfg, rng), init_compression(cfg, rng)};
  const std::size_t frames = cfg.t_img;
  // One frame repeated t_img times.
  const Tensor frame = random_features(cfg, 1, 1, rng);
  Tensor feats({1, frames, cfg.tokens_per_frame(), cfg.channels});
  for (std::size_t t = 0; t < frames; ++t) std::copy(frame.raw(), frame.raw() + frame.size(), feats.raw() + t * frame.size());
  const VideoBatch in{feats, relative_timestamps(frames), true};

  auto run = [&](const VitParams& vit, const CompressionParams& comp) {
    return compress(vit_forward(in, cfg, vit), comp, cfg);
  };

  StaticDistinctnessResult r;
  r.seed = seed;
  // Random nonzero conditioning and gates on top of the initialized model.
  VitParams vit = model.vit;
  CompressionParams comp = model.compression;
  for (LayerParams& l : vit.layers) {
    if (!l.temporal) continue;
    randomize(l.temporal->adaln, rng);
    randomize(l.temporal->te, rng);
    for (double& a : l.temporal->gate_alpha.data()) a = rng.uniform(0.5, 1.5);
  }
  randomize(comp.adaln, rng);
  randomize(comp.te, rng);
  const Tensor distinct = run(vit, comp);
  r.min_pairwise_l2 = INFINITY;
  for (std::size_t a = 0; a < frames; ++a) {
    for (std::size_t b = a + 1; b < frames; ++b) r.min_pairwise_l2 = std::min(r.min_pairwise_l2, frame_l2_distance(distinct, a, b));
  }
  if (frames < 2) r.min_pairwise_l2 = 0.0;

  zero_conditioning(vit, comp);
  const Tensor same = run(vit, comp);
  r.zeroed_frames_identical = true;
  for (std::size_t t = 1; t < frames; ++t) r.zeroed_frames_identical &= frames_bitwise_equal(same, 0, t);
  r.pass = r.min_pairwise_l2 > min_l2 && r.zeroed_frames_identical;
  return r;
}

}  // namespace pvc
