#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "pvc/checks.hpp"
#include "pvc/conditioning.hpp"
#include "pvc/model.hpp"
#include "pvc/ops.hpp"
#include "pvc/rng.hpp"
#include "pvc/vit.hpp"

using namespace pvc;

namespace {

// Single-head attention written out longhand.
Tensor attention_oracle(const Tensor& x, const AttentionParams& p, bool causal) {
  const std::size_t s = x.dim(0), l = x.dim(1), c = x.dim(2);
  const Tensor q = linear(x, p.wq, &p.bq), k = linear(x, p.wk, &p.bk), v = linear(x, p.wv, &p.bv);
  Tensor ctx({s, l, c}, 0.0);
  for (std::size_t b = 0; b < s; ++b) {
    for (std::size_t i = 0; i < l; ++i) {
      std::vector<double> w(l, 0.0);
      double mx = -1e300;
      const std::size_t last = causal ? i + 1 : l;
      for (std::size_t j = 0; j < last; ++j) {
        double d = 0.0;
        for (std::size_t e = 0; e < c; ++e) d += q.at({b, i, e}) * k.at({b, j, e});
        w[j] = d / std::sqrt(double(c));
        mx = std::max(mx, w[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < last; ++j) z += (w[j] = std::exp(w[j] - mx));
      for (std::size_t j = 0; j < last; ++j) {
        for (std::size_t e = 0; e < c; ++e) ctx.at({b, i, e}) += w[j] / z * v.at({b, j, e});
      }
    }
  }
  return linear(ctx, p.wo, &p.bo);
}

PvcConfig small_config() {
  PvcConfig cfg = PvcConfig::toy();
  cfg.image_size = 16;
  cfg.patch_size = 4;  // N = 16
  cfg.channels = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 16;
  cfg.layers = 3;
  cfg.temporal_layers = 2;
  cfg.shuffle_kernel = 2;
  cfg.validate();
  return cfg;
}

}  // namespace

TEST_CASE("patchify geometry") {
  PvcConfig cfg;
  CHECK(cfg.tokens_per_frame() == 1024);
  CHECK(cfg.grid_side() == 32);

  // 2x2 image, patch 1, identity embedding: tokens are the pixels in raster order.
  PvcConfig tiny = PvcConfig::toy();
  tiny.image_size = 2;
  tiny.patch_size = 1;
  tiny.channels = 3;
  tiny.heads = 1;
  PatchEmbedParams stem{Tensor({3, 3}, 0.0), Tensor({3}, 0.0), Tensor({4, 3}, 0.0)};
  for (std::size_t i = 0; i < 3; ++i) stem.weight.at({i, i}) = 1.0;
  Tensor px({1, 1, 2, 2, 3});
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = double(i);
  const VideoBatch v = patchify(px, tiny, stem, {0.0}, false);
  REQUIRE(v.features.shape() == Shape{1, 1, 4, 3});
  for (std::size_t i = 0; i < 12; ++i) CHECK(v.features[i] == double(i));

  CHECK_THROWS(patchify(Tensor({1, 1, 3, 2, 3}), tiny, stem, {0.0}, false));
  CHECK_THROWS(patchify(px, tiny, stem, {0.0, 1.0}, false));
}

TEST_CASE("spatial attention") {
  Rng rng(3);
  AttentionParams p = make_attention(6);
  randomize(p, rng);
  const Tensor x = rng.gaussian_tensor({2, 5, 6});
  const Tensor ref = attention_oracle(x, p, false);

  SUBCASE("matches the longhand oracle") { CHECK(max_abs_diff(multi_head_attention(x, p, 1, false), ref) < 1e-12); }

  SUBCASE("single token attends to itself") {
    const Tensor one = rng.gaussian_tensor({1, 1, 6});
    const Tensor v = linear(one, p.wv, &p.bv);
    CHECK(max_abs_diff(multi_head_attention(one, p, 2, false), linear(v, p.wo, &p.bo)) < 1e-13);
  }

  SUBCASE("permutation equivariant over tokens") {
    Tensor swapped = x;
    for (std::size_t e = 0; e < 6; ++e) std::swap(swapped.at({0, 1, e}), swapped.at({0, 3, e}));
    const Tensor a = multi_head_attention(x, p, 2, false);
    const Tensor b = multi_head_attention(swapped, p, 2, false);
    for (std::size_t e = 0; e < 6; ++e) {
      CHECK(std::abs(a.at({0, 1, e}) - b.at({0, 3, e})) < 1e-13);
      CHECK(std::abs(a.at({0, 0, e}) - b.at({0, 0, e})) < 1e-13);
    }
  }

  SUBCASE("equal tokens give uniform weights") {
    Tensor same({1, 4, 6});
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t e = 0; e < 6; ++e) same.at({0, i, e}) = 0.1 * double(e);
    }
    AttentionTrace tr;
    multi_head_attention(same, p, 2, false, &tr);
    for (double w : tr.probs) CHECK(std::abs(w - 0.25) < 1e-15);
  }

  CHECK_THROWS(multi_head_attention(x, p, 4, false));  // 6 channels do not split into 4 heads
}

TEST_CASE("causal temporal attention") {
  Rng rng(4);
  AttentionParams p = make_attention(4);
  randomize(p, rng);
  const Tensor x = rng.gaussian_tensor({3, 5, 4});
  CHECK(max_abs_diff(temporal_mha_causal(x, p, 1), attention_oracle(x, p, true)) < 1e-12);

  AttentionTrace tr;
  const Tensor y = multi_head_attention(x, p, 2, true, &tr);
  // Upper triangle of every probability matrix is exactly zero; rows sum to 1.
  for (std::size_t blk = 0; blk < 3 * 2; ++blk) {
    for (std::size_t i = 0; i < 5; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        const double w = tr.probs[(blk * 5 + i) * 5 + j];
        if (j > i) CHECK(w == 0.0);
        row += w;
      }
      CHECK(std::abs(row - 1.0) < 1e-14);
    }
  }
  // Frame 0 only sees itself.
  Tensor first({3, 1, 4});
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t e = 0; e < 4; ++e) first.at({s, 0, e}) = x.at({s, 0, e});
  }
  const Tensor y0 = multi_head_attention(first, p, 2, true);
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t e = 0; e < 4; ++e) CHECK(y.at({s, 0, e}) == y0.at({s, 0, e}));
  }
}

TEST_CASE("temporal layout round trip") {
  Rng rng(5);
  const Tensor x = rng.gaussian_tensor({2, 3, 4, 5});
  const Tensor t = to_temporal_layout(x);
  REQUIRE(t.shape() == Shape{8, 3, 5});
  CHECK(t.at({1 * 4 + 2, 1, 3}) == x.at({1, 1, 2, 3}));
  CHECK(bitwise_equal(from_temporal_layout(t, 2, 4), x));
}

TEST_CASE("progressive layer") {
  const PvcConfig cfg = small_config();
  Rng rng(6);
  LayerParams p = make_layer(cfg, true);
  randomize(p, rng, true);
  const Tensor x = rng.gaussian_tensor({2, 4, cfg.tokens_per_frame(), cfg.channels});
  const auto ts = relative_timestamps(4);

  SUBCASE("zero gate equals the plain layer") {
    LayerParams plain = p;
    plain.temporal.reset();
    const LayerTrace a = trace_layer(x, ts, p, cfg);
    const LayerTrace b = trace_layer(x, ts, plain, cfg);
    CHECK(bitwise_equal(a.out, b.out));
    CHECK(l2_norm(a.m.data()) > 0.0);  // the branch still computes something
  }

  SUBCASE("composition oracle") {
    randomize(p, rng, false);
    const TemporalBranch& tb = *p.temporal;
    const Tensor h1 = layer_norm(x, p.ln1.gamma, p.ln1.beta, cfg.norm_eps);
    const Tensor a1 =
        spatial_mha(h1.reshaped({8, cfg.tokens_per_frame(), cfg.channels}), p.smha, cfg.heads).reshaped(x.shape());
    const Tensor x1 = add(x, a1);
    const Tensor te = temporal_embedding(sinusoidal_embed(ts, cfg.ts_scale), tb.te);
    Tensor z = x1;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const std::size_t t = (i / (cfg.tokens_per_frame() * cfg.channels)) % 4;
      z[i] += te.at({t, i % cfg.channels});
    }
    const Tensor u = ada_ln(x1, z, tb.adaln, cfg.norm_eps);
    const Tensor m = from_temporal_layout(temporal_mha_causal(to_temporal_layout(u), tb.tmha, cfg.heads), 2,
                                          cfg.tokens_per_frame());
    const Tensor x2 = add(x1, mul_last(m, tb.gate_alpha));
    const Tensor out = add(x2, ffn_forward(layer_norm(x2, p.ln2.gamma, p.ln2.beta, cfg.norm_eps), p.ffn));
    CHECK(max_abs_diff(trace_layer(x, ts, p, cfg).out, out) < 1e-12);
  }

  SUBCASE("added parameters") {
    const std::size_t c = cfg.channels, h = c;
    CHECK(p.added_parameter_count() == 4 * c * c + 4 * c + 4 * c * h + 256 * h + h * c + c);
    LayerParams plain = make_layer(cfg, false);
    CHECK(plain.added_parameter_count() == 0);
  }

  SUBCASE("frame 0 does not depend on the clip length") {
    randomize(p, rng, false);
    Tensor one({2, 1, cfg.tokens_per_frame(), cfg.channels});
    const std::size_t frame = cfg.tokens_per_frame() * cfg.channels;
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t i = 0; i < frame; ++i) one[b * frame + i] = x[b * 4 * frame + i];
    }
    const Tensor full = trace_layer(x, ts, p, cfg).out;
    const Tensor single = trace_layer(one, {0.0}, p, cfg).out;
    double diff = 0.0;
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t i = 0; i < frame; ++i) diff = std::max(diff, std::abs(full[b * 4 * frame + i] - single[b * frame + i]));
    }
    CHECK(diff < 1e-12);
  }

  SUBCASE("static flag is cleared by a progressive layer") {
    randomize(p, rng, false);
    Tensor same({1, 2, cfg.tokens_per_frame(), cfg.channels});
    const Tensor f = rng.gaussian_tensor({cfg.tokens_per_frame() * cfg.channels});
    for (std::size_t i = 0; i < same.size(); ++i) same[i] = f[i % f.size()];
    const VideoBatch v{same, {0.0, 1.0}, true};
    const VideoBatch out = progressive_layer_forward(v, p, cfg);
    CHECK_FALSE(out.is_static);
    CHECK(frame_l2_distance(out.features, 0, 1) > 0.0);
  }
}

TEST_CASE("vit stack") {
  PvcConfig cfg = small_config();
  Rng rng(8);
  VitParams params = init_vit(cfg, rng);
  REQUIRE(params.layers.size() == 3);
  CHECK_FALSE(params.layers[0].progressive());
  CHECK(params.layers[1].progressive());
  CHECK(params.layers[2].progressive());
  for (const auto& l : params.layers) {
    if (l.temporal) {
      for (double a : l.temporal->gate_alpha.data()) CHECK(a == 0.0);
    }
  }

  const Tensor x = random_features(cfg, 1, 3, rng);
  const VideoBatch v{x, relative_timestamps(3), false};
  CHECK(bitwise_equal(vit_forward(v, cfg, params).features, plain_vit_per_frame(x, cfg, params)));

  SUBCASE("no progressive layers leaves a static clip static") {
    cfg.temporal_layers = 0;
    Rng r2(9);
    VitParams plain = init_vit(cfg, r2);
    Tensor same({1, 3, cfg.tokens_per_frame(), cfg.channels});
    const Tensor f = r2.gaussian_tensor({cfg.tokens_per_frame() * cfg.channels});
    for (std::size_t i = 0; i < same.size(); ++i) same[i] = f[i % f.size()];
    const VideoBatch out = vit_forward(VideoBatch{same, relative_timestamps(3), true}, cfg, plain);
    CHECK(out.is_static);
    CHECK(frames_bitwise_equal(out.features, 0, 2));
  }

  SUBCASE("layer layout is validated") {
    params.layers[0].temporal = params.layers[1].temporal;
    CHECK_THROWS(check_vit_params(cfg, params));
  }
}

TEST_CASE("model save and load") {
  const PvcConfig cfg = small_config();
  const PvcModel m = init_model(cfg, 11);
  const auto dir = std::filesystem::temp_directory_path() / "pvc_test_model";
  std::filesystem::remove_all(dir);
  const auto manifest = save_model(m, dir);
  const PvcModel back = load_model(manifest);
  CHECK(back.cfg.channels == cfg.channels);
  CHECK(back.cfg.temporal_layers == cfg.temporal_layers);
  std::vector<const Tensor*> a, b;
  for_each_tensor(m.vit, [&](const std::string&, const Tensor& t) { a.push_back(&t); });
  for_each_tensor(back.vit, [&](const std::string&, const Tensor& t) { b.push_back(&t); });
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(bitwise_equal(*a[i], *b[i]));

  // Same seed, same weights.
  const PvcModel again = init_model(cfg, 11);
  CHECK(bitwise_equal(again.vit.layers[2].smha.wq, m.vit.layers[2].smha.wq));
  CHECK(bitwise_equal(again.compression.w_in, m.compression.w_in));
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_model(dir / "model.txt"), std::exception);
}
