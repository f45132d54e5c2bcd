#include <doctest.h>

#include <cmath>

#include "pvc/budget.hpp"
#include "pvc/manifest.hpp"

using namespace pvc;

namespace {

WorkloadSpec image(std::size_t t_img, std::size_t text = 0) {
  WorkloadSpec w;
  w.kind = InputKind::Image;
  w.t_img = t_img;
  w.text_tokens = text;
  return w;
}

WorkloadSpec video(std::size_t frames) {
  WorkloadSpec w;
  w.kind = InputKind::Video;
  w.frames = frames;
  return w;
}

ArchSpec pvc_arch() {
  ArchSpec a;
  a.vit.temporal_layers = 8;
  a.compression.k = 4;
  a.compression.adaptive = true;
  return a;
}

}  // namespace

TEST_CASE("token counts") {
  const ArchSpec a = pvc_arch();
  const TokenCounts img = count_tokens(image(4), a);
  CHECK(img.patches_per_frame == 1024);
  CHECK(img.tokens_per_frame == 64);
  CHECK(img.visual_tokens == 256);
  CHECK(count_tokens(video(64), a).visual_tokens == 4096);
  CHECK_THROWS_AS(count_tokens(video(0), a), std::invalid_argument);
  CHECK_THROWS_AS(count_tokens(image(0), a), std::invalid_argument);

  WorkloadSpec tiled = image(4, 100);
  tiled.tiles = 3;
  const TokenCounts t = count_tokens(tiled, a);
  CHECK(t.visual_tokens == 3 * 4 * 64);
  CHECK(t.llm_sequence == 3 * 4 * 64 + 100);

  ArchSpec bad = a;
  bad.compression.k = 5;  // 32 % 5 != 0
  CHECK_THROWS(count_tokens(image(1), bad));
}

TEST_CASE("token budget equivalence") {
  // Baseline: ratio 4 (k = 2), one image. Progressive: ratio 16 (k = 4) repeated 4 times.
  ArchSpec base;
  base.compression.k = 2;
  const ArchSpec prog = pvc_arch();
  CHECK(count_tokens(image(1), base).visual_tokens == count_tokens(image(4), prog).visual_tokens);
  CHECK(count_tokens(image(4), prog).visual_tokens == 4 * 64);
}

TEST_CASE("preset reproduction") {
  const BudgetReport b = estimate_flops(preset_workload("table4-baseline"), preset_arch("table4-baseline"), true);
  const BudgetReport p = estimate_flops(preset_workload("table4-pvc"), preset_arch("table4-pvc"), true);
  CHECK(std::abs(b.total() / 1e12 - 13.3) <= 0.15 * 13.3);
  CHECK(std::abs(p.total() / 1e12 - 14.1) <= 0.15 * 14.1);
  const auto cmp = compare_strategies({b, p});
  CHECK(std::abs(cmp[0].total().relative * 100.0 - 6.0) <= 2.0);
  CHECK(b.tokens.visual_tokens == 256);
  CHECK(p.tokens.visual_tokens == 256);
  CHECK(b.tokens.llm_sequence == 2304);
  CHECK(std::abs(b.total() - (b.vit_plain + b.vit_temporal + b.compression + b.llm_prefill)) == 0.0);
  CHECK_THROWS_AS(preset_arch("gpt"), std::invalid_argument);
  CHECK(preset_names().size() == 2);
}

TEST_CASE("flops model") {
  SUBCASE("zero-layer spec costs nothing") {
    ArchSpec a;
    a.vit.layers = 0;
    a.compression.mlp_hidden = 0;
    a.llm.layers = 0;
    const BudgetReport r = estimate_flops(image(1, 10), a, true);
    CHECK(r.total() == 0.0);
  }

  SUBCASE("single layer by hand") {
    ArchSpec a;
    a.vit = {1, 0, 4, 2, 8, 1, 2};  // 4 tokens of width 4
    a.compression = {1, 0, 0, false, 0};
    a.llm.layers = 0;
    a.flops_per_mac = 1.0;
    const BudgetReport r = estimate_flops(image(1), a, false);
    CHECK(r.vit_plain == 4.0 * 4 * 16 + 2.0 * 16 * 4 + 2.0 * 4 * 4 * 8);
    a.flops_per_mac = 2.0;
    CHECK(estimate_flops(image(1), a, false).vit_plain == 2.0 * r.vit_plain);
  }

  SUBCASE("monotone in layers, hidden and tokens") {
    const ArchSpec a = pvc_arch();
    const double base = estimate_flops(image(4, 64), a, true).total();
    ArchSpec more = a;
    more.vit.layers += 2;
    CHECK(estimate_flops(image(4, 64), more, true).total() >= base);
    more = a;
    more.llm.layers += 1;
    CHECK(estimate_flops(image(4, 64), more, true).total() >= base);
    more = a;
    more.vit.hidden = 2048;
    more.vit.heads = 16;
    CHECK(estimate_flops(image(4, 64), more, true).total() >= base);
    more = a;
    more.llm.hidden = 5120;
    CHECK(estimate_flops(image(4, 64), more, true).total() >= base);
    CHECK(estimate_flops(image(5, 64), a, true).total() >= base);
    CHECK(estimate_flops(image(4, 65), a, true).total() >= base);
    CHECK(estimate_flops(video(16), a, true).total() <= estimate_flops(video(17), a, true).total());
  }

  SUBCASE("reuse shares only the plain layers") {
    const ArchSpec a = pvc_arch();
    for (std::size_t t : {1, 2, 4, 7}) {
      const BudgetReport on = estimate_flops(image(t, 8), a, true);
      const BudgetReport off = estimate_flops(image(t, 8), a, false);
      CHECK(off.vit_plain == double(t) * on.vit_plain);
      CHECK(off.vit_temporal == on.vit_temporal);
      CHECK(off.compression == on.compression);
      CHECK(off.llm_prefill == on.llm_prefill);
    }
    // Videos are never shared.
    CHECK(estimate_flops(video(8), a, true).vit_plain == estimate_flops(video(8), a, false).vit_plain);
  }
}

TEST_CASE("strategy comparison") {
  const ArchSpec a = pvc_arch();
  ArchSpec b = a;
  b.name = "wide";
  b.llm.ffn = 14336;
  ArchSpec c = a;
  c.name = "deep";
  c.llm.layers = 40;
  const BudgetReport ra = estimate_flops(image(4, 128), a, true);
  const BudgetReport rb = estimate_flops(image(4, 128), b, true);
  const BudgetReport rc = estimate_flops(image(4, 128), c, true);

  const auto same = compare_strategies({ra, ra});
  for (const StageDelta& s : same[0].stages) {
    CHECK(s.absolute == 0.0);
    CHECK(s.relative == 0.0);
  }

  const double ab = compare_strategies({ra, rb})[0].total().relative;
  const double bc = compare_strategies({rb, rc})[0].total().relative;
  const auto three = compare_strategies({ra, rb, rc});
  REQUIRE(three.size() == 2);
  CHECK(std::abs((1.0 + three[1].total().relative) - (1.0 + ab) * (1.0 + bc)) < 1e-12);

  // t_img is a strategy choice; a different sample is not.
  CHECK_NOTHROW(compare_strategies({ra, estimate_flops(image(1, 128), a, true)}));
  CHECK_THROWS_AS(compare_strategies({ra, estimate_flops(image(4, 64), a, true)}), std::invalid_argument);
  CHECK_THROWS_AS(compare_strategies({ra, estimate_flops(video(4), a, true)}), std::invalid_argument);
  CHECK_THROWS(compare_strategies({ra}));

  const std::string text = comparison_text(three);
  CHECK(text.find("delta2.total.relative = ") != std::string::npos);
}

TEST_CASE("config files") {
  Manifest m = Manifest::parse(
      "# custom stack\n"
      "arch.vit.layers = 12\n"
      "arch.vit.temporal_layers = 4\n"
      "arch.compression.k = 4\n"
      "arch.compression.adaptive = true\n"
      "arch.llm.layers = 24\n"
      "workload.kind = video\n"
      "workload.frames = 32\n"
      "workload.text_tokens = 512\n");
  const ArchSpec a = arch_from_manifest(m, ArchSpec{});
  const WorkloadSpec w = workload_from_manifest(m, WorkloadSpec{});
  CHECK(a.vit.layers == 12);
  CHECK(a.vit.temporal_layers == 4);
  CHECK(a.compression.adaptive);
  CHECK(a.llm.layers == 24);
  CHECK(w.kind == InputKind::Video);
  CHECK(count_tokens(w, a).visual_tokens == 32 * 64);

  const BudgetReport r = estimate_flops(w, a, true);
  const Manifest out = Manifest::parse(r.to_text());
  CHECK(out.get_double("flops.total") == r.total());
  CHECK(out.get_size("tokens.visual") == 2048);

  Manifest bad = Manifest::parse("workload.kind = audio\n");
  CHECK_THROWS_AS(workload_from_manifest(bad, WorkloadSpec{}), std::invalid_argument);
  Manifest inconsistent = Manifest::parse("arch.vit.temporal_layers = 30\n");
  CHECK_THROWS_AS(arch_from_manifest(inconsistent, ArchSpec{}), std::invalid_argument);
}
