// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <chrono>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "pvc/budget.hpp"
#include "pvc/checks.hpp"
#include "pvc/cli.hpp"
#include "pvc/compression.hpp"
#include "pvc/config.hpp"
#include "pvc/grad.hpp"
#include "pvc/input_pipeline.hpp"
#include "pvc/model.hpp"
#include "pvc/pvct.hpp"
#include "pvc/rng.hpp"

using namespace pvc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Criterion 1: 20 seeds, L = 8, L~ = 4, C = 32, zero gates, elementwise within 1e-15.
Outcome zero_gate_identity() {
  const PvcConfig cfg = PvcConfig::toy();
  double worst = 0.0;
  bool ok = cfg.layers == 8 && cfg.temporal_layers == 4 && cfg.channels == 32;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const InitIdentityResult r = check_init_identity(cfg, s, 4, 1e-15);
    worst = std::max(worst, r.max_abs_diff);
    ok &= r.pass && r.max_abs_diff <= 1e-15;
  }
  return {ok, "20 seeds, max |diff| = " + fmt("%.3g", worst)};
}

// Criterion 2: T = 6, perturbing frame j leaves t < j within 1e-12; future gradients exactly 0.
Outcome causality() {
  const PvcConfig cfg = PvcConfig::toy();
  double prefix = 0.0, future = 0.0, suffix = INFINITY;
  bool ok = true;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const CausalityResult r = check_causality(cfg, s, 6, 1e-12);
    prefix = std::max(prefix, r.max_prefix_change);
    future = std::max(future, r.max_future_grad);
    suffix = std::min(suffix, r.min_suffix_change);
    ok &= r.pass && r.max_prefix_change <= 1e-12 && r.max_future_grad == 0.0 && r.min_suffix_change > 0.0;
  }
  return {ok, "5 seeds, max prefix change = " + fmt("%.3g", prefix) + ", max future grad = " + fmt("%.3g", future) +
                  ", min suffix change = " + fmt("%.3g", suffix)};
}

// Criterion 3: all five modules below 1e-6 at h = 1e-5 with probes of at most 10^3 scalars.
Outcome gradient_checks() {
  bool ok = true;
  std::string detail;
  for (const std::string& id : grad_check_modules()) {
    const GradCheckReport r = run_grad_check(id, 0, 1e-6, 1e-5);
    ok &= r.pass() && r.max_rel_error() < 1e-6 && shape_numel(r.probe_shape) <= 1000;
    detail += (detail.empty() ? "" : ", ") + id + " " + fmt("%.2g", r.max_rel_error());
  }
  return {ok, detail};
}

// Criterion 4: 100 random (n, k, C) with n <= 16 against index arithmetic, plus the inverse.
Outcome pixel_shuffle_oracle() {
  Rng rng(2024);
  bool ok = true;
  std::size_t cases = 0;
  while (cases < 100) {
    const std::size_t n = 1 + rng.below(16);
    std::vector<std::size_t> divisors;
    for (std::size_t k = 1; k <= n; ++k) {
      if (n % k == 0) divisors.push_back(k);
    }
    const std::size_t k = divisors[rng.below(divisors.size())];
    const std::size_t c = 1 + rng.below(5), b = 1 + rng.below(2), t = 1 + rng.below(3);
    const Tensor x = rng.gaussian_tensor({b, t, n * n, c});
    const Tensor y = pixel_shuffle(x, k);
    const std::size_t m = n / k;
    bool match = y.shape() == Shape{b, t, m * m, k * k * c};
    for (std::size_t bi = 0; match && bi < b; ++bi) {
      for (std::size_t ti = 0; ti < t; ++ti) {
        for (std::size_t row = 0; row < n; ++row) {
          for (std::size_t col = 0; col < n; ++col) {
            const std::size_t token = (row / k) * m + col / k;
            const std::size_t block = (row % k) * k + col % k;
            for (std::size_t ch = 0; ch < c; ++ch) {
              const double a = y.at({bi, ti, token, block * c + ch});
              const double e = x.at({bi, ti, row * n + col, ch});
              match &= std::memcmp(&a, &e, sizeof(double)) == 0;
            }
          }
        }
      }
    }
    ok &= match && bitwise_equal(pixel_unshuffle(y, k), x);
    ++cases;
  }
  return {ok, std::to_string(cases) + " cases bitwise"};
}

// Criterion 5: exact token arithmetic.
Outcome token_arithmetic() {
  const PvcConfig cfg;
  ArchSpec a;
  a.compression.k = cfg.shuffle_kernel;
  a.vit.temporal_layers = cfg.temporal_layers;
  WorkloadSpec img;
  img.t_img = 4;
  WorkloadSpec vid;
  vid.kind = InputKind::Video;
  vid.frames = 64;
  const TokenCounts ti = count_tokens(img, a), tv = count_tokens(vid, a);
  const bool ok = cfg.tokens_per_frame() == 1024 && cfg.compressed_tokens_per_frame() == 64 &&
                  ti.patches_per_frame == 1024 && ti.tokens_per_frame == 64 && ti.visual_tokens == 256 &&
                  tv.visual_tokens == 4096 && pixel_shuffle(Tensor({1, 1, 1024, 1}), 4).dim(2) == 64;
  return {ok, "1024 patches -> " + std::to_string(ti.tokens_per_frame) + " tokens/frame, image " +
                  std::to_string(ti.visual_tokens) + ", 64-frame video " + std::to_string(tv.visual_tokens)};
}

// Criterion 6: 13.3T +/-15%, 14.1T +/-15%, +6.0% +/-2 pp with reuse.
Outcome budget() {
  const BudgetReport b = estimate_flops(preset_workload("table4-baseline"), preset_arch("table4-baseline"), true);
  const BudgetReport p = estimate_flops(preset_workload("table4-pvc"), preset_arch("table4-pvc"), true);
  const double tb = b.total() / 1e12, tp = p.total() / 1e12;
  const double delta = compare_strategies({b, p})[0].total().relative * 100.0;
  const bool ok = std::abs(tb - 13.3) <= 0.15 * 13.3 && std::abs(tp - 14.1) <= 0.15 * 14.1 && std::abs(delta - 6.0) <= 2.0;
  return {ok, "baseline " + fmt("%.2fT", tb) + ", progressive " + fmt("%.2fT", tp) + ", delta " + fmt("%+.2f%%", delta)};
}

// Criterion 7: static 4-frame input, 20 seeds.
Outcome static_distinctness() {
  const PvcConfig cfg = PvcConfig::toy();
  double worst = INFINITY;
  bool ok = cfg.t_img == 4, identical = true;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const StaticDistinctnessResult r = check_static_distinctness(cfg, s, 1e-6);
    worst = std::min(worst, r.min_pairwise_l2);
    identical &= r.zeroed_frames_identical;
    ok &= r.pass && r.min_pairwise_l2 > 1e-6 && r.zeroed_frames_identical;
  }
  return {ok, "min pairwise L2 = " + fmt("%.3g", worst) + ", zeroed conditioning identical = " +
                  (identical ? "yes" : "no")};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pvc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

// Criterion 8: two independent runs of the full tool chain emit identical bytes,
// and every emitted PVCT artifact survives decode/encode bitwise.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "pvc_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  Rng rng(99);
  RawImage img(112, 56);
  for (auto& px : img.pixels) px = static_cast<std::uint8_t>(rng.below(256));
  write_ppm(root / "in.ppm", img);

  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    ok &= cli({"pipeline", "--image", (root / "in.ppm").string(), "--tile-px", "56", "--out-dir", (d / "px").string()}) == 0;
    ok &= cli({"forward", "--seed", "42", "--input", (d / "px" / "pixels.txt").string(), "--out-dir",
               (d / "feat").string(), "--save-model", (d / "model").string()}) == 0;
    ok &= cli({"compress", "--model", (d / "model" / "model.txt").string(), "--input",
               (d / "feat" / "features.txt").string(), "--out-dir", (d / "tok").string()}) == 0;
  }

  std::size_t artifacts = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root / "a");
    const std::string bytes = slurp(e.path());
    ok &= bytes == slurp(root / "b" / rel);
    if (e.path().extension() == ".pvct") {
      const Tensor t = load_pvct(e.path());
      ok &= encode_pvct(t) == bytes;
      ok &= bitwise_equal(decode_pvct(encode_pvct(t)), t);
      ++artifacts;
    }
  }
  // Reloaded model reproduces the in-memory forward bitwise.
  const PvcModel m = load_model(root / "a" / "model" / "model.txt");
  const PvcModel fresh = init_model(m.cfg, 42);
  const VideoBatch feats = load_video_batch(root / "a" / "feat" / "features.txt");
  const Tensor px = load_pvct(root / "a" / "px" / "pixels.pvct");
  const VideoBatch v = patchify(px, fresh.cfg, fresh.vit.stem, feats.timestamps, true);
  ok &= bitwise_equal(vit_forward(v, fresh.cfg, fresh.vit).features, feats.features);
  ok &= artifacts > 10;
  fs::remove_all(root);
  return {ok, std::to_string(artifacts) + " PVCT artifacts, two runs byte-identical"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "zero-gate init identity", zero_gate_identity},
      {2, "causality", causality},
      {3, "gradient checks", gradient_checks},
      {4, "pixel shuffle oracle", pixel_shuffle_oracle},
      {5, "token arithmetic", token_arithmetic},
      {6, "budget reproduction", budget},
      {7, "static distinctness", static_distinctness},
      {8, "determinism and serialization", determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
