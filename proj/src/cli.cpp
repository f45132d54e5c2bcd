#include "pvc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "pvc/budget.hpp"
#include "pvc/checks.hpp"
#include "pvc/grad.hpp"
#include "pvc/input_pipeline.hpp"
#include "pvc/manifest.hpp"
#include "pvc/model.hpp"
#include "pvc/pvct.hpp"

namespace pvc {

namespace fs = std::filesystem;

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("PVC_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw CLI::ValidationError("PVC_SEED", std::string("not an unsigned integer: ") + env);
    }
  }
  return 0;
}

struct ModelSource {
  std::string manifest;
  std::string config;
  std::uint64_t seed = 0;
  std::string save_dir;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--model", manifest, "Model manifest (model.txt); omit to initialize from --seed");
    cmd->add_option("--config", config, "Flat cfg.* overrides for a seeded model (toy geometry otherwise)");
    cmd->add_option("--seed", seed, "Initialization seed (default: $PVC_SEED or 0)");
    cmd->add_option("--save-model", save_dir, "Write the model used to this directory");
  }

  PvcModel load() const {
    PvcModel m;
    if (!manifest.empty()) {
      m = load_model(manifest);
    } else {
      PvcConfig cfg = PvcConfig::toy();
      if (!config.empty()) {
        Manifest mf = Manifest::load(config);
        Manifest merged;
        cfg.write(merged);
        for (const auto& [k, v] : mf.entries()) merged.set(k, v);
        cfg = PvcConfig::read(merged);
      }
      m = init_model(cfg, seed);
    }
    if (!save_dir.empty()) save_model(m, save_dir);
    return m;
  }
};

std::string fmt_bool(bool b) { return b ? "pass" : "fail"; }

fs::path save_pixel_batch(const Tensor& pixels, const std::vector<double>& ts, bool is_static, const TileGrid& grid,
                          const fs::path& dir) {
  fs::create_directories(dir);
  save_pvct(dir / "pixels.pvct", pixels);
  Manifest mf;
  mf.set("kind", std::string("pixel-batch"));
  mf.set("data", std::string("pixels.pvct"));
  mf.set("shape", shape_str(pixels.shape()));
  mf.set("timestamps", join_doubles(ts));
  mf.set("is_static", is_static);
  mf.set("grid.rows", grid.rows);
  mf.set("grid.cols", grid.cols);
  const fs::path path = dir / "pixels.txt";
  mf.save(path);
  return path;
}

int run_forward(const ModelSource& src, const std::string& input, const std::string& out_dir, std::ostream& out) {
  const PvcModel model = src.load();
  const Manifest mf = Manifest::load(input);
  if (mf.find("kind").value_or("") != "pixel-batch") throw IoError(input + ": not a pixel-batch manifest");
  const Tensor pixels = load_pvct(fs::path(input).parent_path() / mf.get("data"));
  if (pixels.ndim() != 5 || pixels.dim(2) != model.cfg.image_size || pixels.dim(3) != model.cfg.image_size) {
    throw IoError(input + ": pixel batch " + shape_str(pixels.shape()) + " does not match model image size " +
                  std::to_string(model.cfg.image_size));
  }
  const std::vector<double> ts = mf.get_doubles("timestamps");
  if (ts.size() != pixels.dim(1)) throw IoError(input + ": timestamp count does not match frame count");
  const VideoBatch tokens = patchify(pixels, model.cfg, model.vit.stem, ts, mf.get_bool("is_static"));
  const VideoBatch feats = vit_forward(tokens, model.cfg, model.vit);
  const fs::path path = save_video_batch(feats, out_dir, "features");
  out << "features = " << path.string() << "\n"
      << "shape = " << shape_str(feats.features.shape()) << "\n";
  return kExitOk;
}

int run_compress(const ModelSource& src, const std::string& input, const std::string& out_dir, std::ostream& out) {
  const PvcModel model = src.load();
  const VideoBatch feats = load_video_batch(input);
  if (feats.features.ndim() != 4 || feats.channels() != model.cfg.channels ||
      feats.tokens() != model.cfg.tokens_per_frame()) {
    throw IoError(input + ": features " + shape_str(feats.features.shape()) + " do not match the model");
  }
  const Tensor tokens = compress(feats, model.compression, model.cfg);
  const fs::path path = save_compressed(tokens, feats.timestamps, out_dir, "tokens");
  out << "tokens = " << path.string() << "\n"
      << "shape = " << shape_str(tokens.shape()) << "\n";
  return kExitOk;
}

struct PipelineOptions {
  std::string image, video_stack, video_dir, out_dir;
  std::size_t t_img = 4;
  std::size_t frames = 0;
  std::size_t max_tiles = 12;
  std::size_t tile_px = 448;
  std::size_t min_frames = 16;
  std::size_t max_frames = 96;
  bool tile_video_frames = false;
  std::vector<double> mean{0.485, 0.456, 0.406};
  std::vector<double> stdev{0.229, 0.224, 0.225};
};

int run_pipeline(const PipelineOptions& o, std::ostream& out) {
  const int sources = !o.image.empty() + !o.video_stack.empty() + !o.video_dir.empty();
  if (sources != 1) throw CLI::ValidationError("pipeline", "exactly one of --image, --video-stack, --video-dir");
  if (o.mean.size() != 3 || o.stdev.size() != 3) throw CLI::ValidationError("pipeline", "mean/std need 3 values");
  PixelNorm norm;
  std::copy(o.mean.begin(), o.mean.end(), norm.mean.begin());
  std::copy(o.stdev.begin(), o.stdev.end(), norm.std.begin());

  std::vector<RawVideo> streams;
  TileGrid grid;
  bool is_static = false;
  if (!o.image.empty()) {
    const TiledImage tiled = dynamic_tile(read_ppm(o.image), o.tile_px, o.max_tiles);
    grid = tiled.grid;
    for (const RawImage& tile : tiled.tiles) streams.push_back(image_to_static_video(tile, o.t_img));
    is_static = true;
  } else {
    RawVideo video;
    if (!o.video_stack.empty()) {
      video = video_from_frame_stack(load_pvct(o.video_stack));
    } else {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(o.video_dir)) {
        if (e.path().extension() == ".ppm") files.push_back(e.path());
      }
      if (files.empty()) throw IoError(o.video_dir + ": no .ppm frames");
      std::sort(files.begin(), files.end());
      for (const auto& f : files) video.frames.push_back(read_ppm(f));
    }
    const std::size_t t = o.frames ? o.frames : std::min(video.native_frame_count(), o.max_frames);
    if (t < o.min_frames || t > o.max_frames) {
      throw CLI::ValidationError("--frames", std::to_string(t) + " outside [" + std::to_string(o.min_frames) + ", " +
                                                 std::to_string(o.max_frames) + "]");
    }
    const RawVideo sampled = sample_frames(video, t);
    if (o.tile_video_frames) {
      std::vector<TiledImage> per_frame;
      for (const RawImage& f : sampled.frames) per_frame.push_back(dynamic_tile(f, o.tile_px, o.max_tiles));
      grid = per_frame.front().grid;
      streams.assign(grid.count(), RawVideo{});
      for (const TiledImage& ti : per_frame) {
        for (std::size_t i = 0; i < ti.tiles.size(); ++i) streams[i].frames.push_back(ti.tiles[i]);
      }
    } else {
      RawVideo resized;
      for (const RawImage& f : sampled.frames) resized.frames.push_back(resize_bilinear(f, o.tile_px, o.tile_px));
      streams.push_back(std::move(resized));
    }
  }
  const Tensor pixels = pixel_batch(streams, norm);
  const std::vector<double> ts = relative_timestamps(pixels.dim(1));
  const fs::path path = save_pixel_batch(pixels, ts, is_static, grid, o.out_dir);
  out << "pixels = " << path.string() << "\n"
      << "shape = " << shape_str(pixels.shape()) << "\n"
      << "grid = " << grid.rows << "x" << grid.cols << "\n"
      << "timestamps = " << join_doubles(ts) << "\n";
  return kExitOk;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Progressive visual token compression toolkit", "pvc"};
  app.require_subcommand(1);

  ModelSource fwd_src, comp_src;
  std::string fwd_in, fwd_out, comp_in, comp_out;
  auto* fwd = app.add_subcommand("forward", "Run the ViT stack on a pixel batch");
  fwd_src.add_to(fwd);
  fwd->add_option("--input", fwd_in, "pixel-batch manifest from `pvc pipeline`")->required();
  fwd->add_option("--out-dir", fwd_out, "Output directory")->required();

  auto* cmp = app.add_subcommand("compress", "Compress ViT features to M tokens per frame");
  comp_src.add_to(cmp);
  cmp->add_option("--input", comp_in, "video-batch manifest from `pvc forward`")->required();
  cmp->add_option("--out-dir", comp_out, "Output directory")->required();

  std::uint64_t seed = 0;
  std::size_t trials = 1, frames = 6;
  auto* causal = app.add_subcommand("check-causality", "Perturbation and gradient causality of the toy stack");
  causal->add_option("--seed", seed, "First seed (default: $PVC_SEED or 0)");
  causal->add_option("--trials", trials, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  causal->add_option("--frames", frames, "Frames per clip")->check(CLI::PositiveNumber);

  auto* ident = app.add_subcommand("check-init-identity", "Zero-gate stack vs per-frame plain ViT");
  ident->add_option("--seed", seed, "First seed (default: $PVC_SEED or 0)");
  ident->add_option("--trials", trials, "Number of consecutive seeds")->check(CLI::PositiveNumber);

  std::string module, report_file;
  double tol = 1e-6;
  auto* grad = app.add_subcommand("grad-check", "Analytic backward vs central finite differences");
  grad->add_option("--module", module, "adaln | temporal_embedding | tmha_causal | progressive_layer | compression")
      ->required()
      ->check(CLI::IsMember(grad_check_modules()));
  grad->add_option("--seed", seed, "Seed (default: $PVC_SEED or 0)");
  grad->add_option("--tol", tol, "Max relative error");
  grad->add_option("--out", report_file, "Also write the report to this file");

  std::vector<std::string> presets, configs;
  bool no_reuse = false;
  auto* budget = app.add_subcommand("budget", "Token and FLOPs accounting");
  budget->add_option("--preset", presets, "table4-baseline | table4-pvc (repeatable)")
      ->check(CLI::IsMember(preset_names()));
  budget->add_option("--config", configs, "Flat arch.*/workload.* file (repeatable)")->check(CLI::ExistingFile);
  budget->add_flag("--no-reuse", no_reuse, "Recompute plain ViT layers for every image repeat");

  PipelineOptions po;
  auto* pipe = app.add_subcommand("pipeline", "Standardize an image or video into a pixel batch");
  pipe->add_option("--image", po.image, "PPM (P6) image");
  pipe->add_option("--video-stack", po.video_stack, "PVCT frame stack [L,H,W,3] with values 0..255");
  pipe->add_option("--video-dir", po.video_dir, "Directory of PPM frames (sorted by name)");
  pipe->add_option("--t-img", po.t_img, "Image repeats")->check(CLI::PositiveNumber);
  pipe->add_option("--frames", po.frames, "Frames sampled from a video (default: min(L_v, max))");
  pipe->add_option("--max-tiles", po.max_tiles, "Tile budget for dynamic resolution")->check(CLI::PositiveNumber);
  pipe->add_option("--tile-px", po.tile_px, "Tile edge in pixels")->check(CLI::PositiveNumber);
  pipe->add_option("--min-frames", po.min_frames, "Lower bound on sampled video frames");
  pipe->add_option("--max-frames", po.max_frames, "Upper bound on sampled video frames");
  pipe->add_flag("--tile-video-frames", po.tile_video_frames, "Apply dynamic tiling to every video frame");
  pipe->add_option("--mean", po.mean, "Per-channel mean")->expected(3);
  pipe->add_option("--std", po.stdev, "Per-channel std")->expected(3);
  pipe->add_option("--out-dir", po.out_dir, "Output directory")->required();

  try {
    const std::uint64_t env_seed = default_seed();
    seed = env_seed;
    fwd_src.seed = comp_src.seed = env_seed;
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (*fwd) return run_forward(fwd_src, fwd_in, fwd_out, out);
    if (*cmp) return run_compress(comp_src, comp_in, comp_out, out);
    if (*causal) {
      bool ok = true;
      for (std::size_t i = 0; i < trials; ++i) {
        const CausalityResult r = check_causality(PvcConfig::toy(), seed + i, frames);
        out << "seed = " << r.seed << "\n"
            << "max_prefix_change = " << format_double(r.max_prefix_change) << "\n"
            << "min_suffix_change = " << format_double(r.min_suffix_change) << "\n"
            << "max_future_grad = " << format_double(r.max_future_grad) << "\n"
            << "status = " << fmt_bool(r.pass) << "\n";
        ok &= r.pass;
      }
      out << "result = " << fmt_bool(ok) << "\n";
      return ok ? kExitOk : kExitCheckFailed;
    }
    if (*ident) {
      bool ok = true;
      for (std::size_t i = 0; i < trials; ++i) {
        const InitIdentityResult r = check_init_identity(PvcConfig::toy(), seed + i);
        out << "seed = " << r.seed << "\n"
            << "max_abs_diff = " << format_double(r.max_abs_diff) << "\n"
            << "status = " << fmt_bool(r.pass) << "\n";
        ok &= r.pass;
      }
      out << "result = " << fmt_bool(ok) << "\n";
      return ok ? kExitOk : kExitCheckFailed;
    }
    if (*grad) {
      const GradCheckReport rep = run_grad_check(module, seed, tol);
      const std::string text = rep.to_text();
      out << text;
      if (!report_file.empty()) {
        std::ofstream f(report_file);
        if (!(f << text)) throw IoError("cannot write " + report_file);
      }
      return rep.pass() ? kExitOk : kExitCheckFailed;
    }
    if (*budget) {
      if (presets.empty() && configs.empty()) throw CLI::ValidationError("budget", "give --preset or --config");
      std::vector<BudgetReport> reports;
      for (const std::string& p : presets) reports.push_back(estimate_flops(preset_workload(p), preset_arch(p), !no_reuse));
      for (const std::string& c : configs) {
        const Manifest m = Manifest::load(c);
        ArchSpec base;
        base.name = fs::path(c).stem().string();
        reports.push_back(estimate_flops(workload_from_manifest(m, WorkloadSpec{}), arch_from_manifest(m, base), !no_reuse));
      }
      for (std::size_t i = 0; i < reports.size(); ++i) {
        if (reports.size() > 1) out << "# report " << i << "\n";
        out << reports[i].to_text();
      }
      if (reports.size() > 1) out << comparison_text(compare_strategies(reports));
      return kExitOk;
    }
    if (*pipe) return run_pipeline(po, out);
  } catch (const CLI::ValidationError& e) {
    err << "pvc: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "pvc: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "pvc: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << "pvc: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    err << "pvc: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitUsage;
}

}  // namespace pvc
