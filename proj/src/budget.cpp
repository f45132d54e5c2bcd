#include "pvc/budget.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pvc/conditioning.hpp"

namespace pvc {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

double d(std::size_t v) { return static_cast<double>(v); }

// MACs of one transformer layer over `seqs` independent sequences of length s.
double layer_macs(double seqs, double s, double width, double ffn) {
  const double attention = 4.0 * s * width * width + 2.0 * s * s * width;
  const double mlp = 2.0 * s * width * ffn;
  return seqs * (attention + mlp);
}

}  // namespace

void WorkloadSpec::validate() const {
  require(tiles > 0, "workload: tiles must be positive");
  if (kind == InputKind::Image) {
    require(t_img > 0, "workload: image repeats must be positive");
  } else {
    require(frames > 0, "workload: video frame count must be positive");
  }
}

bool WorkloadSpec::same_source(const WorkloadSpec& o) const {
  return kind == o.kind && tiles == o.tiles && text_tokens == o.text_tokens &&
         (kind == InputKind::Image || frames == o.frames);
}

void ArchSpec::validate() const {
  require(vit.temporal_layers <= vit.layers, "arch: temporal layers exceed ViT layers");
  require(vit.patch > 0 && vit.image_size % vit.patch == 0, "arch: image size must be divisible by patch");
  require(vit.heads > 0 && vit.hidden % vit.heads == 0, "arch: ViT hidden must be divisible by heads");
  require(llm.heads > 0 && llm.hidden % llm.heads == 0, "arch: LLM hidden must be divisible by heads");
  const std::size_t side = vit.image_size / vit.patch;
  require(compression.k > 0 && side % compression.k == 0, "arch: shuffle kernel must divide the patch grid");
  require(flops_per_mac > 0.0, "arch: flops_per_mac must be positive");
}

TokenCounts count_tokens(const WorkloadSpec& w, const ArchSpec& a) {
  w.validate();
  a.validate();
  TokenCounts c;
  const std::size_t side = a.vit.image_size / a.vit.patch;
  c.patches_per_frame = side * side;
  c.tokens_per_frame = c.patches_per_frame / (a.compression.k * a.compression.k);
  c.frames_per_stream = w.kind == InputKind::Image ? w.t_img : w.frames;
  c.streams = w.tiles;
  c.visual_tokens = c.streams * c.frames_per_stream * c.tokens_per_frame;
  c.llm_sequence = c.visual_tokens + w.text_tokens;
  return c;
}

BudgetReport estimate_flops(const WorkloadSpec& w, const ArchSpec& a, bool reuse) {
  BudgetReport r;
  r.arch_name = a.name;
  r.workload = w;
  r.reuse = reuse;
  r.tokens = count_tokens(w, a);
  const TokenCounts& tc = r.tokens;
  const double n = d(tc.patches_per_frame), c = d(a.vit.hidden), f = d(a.vit.ffn);
  const double frames = d(tc.frames_per_stream), streams = d(tc.streams);

  // Plain layers: a static image's repeats are bitwise identical up to the first
  // temporal layer, so with reuse they are computed once per tile.
  const bool shareable = reuse && w.kind == InputKind::Image;
  const double plain_frames = shareable ? 1.0 : frames;
  const double per_layer = layer_macs(streams * plain_frames, n, c, f);
  r.vit_plain = d(a.vit.layers - a.vit.temporal_layers) * per_layer;

  if (a.vit.temporal_layers > 0) {
    const double tokens = streams * frames * n;
    const double spatial_ffn = layer_macs(streams * frames, n, c, f);
    // Causal T-MHA over sequences of length T at each of N positions.
    const double tmha = layer_macs(streams * n, frames, c, 0.0);
    // AdaLN: two D->H->D MLPs per token (H = D); TE: 256->H->C per frame.
    const double adaln = tokens * 4.0 * c * c;
    const double te = frames * (d(kSinusoidalDim) * c + c * c);
    r.vit_temporal = d(a.vit.temporal_layers) * (spatial_ffn + tmha + adaln + te);
  }

  const double out_tokens = d(tc.visual_tokens);
  const double width = d(a.compression.k * a.compression.k) * c;
  double comp = out_tokens * (width * d(a.compression.mlp_hidden) + d(a.compression.mlp_hidden) * d(a.compression.out_dim));
  if (a.compression.adaptive) {
    const double h = a.compression.adaln_hidden ? d(a.compression.adaln_hidden) : width;
    comp += out_tokens * 4.0 * width * h + frames * (d(kSinusoidalDim) * h + h * width);
  }
  r.compression = comp;

  r.llm_prefill = d(a.llm.layers) * layer_macs(1.0, d(tc.llm_sequence), d(a.llm.hidden), d(a.llm.ffn));

  const double k = a.flops_per_mac;
  r.vit_plain *= k;
  r.vit_temporal *= k;
  r.compression *= k;
  r.llm_prefill *= k;
  return r;
}

std::string BudgetReport::to_text() const {
  std::ostringstream os;
  os << "arch = " << arch_name << "\n"
     << "input_kind = " << (workload.kind == InputKind::Image ? "image" : "video") << "\n"
     << "reuse = " << (reuse ? "true" : "false") << "\n"
     << "tokens.patches_per_frame = " << tokens.patches_per_frame << "\n"
     << "tokens.per_frame = " << tokens.tokens_per_frame << "\n"
     << "tokens.frames_per_stream = " << tokens.frames_per_stream << "\n"
     << "tokens.streams = " << tokens.streams << "\n"
     << "tokens.visual = " << tokens.visual_tokens << "\n"
     << "tokens.llm_sequence = " << tokens.llm_sequence << "\n"
     << "flops.vit_plain = " << format_double(vit_plain) << "\n"
     << "flops.vit_temporal = " << format_double(vit_temporal) << "\n"
     << "flops.compression = " << format_double(compression) << "\n"
     << "flops.llm_prefill = " << format_double(llm_prefill) << "\n"
     << "flops.total = " << format_double(total()) << "\n"
     << "flops.total_tera = " << format_double(total() / 1e12) << "\n";
  return os.str();
}

std::vector<Comparison> compare_strategies(const std::vector<BudgetReport>& reports) {
  require(reports.size() >= 2, "compare_strategies needs at least two reports");
  const BudgetReport& base = reports.front();
  std::vector<Comparison> out;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const BudgetReport& o = reports[i];
    require(base.workload.same_source(o.workload), "compare_strategies: reports describe different workloads");
    Comparison cmp{base.arch_name, o.arch_name, {}};
    auto add = [&](const char* stage, double b, double x) {
      cmp.stages.push_back({stage, b, x, x - b, b == 0.0 ? (x == 0.0 ? 0.0 : INFINITY) : (x - b) / b});
    };
    add("vit_plain", base.vit_plain, o.vit_plain);
    add("vit_temporal", base.vit_temporal, o.vit_temporal);
    add("compression", base.compression, o.compression);
    add("llm_prefill", base.llm_prefill, o.llm_prefill);
    add("total", base.total(), o.total());
    out.push_back(std::move(cmp));
  }
  return out;
}

std::string comparison_text(const std::vector<Comparison>& cmp) {
  std::ostringstream os;
  for (std::size_t i = 0; i < cmp.size(); ++i) {
    const std::string p = "delta" + std::to_string(i + 1) + ".";
    os << p << "base = " << cmp[i].base_name << "\n" << p << "other = " << cmp[i].other_name << "\n";
    for (const StageDelta& s : cmp[i].stages) {
      os << p << s.stage << ".absolute = " << format_double(s.absolute) << "\n"
         << p << s.stage << ".relative = " << format_double(s.relative) << "\n";
    }
  }
  return os.str();
}

ArchSpec preset_arch(const std::string& name) {
  ArchSpec a;
  a.name = name;
  // MACs reported as FLOPs, the usual convention of published VLM cost tables.
  a.flops_per_mac = 1.0;
  a.vit = {24, 0, 1024, 16, 4096, 14, 448};
  a.llm = {32, 4096, 11008, 32};
  if (name == "table4-baseline") {
    a.compression = {2, 4096, 4096, false, 0};
  } else if (name == "table4-pvc") {
    a.vit.temporal_layers = 8;
    a.compression = {4, 4096, 4096, true, 0};
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return a;
}

WorkloadSpec preset_workload(const std::string& name) {
  WorkloadSpec w;
  w.kind = InputKind::Image;
  w.tiles = 1;
  w.text_tokens = 2048;
  if (name == "table4-baseline") {
    w.t_img = 1;
  } else if (name == "table4-pvc") {
    w.t_img = 4;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return w;
}

std::vector<std::string> preset_names() { return {"table4-baseline", "table4-pvc"}; }

ArchSpec arch_from_manifest(const Manifest& m, ArchSpec a) {
  auto sz = [&](const char* key, std::size_t& field) {
    if (m.contains(key)) field = m.get_size(key);
  };
  if (m.contains("arch.name")) a.name = m.get("arch.name");
  sz("arch.vit.layers", a.vit.layers);
  sz("arch.vit.temporal_layers", a.vit.temporal_layers);
  sz("arch.vit.hidden", a.vit.hidden);
  sz("arch.vit.heads", a.vit.heads);
  sz("arch.vit.ffn", a.vit.ffn);
  sz("arch.vit.patch", a.vit.patch);
  sz("arch.vit.image_size", a.vit.image_size);
  sz("arch.compression.k", a.compression.k);
  sz("arch.compression.mlp_hidden", a.compression.mlp_hidden);
  sz("arch.compression.out_dim", a.compression.out_dim);
  sz("arch.compression.adaln_hidden", a.compression.adaln_hidden);
  if (m.contains("arch.compression.adaptive")) a.compression.adaptive = m.get_bool("arch.compression.adaptive");
  sz("arch.llm.layers", a.llm.layers);
  sz("arch.llm.hidden", a.llm.hidden);
  sz("arch.llm.ffn", a.llm.ffn);
  sz("arch.llm.heads", a.llm.heads);
  if (m.contains("arch.flops_per_mac")) a.flops_per_mac = m.get_double("arch.flops_per_mac");
  a.validate();
  return a;
}

WorkloadSpec workload_from_manifest(const Manifest& m, WorkloadSpec w) {
  if (m.contains("workload.kind")) {
    const std::string k = m.get("workload.kind");
    if (k == "image") {
      w.kind = InputKind::Image;
    } else if (k == "video") {
      w.kind = InputKind::Video;
    } else {
      throw std::invalid_argument("workload.kind must be image or video");
    }
  }
  auto sz = [&](const char* key, std::size_t& field) {
    if (m.contains(key)) field = m.get_size(key);
  };
  sz("workload.t_img", w.t_img);
  sz("workload.tiles", w.tiles);
  sz("workload.frames", w.frames);
  sz("workload.text_tokens", w.text_tokens);
  w.validate();
  return w;
}

}  // namespace pvc
