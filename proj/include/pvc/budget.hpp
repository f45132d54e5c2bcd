#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pvc/manifest.hpp"

namespace pvc {

enum class InputKind { Image, Video };

struct WorkloadSpec {
  InputKind kind = InputKind::Image;
  std::size_t t_img = 1;   // image repeats
  std::size_t tiles = 1;   // tiles per image (or per frame)
  std::size_t frames = 0;  // sampled video frames
  std::size_t text_tokens = 0;

  void validate() const;
  // Same underlying sample; the repeat count is a strategy choice and is ignored.
  bool same_source(const WorkloadSpec& o) const;
};

struct VitArch {
  std::size_t layers = 24;
  std::size_t temporal_layers = 0;
  std::size_t hidden = 1024;
  std::size_t heads = 16;
  std::size_t ffn = 4096;
  std::size_t patch = 14;
  std::size_t image_size = 448;
};

struct CompressionArch {
  std::size_t k = 2;
  std::size_t mlp_hidden = 4096;
  std::size_t out_dim = 4096;
  bool adaptive = false;        // AdaLN + TE ahead of the MLP
  std::size_t adaln_hidden = 0;  // 0: same as the shuffled width
};

// Analytic only; no LLM weights exist here.
struct LlmArch {
  std::size_t layers = 32;
  std::size_t hidden = 4096;
  std::size_t ffn = 11008;
  std::size_t heads = 32;
};

struct ArchSpec {
  std::string name = "custom";
  VitArch vit;
  CompressionArch compression;
  LlmArch llm;
  // FLOPs counted per multiply-accumulate: 2 counts mul and add separately, 1 reports MACs.
  double flops_per_mac = 2.0;

  void validate() const;
};

struct TokenCounts {
  std::size_t patches_per_frame = 0;  // N
  std::size_t tokens_per_frame = 0;   // M = N / k^2
  std::size_t frames_per_stream = 0;  // t_img for images, T for videos
  std::size_t streams = 0;            // tiles
  std::size_t visual_tokens = 0;
  std::size_t llm_sequence = 0;       // visual + text
};

TokenCounts count_tokens(const WorkloadSpec& w, const ArchSpec& a);

struct BudgetReport {
  std::string arch_name;
  WorkloadSpec workload;
  TokenCounts tokens;
  bool reuse = false;
  double vit_plain = 0.0;     // first L - L~ layers
  double vit_temporal = 0.0;  // last L~ layers including T-MHA, AdaLN and TE
  double compression = 0.0;
  double llm_prefill = 0.0;

  double total() const { return vit_plain + vit_temporal + compression + llm_prefill; }
  // One metric per line, "key = value".
  std::string to_text() const;
};

// Matmul-only transformer cost model; per layer over s tokens of width d:
// attention 4*s*d^2 + 2*s^2*d MACs, FFN 2*s*d*f MACs. With reuse on a static
// image the plain ViT layers run once and are shared by all repeats.
BudgetReport estimate_flops(const WorkloadSpec& w, const ArchSpec& a, bool reuse);

struct StageDelta {
  std::string stage;
  double base = 0.0;
  double other = 0.0;
  double absolute = 0.0;
  double relative = 0.0;  // (other - base) / base; 0 when both are 0
};

struct Comparison {
  std::string base_name;
  std::string other_name;
  std::vector<StageDelta> stages;  // vit_plain, vit_temporal, compression, llm_prefill, total
  const StageDelta& total() const { return stages.back(); }
};

// Deltas of every report against the first. Throws if workloads differ.
std::vector<Comparison> compare_strategies(const std::vector<BudgetReport>& reports);
std::string comparison_text(const std::vector<Comparison>& cmp);

// Presets mirroring the 448px image + 2048 text token comparison of an
// InternVL2-8B-style baseline and its progressive-compression variant.
ArchSpec preset_arch(const std::string& name);
WorkloadSpec preset_workload(const std::string& name);
std::vector<std::string> preset_names();

// Flat config: arch.* / workload.* keys overriding the defaults.
ArchSpec arch_from_manifest(const Manifest& m, ArchSpec base);
WorkloadSpec workload_from_manifest(const Manifest& m, WorkloadSpec base);

}  // namespace pvc
