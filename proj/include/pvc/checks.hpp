#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pvc/compression.hpp"
#include "pvc/model.hpp"
#include "pvc/config.hpp"
#include "pvc/rng.hpp"
#include "pvc/vit.hpp"

namespace pvc {

// Generic-position weights for mechanism checks: matrices ~ N(0, 1/fan_in),
// gammas ~ U(0.5, 1.5), other vectors ~ N(0, 0.1^2), gates ~ +/-U(0.5, 1.5).
void randomize(LayerParams& p, Rng& rng, bool zero_gate = false);
void randomize(VitParams& p, Rng& rng, bool zero_gate = false);
void randomize(CompressionParams& p, Rng& rng);
void randomize(AttentionParams& p, Rng& rng);
void randomize(AdaLnParams& p, Rng& rng);
void randomize(TemporalEmbeddingParams& p, Rng& rng);

// Zeroes the AdaLN and temporal-embedding weights of every progressive layer and the compression head.
void zero_conditioning(VitParams& vit, CompressionParams& comp);

Tensor random_features(const PvcConfig& cfg, std::size_t batch, std::size_t frames, Rng& rng);

struct InitIdentityResult {
  std::uint64_t seed = 0;
  double max_abs_diff = 0.0;
  bool pass = false;
};

// Gates at zero, everything else random: full stack vs per-frame plain ViT.
InitIdentityResult check_init_identity(const PvcConfig& cfg, std::uint64_t seed, std::size_t frames = 4,
                                       double tol = 1e-15);

struct CausalityResult {
  std::uint64_t seed = 0;
  std::size_t frames = 0;
  // Largest change at frames t < j over all perturbed frames j.
  double max_prefix_change = 0.0;
  // Smallest (over j) largest change at frames t >= j; must be > 0.
  double min_suffix_change = 0.0;
  // Largest |d out_t / d in_t'| entry over t' > t; exact causality means 0.
  double max_future_grad = 0.0;
  bool pass = false;
};

CausalityResult check_causality(const PvcConfig& cfg, std::uint64_t seed, std::size_t frames = 6,
                                double tol = 1e-12);

struct StaticDistinctnessResult {
  std::uint64_t seed = 0;
  double min_pairwise_l2 = 0.0;    // with random conditioning weights
  bool zeroed_frames_identical = false;  // with conditioning weights zeroed
  bool pass = false;
};

// A static t_img-frame video through the stack and the compression head.
StaticDistinctnessResult check_static_distinctness(const PvcConfig& cfg, std::uint64_t seed, double min_l2 = 1e-6);

// Per-frame slices of [B,T,...] as flat vectors, concatenated over B.
double frame_l2_distance(const Tensor& x, std::size_t t0, std::size_t t1);
bool frames_bitwise_equal(const Tensor& x, std::size_t t0, std::size_t t1);

}  // namespace pvc
