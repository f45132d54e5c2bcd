#pragma once

#include <array>
#include <cstddef>

#include "pvc/conditioning.hpp"
#include "pvc/manifest.hpp"

namespace pvc {

// Architectural constants. Defaults follow the ViT-L/14 @ 448 setup with
// progressive encoding in the last 8 of 24 layers and 4x4 token shuffling.
struct PvcConfig {
  std::size_t image_size = 448;
  std::size_t patch_size = 14;
  std::size_t channels = 1024;
  std::size_t heads = 16;
  std::size_t ffn_dim = 4096;
  std::size_t layers = 24;
  std::size_t temporal_layers = 8;
  std::size_t shuffle_kernel = 4;
  std::size_t t_img = 4;
  std::size_t min_frames = 16;
  std::size_t max_frames = 96;
  double ts_scale = kDefaultTimestampScale;
  double norm_eps = kNormEps;
  // Zero means "use the default": k^2 * C for the hidden width, C for the output width.
  std::size_t compress_hidden = 0;
  std::size_t compress_out = 0;
  std::array<double, 3> pixel_mean{0.485, 0.456, 0.406};
  std::array<double, 3> pixel_std{0.229, 0.224, 0.225};

  // Desk-scale geometry used by the checks and CLI defaults.
  static PvcConfig toy();

  std::size_t grid_side() const { return image_size / patch_size; }
  std::size_t tokens_per_frame() const { return grid_side() * grid_side(); }
  std::size_t compressed_tokens_per_frame() const { return tokens_per_frame() / (shuffle_kernel * shuffle_kernel); }
  std::size_t shuffled_channels() const { return shuffle_kernel * shuffle_kernel * channels; }
  std::size_t compression_hidden() const { return compress_hidden ? compress_hidden : shuffled_channels(); }
  std::size_t compression_out() const { return compress_out ? compress_out : channels; }
  std::size_t plain_layers() const { return layers - temporal_layers; }

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  void write(Manifest& m) const;
  static PvcConfig read(const Manifest& m);
};

}  // namespace pvc
