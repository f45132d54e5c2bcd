#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "pvc/config.hpp"
#include "pvc/tensor.hpp"

namespace pvc {

struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // RGB, row-major, 3 bytes per pixel

  RawImage() = default;
  RawImage(std::size_t w, std::size_t h);
  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t ch) { return pixels[(y * width + x) * 3 + ch]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t ch) const { return pixels[(y * width + x) * 3 + ch]; }
  bool operator==(const RawImage&) const = default;
};

struct RawVideo {
  std::vector<RawImage> frames;
  bool is_static = false;

  std::size_t native_frame_count() const { return frames.size(); }
  void validate() const;
};

RawVideo image_to_static_video(const RawImage& img, std::size_t t_img);

// idx_i = round(i * (L_v - 1) / (T - 1)), halves rounded up; [0] for T = 1.
std::vector<std::size_t> sample_indices(std::size_t native_frames, std::size_t frames);
RawVideo sample_frames(const RawVideo& video, std::size_t frames);

struct TileGrid {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::size_t count() const { return rows * cols; }
  bool operator==(const TileGrid&) const = default;
};

// Grid with rows*cols <= max_tiles minimizing |cols/rows - width/height|;
// ties go to fewer tiles, then to more columns.
TileGrid select_grid(std::size_t width, std::size_t height, std::size_t max_tiles);

struct TiledImage {
  TileGrid grid;
  RawImage resized;              // cols*tile_px x rows*tile_px
  std::vector<RawImage> tiles;   // row-major over the grid
};

RawImage resize_bilinear(const RawImage& img, std::size_t width, std::size_t height);
TiledImage dynamic_tile(const RawImage& img, std::size_t tile_px, std::size_t max_tiles);
RawImage assemble_tiles(const std::vector<RawImage>& tiles, TileGrid grid);

struct PixelNorm {
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};
};

// [n, H, W, 3] with (p / 255 - mean) / std per channel.
Tensor normalize(const std::vector<RawImage>& tiles, const PixelNorm& norm);
// Inverse map back to the 0..255 scale (not rounded).
Tensor denormalize(const Tensor& pixels, const PixelNorm& norm);

// Stacks B videos of equal length and frame size into [B, T, H, W, 3].
Tensor pixel_batch(const std::vector<RawVideo>& videos, const PixelNorm& norm);

RawImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RawImage& img);

// A frame stack serialized as PVCT [L_v, H, W, 3] with integral values in 0..255.
RawVideo video_from_frame_stack(const Tensor& stack);
Tensor frame_stack(const RawVideo& video);

}  // namespace pvc
