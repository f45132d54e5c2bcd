#include "pvc/input_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "pvc/pvct.hpp"

namespace pvc {

RawImage::RawImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {
  if (w == 0 || h == 0) throw std::invalid_argument("image dimensions must be positive");
}

void RawVideo::validate() const {
  if (frames.empty()) throw std::invalid_argument("video has no frames");
  for (const RawImage& f : frames) {
    if (f.width != frames[0].width || f.height != frames[0].height) {
      throw std::invalid_argument("video frames differ in size");
    }
  }
}

RawVideo image_to_static_video(const RawImage& img, std::size_t t_img) {
  if (t_img == 0) throw std::invalid_argument("image repeat count must be positive");
  return RawVideo{std::vector<RawImage>(t_img, img), true};
}

std::vector<std::size_t> sample_indices(std::size_t native_frames, std::size_t frames) {
  if (frames == 0) throw std::invalid_argument("frame count must be positive");
  if (frames > native_frames) {
    throw std::invalid_argument("cannot sample " + std::to_string(frames) + " frames from a " +
                                std::to_string(native_frames) + "-frame video");
  }
  if (frames == 1) return {0};
  std::vector<std::size_t> idx(frames);
  const std::size_t num = native_frames - 1, den = frames - 1;
  for (std::size_t i = 0; i < frames; ++i) idx[i] = (2 * i * num + den) / (2 * den);
  return idx;
}

RawVideo sample_frames(const RawVideo& video, std::size_t frames) {
  video.validate();
  RawVideo out;
  out.is_static = video.is_static;
  for (std::size_t i : sample_indices(video.native_frame_count(), frames)) out.frames.push_back(video.frames[i]);
  return out;
}

TileGrid select_grid(std::size_t width, std::size_t height, std::size_t max_tiles) {
  if (max_tiles == 0) throw std::invalid_argument("max_tiles must be positive");
  if (width == 0 || height == 0) throw std::invalid_argument("image dimensions must be positive");
  const auto w = static_cast<long double>(width), h = static_cast<long double>(height);
  // |c/r - w/h| = |c*h - r*w| / (r*h); compared exactly by cross-multiplying.
  auto err_num = [&](const TileGrid& g) {
    return std::fabs(static_cast<long double>(g.cols) * h - static_cast<long double>(g.rows) * w);
  };
  TileGrid best;
  for (std::size_t r = 1; r <= max_tiles; ++r) {
    for (std::size_t c = 1; r * c <= max_tiles; ++c) {
      const TileGrid g{r, c};
      const long double lhs = err_num(g) * static_cast<long double>(best.rows);
      const long double rhs = err_num(best) * static_cast<long double>(g.rows);
      const bool better = lhs < rhs || (lhs == rhs && (g.count() < best.count() ||
                                                       (g.count() == best.count() && g.cols > best.cols)));
      if (better) best = g;
    }
  }
  return best;
}

RawImage resize_bilinear(const RawImage& img, std::size_t width, std::size_t height) {
  if (img.width == width && img.height == height) return img;
  RawImage out(width, height);
  const double sx = static_cast<double>(img.width) / static_cast<double>(width);
  const double sy = static_cast<double>(img.height) / static_cast<double>(height);
  auto source = [](double pos, std::size_t extent, std::size_t& i0, std::size_t& i1, double& frac) {
    pos = std::clamp(pos, 0.0, static_cast<double>(extent - 1));
    i0 = static_cast<std::size_t>(pos);
    i1 = std::min(i0 + 1, extent - 1);
    frac = pos - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < height; ++y) {
    std::size_t y0, y1;
    double fy;
    source((static_cast<double>(y) + 0.5) * sy - 0.5, img.height, y0, y1, fy);
    for (std::size_t x = 0; x < width; ++x) {
      std::size_t x0, x1;
      double fx;
      source((static_cast<double>(x) + 0.5) * sx - 0.5, img.width, x0, x1, fx);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double top = img.at(x0, y0, ch) * (1.0 - fx) + img.at(x1, y0, ch) * fx;
        const double bot = img.at(x0, y1, ch) * (1.0 - fx) + img.at(x1, y1, ch) * fx;
        out.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(top * (1.0 - fy) + bot * fy), 0L, 255L));
      }
    }
  }
  return out;
}

TiledImage dynamic_tile(const RawImage& img, std::size_t tile_px, std::size_t max_tiles) {
  if (tile_px == 0) throw std::invalid_argument("tile size must be positive");
  TiledImage out;
  out.grid = select_grid(img.width, img.height, max_tiles);
  out.resized = resize_bilinear(img, out.grid.cols * tile_px, out.grid.rows * tile_px);
  for (std::size_t r = 0; r < out.grid.rows; ++r) {
    for (std::size_t c = 0; c < out.grid.cols; ++c) {
      RawImage tile(tile_px, tile_px);
      for (std::size_t y = 0; y < tile_px; ++y) {
        const auto* src = out.resized.pixels.data() + ((r * tile_px + y) * out.resized.width + c * tile_px) * 3;
        std::copy(src, src + tile_px * 3, tile.pixels.data() + y * tile_px * 3);
      }
      out.tiles.push_back(std::move(tile));
    }
  }
  return out;
}

RawImage assemble_tiles(const std::vector<RawImage>& tiles, TileGrid grid) {
  if (tiles.size() != grid.count() || tiles.empty()) throw std::invalid_argument("tile count does not match grid");
  const std::size_t tw = tiles[0].width, th = tiles[0].height;
  RawImage out(grid.cols * tw, grid.rows * th);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const std::size_t r = i / grid.cols, c = i % grid.cols;
    for (std::size_t y = 0; y < th; ++y) {
      const auto* src = tiles[i].pixels.data() + y * tw * 3;
      std::copy(src, src + tw * 3, out.pixels.data() + ((r * th + y) * out.width + c * tw) * 3);
    }
  }
  return out;
}

Tensor normalize(const std::vector<RawImage>& tiles, const PixelNorm& norm) {
  if (tiles.empty()) throw std::invalid_argument("normalize: no images");
  const std::size_t w = tiles[0].width, h = tiles[0].height;
  Tensor out({tiles.size(), h, w, 3});
  std::size_t o = 0;
  for (const RawImage& img : tiles) {
    if (img.width != w || img.height != h) throw std::invalid_argument("normalize: images differ in size");
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      const std::size_t ch = i % 3;
      out[o++] = (img.pixels[i] / 255.0 - norm.mean[ch]) / norm.std[ch];
    }
  }
  return out;
}

Tensor denormalize(const Tensor& pixels, const PixelNorm& norm) {
  if (pixels.shape().back() != 3) throw std::invalid_argument("denormalize: last axis must be RGB");
  Tensor out(pixels.shape());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const std::size_t ch = i % 3;
    out[i] = (pixels[i] * norm.std[ch] + norm.mean[ch]) * 255.0;
  }
  return out;
}

Tensor pixel_batch(const std::vector<RawVideo>& videos, const PixelNorm& norm) {
  if (videos.empty()) throw std::invalid_argument("pixel_batch: no videos");
  std::vector<RawImage> frames;
  const std::size_t t = videos[0].frames.size();
  for (const RawVideo& v : videos) {
    v.validate();
    if (v.frames.size() != t) throw std::invalid_argument("pixel_batch: videos differ in length");
    frames.insert(frames.end(), v.frames.begin(), v.frames.end());
  }
  Tensor flat = normalize(frames, norm);
  return flat.reshaped({videos.size(), t, flat.dim(1), flat.dim(2), 3});
}

namespace {

std::string ppm_token(std::istream& is) {
  std::string tok;
  char ch;
  while (is.get(ch)) {
    if (ch == '#') {
      std::string rest;
      std::getline(is, rest);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok += ch;
  }
  return tok;
}

}  // namespace

RawImage read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  if (ppm_token(is) != "P6") throw IoError(path.string() + ": only binary PPM (P6) is supported");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(ppm_token(is));
    h = std::stoul(ppm_token(is));
    maxval = std::stoul(ppm_token(is));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PPM header");
  }
  if (w == 0 || h == 0 || maxval != 255) throw IoError(path.string() + ": unsupported PPM geometry or depth");
  RawImage img(w, h);
  if (!is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()))) {
    throw IoError(path.string() + ": truncated PPM payload");
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const RawImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

RawVideo video_from_frame_stack(const Tensor& stack) {
  if (stack.ndim() != 4 || stack.dim(3) != 3) {
    throw std::invalid_argument("frame stack must be [L, H, W, 3], got " + shape_str(stack.shape()));
  }
  RawVideo v;
  const std::size_t frame = stack.dim(1) * stack.dim(2) * 3;
  for (std::size_t f = 0; f < stack.dim(0); ++f) {
    RawImage img(stack.dim(2), stack.dim(1));
    for (std::size_t i = 0; i < frame; ++i) {
      const double p = stack[f * frame + i];
      if (!(p >= 0.0 && p <= 255.0) || p != std::floor(p)) {
        throw std::invalid_argument("frame stack values must be integers in 0..255");
      }
      img.pixels[i] = static_cast<std::uint8_t>(p);
    }
    v.frames.push_back(std::move(img));
  }
  return v;
}

Tensor frame_stack(const RawVideo& video) {
  video.validate();
  const RawImage& f0 = video.frames[0];
  Tensor out({video.frames.size(), f0.height, f0.width, 3});
  std::size_t o = 0;
  for (const RawImage& f : video.frames) {
    for (std::uint8_t p : f.pixels) out[o++] = p;
  }
  return out;
}

}  // namespace pvc
