#include "pvc/config.hpp"

#include "pvc/pvct.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace pvc {

PvcConfig PvcConfig::toy() {
  PvcConfig c;
  c.image_size = 56;
  c.patch_size = 7;
  c.channels = 32;
  c.heads = 4;
  c.ffn_dim = 64;
  c.layers = 8;
  c.temporal_layers = 4;
  c.shuffle_kernel = 4;
  c.min_frames = 1;
  return c;
}

void PvcConfig::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument("invalid config: " + why); };
  if (image_size == 0 || patch_size == 0 || channels == 0 || heads == 0 || ffn_dim == 0) {
    fail("sizes must be positive");
  }
  if (image_size % patch_size != 0) fail("image_size must be divisible by patch_size");
  if (channels % heads != 0) fail("channels must be divisible by heads");
  if (temporal_layers > layers) fail("temporal_layers exceeds layers");
  if (shuffle_kernel == 0 || grid_side() % shuffle_kernel != 0) {
    fail("shuffle kernel must divide the patch grid side (k^2 must divide N)");
  }
  if (t_img == 0) fail("t_img must be positive");
  if (min_frames == 0 || min_frames > max_frames) fail("frame bounds must satisfy 1 <= min <= max");
  if (!(ts_scale > 0.0) || !(norm_eps > 0.0)) fail("ts_scale and norm_eps must be positive");
  for (double s : pixel_std) {
    if (!(s > 0.0)) fail("pixel_std must be positive");
  }
}

void PvcConfig::write(Manifest& m) const {
  m.set("cfg.image_size", image_size);
  m.set("cfg.patch_size", patch_size);
  m.set("cfg.channels", channels);
  m.set("cfg.heads", heads);
  m.set("cfg.ffn_dim", ffn_dim);
  m.set("cfg.layers", layers);
  m.set("cfg.temporal_layers", temporal_layers);
  m.set("cfg.shuffle_kernel", shuffle_kernel);
  m.set("cfg.t_img", t_img);
  m.set("cfg.min_frames", min_frames);
  m.set("cfg.max_frames", max_frames);
  m.set("cfg.ts_scale", ts_scale);
  m.set("cfg.norm_eps", norm_eps);
  m.set("cfg.compress_hidden", compression_hidden());
  m.set("cfg.compress_out", compression_out());
  m.set("cfg.pixel_mean", join_doubles({pixel_mean.begin(), pixel_mean.end()}));
  m.set("cfg.pixel_std", join_doubles({pixel_std.begin(), pixel_std.end()}));
}

PvcConfig PvcConfig::read(const Manifest& m) {
  PvcConfig c;
  auto size_or = [&](const char* key, std::size_t& field) {
    if (m.contains(key)) field = m.get_size(key);
  };
  size_or("cfg.image_size", c.image_size);
  size_or("cfg.patch_size", c.patch_size);
  size_or("cfg.channels", c.channels);
  size_or("cfg.heads", c.heads);
  size_or("cfg.ffn_dim", c.ffn_dim);
  size_or("cfg.layers", c.layers);
  size_or("cfg.temporal_layers", c.temporal_layers);
  size_or("cfg.shuffle_kernel", c.shuffle_kernel);
  size_or("cfg.t_img", c.t_img);
  size_or("cfg.min_frames", c.min_frames);
  size_or("cfg.max_frames", c.max_frames);
  size_or("cfg.compress_hidden", c.compress_hidden);
  size_or("cfg.compress_out", c.compress_out);
  if (m.contains("cfg.ts_scale")) c.ts_scale = m.get_double("cfg.ts_scale");
  if (m.contains("cfg.norm_eps")) c.norm_eps = m.get_double("cfg.norm_eps");
  auto triple = [&](const char* key, std::array<double, 3>& field) {
    if (!m.contains(key)) return;
    const auto v = m.get_doubles(key);
    if (v.size() != 3) throw IoError(std::string("manifest: ") + key + " needs 3 values");
    std::copy(v.begin(), v.end(), field.begin());
  };
  triple("cfg.pixel_mean", c.pixel_mean);
  triple("cfg.pixel_std", c.pixel_std);
  c.validate();
  return c;
}

}  // namespace pvc
