#include "pvc/model.hpp"

#include "pvc/manifest.hpp"
#include "pvc/pvct.hpp"

namespace pvc {

namespace fs = std::filesystem;

PvcModel init_model(const PvcConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  PvcModel m{cfg, init_vit(cfg, rng), {}};
  m.compression = init_compression(cfg, rng);
  return m;
}

namespace {

template <class Visit>
void for_each_model_tensor(PvcModel& m, Visit visit) {
  for_each_tensor(m.vit, [&](const std::string& name, Tensor& t) { visit("vit." + name, t); });
  for_each_tensor(m.compression, "compress.", visit);
}

}  // namespace

fs::path save_model(const PvcModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  Manifest mf;
  mf.set("kind", std::string("pvc-model"));
  model.cfg.write(mf);
  for_each_model_tensor(const_cast<PvcModel&>(model), [&](const std::string& name, Tensor& t) {
    const std::string file = name + ".pvct";
    save_pvct(dir / file, t);
    mf.set("weight." + name, file);
  });
  const fs::path path = dir / "model.txt";
  mf.save(path);
  return path;
}

PvcModel load_model(const fs::path& manifest) {
  const Manifest mf = Manifest::load(manifest);
  if (mf.find("kind").value_or("") != "pvc-model") throw IoError(manifest.string() + ": not a pvc-model manifest");
  PvcConfig cfg;
  try {
    cfg = PvcConfig::read(mf);
  } catch (const std::invalid_argument& e) {
    throw IoError(manifest.string() + ": " + e.what());
  }
  PvcModel model{cfg, {}, make_compression(cfg)};
  model.vit.stem = {Tensor::zeros({cfg.patch_size * cfg.patch_size * 3, cfg.channels}), Tensor::zeros({cfg.channels}),
                    Tensor::zeros({cfg.tokens_per_frame(), cfg.channels})};
  for (std::size_t l = 0; l < cfg.layers; ++l) model.vit.layers.push_back(make_layer(cfg, l >= cfg.plain_layers()));
  const fs::path dir = manifest.parent_path();
  for_each_model_tensor(model, [&](const std::string& name, Tensor& t) {
    Tensor loaded = load_pvct(dir / mf.get("weight." + name));
    if (loaded.shape() != t.shape()) {
      throw IoError("weight " + name + " has shape " + shape_str(loaded.shape()) + ", config expects " +
                    shape_str(t.shape()));
    }
    t = std::move(loaded);
  });
  return model;
}

fs::path save_video_batch(const VideoBatch& v, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  save_pvct(dir / (stem + ".pvct"), v.features);
  Manifest mf;
  mf.set("kind", std::string("video-batch"));
  mf.set("data", stem + ".pvct");
  mf.set("shape", shape_str(v.features.shape()));
  mf.set("timestamps", join_doubles(v.timestamps));
  mf.set("is_static", v.is_static);
  const fs::path path = dir / (stem + ".txt");
  mf.save(path);
  return path;
}

VideoBatch load_video_batch(const fs::path& manifest) {
  const Manifest mf = Manifest::load(manifest);
  if (mf.find("kind").value_or("") != "video-batch") throw IoError(manifest.string() + ": not a video-batch manifest");
  VideoBatch v{load_pvct(manifest.parent_path() / mf.get("data")), mf.get_doubles("timestamps"),
               mf.get_bool("is_static")};
  if (shape_str(v.features.shape()) != mf.get("shape")) throw IoError(manifest.string() + ": payload shape mismatch");
  return v;
}

fs::path save_compressed(const Tensor& tokens, const std::vector<double>& timestamps, const fs::path& dir,
                         const std::string& stem) {
  fs::create_directories(dir);
  save_pvct(dir / (stem + ".pvct"), tokens);
  Manifest mf;
  mf.set("kind", std::string("compressed-tokens"));
  mf.set("data", stem + ".pvct");
  mf.set("B", tokens.dim(0));
  mf.set("T", tokens.dim(1));
  mf.set("M", tokens.dim(2));
  mf.set("C_out", tokens.dim(3));
  mf.set("timestamps", join_doubles(timestamps));
  const fs::path path = dir / (stem + ".txt");
  mf.save(path);
  return path;
}

}  // namespace pvc
