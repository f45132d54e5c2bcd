#pragma once

#include <cstdint>
#include <filesystem>

#include "pvc/compression.hpp"
#include "pvc/config.hpp"
#include "pvc/vit.hpp"

namespace pvc {

struct PvcModel {
  PvcConfig cfg;
  VitParams vit;
  CompressionParams compression;
};

// Fully determined by (cfg, seed).
PvcModel init_model(const PvcConfig& cfg, std::uint64_t seed);

// Writes <dir>/model.txt plus one PVCT file per weight tensor; returns the manifest path.
std::filesystem::path save_model(const PvcModel& model, const std::filesystem::path& dir);
// Loads a model manifest; throws IoError on missing files or shape mismatches.
PvcModel load_model(const std::filesystem::path& manifest);

// Video batches and compressed tokens: a PVCT payload plus a sidecar manifest.
std::filesystem::path save_video_batch(const VideoBatch& v, const std::filesystem::path& dir, const std::string& stem);
VideoBatch load_video_batch(const std::filesystem::path& manifest);

std::filesystem::path save_compressed(const Tensor& tokens, const std::vector<double>& timestamps,
                                      const std::filesystem::path& dir, const std::string& stem);

}  // namespace pvc
