#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "pvc/tensor.hpp"

namespace pvc {

// PVCT binary layout (all little-endian):
//   "PVCT" | u32 version=1 | u32 ndim | ndim x u64 extents | row-major binary64 payload
inline constexpr std::uint32_t kPvctVersion = 1;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_pvct(std::ostream& os, const Tensor& t);
Tensor read_pvct(std::istream& is);

void save_pvct(const std::filesystem::path& path, const Tensor& t);
Tensor load_pvct(const std::filesystem::path& path);

std::string encode_pvct(const Tensor& t);
Tensor decode_pvct(const std::string& bytes);

}  // namespace pvc
