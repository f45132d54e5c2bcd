#include "pvc/pvct.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pvc {

namespace {

template <class U>
void put_le(std::ostream& os, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(bytes.data(), bytes.size());
}

template <class U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) throw IoError("PVCT: truncated stream");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void write_pvct(std::ostream& os, const Tensor& t) {
  os.write("PVCT", 4);
  put_le<std::uint32_t>(os, kPvctVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.ndim()));
  for (std::size_t e : t.shape()) put_le<std::uint64_t>(os, e);
  for (double v : t.data()) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw IoError("PVCT: write failed");
}

Tensor read_pvct(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "PVCT", 4) != 0) throw IoError("PVCT: bad magic");
  const auto version = get_le<std::uint32_t>(is);
  if (version != kPvctVersion) throw IoError("PVCT: unsupported version " + std::to_string(version));
  const auto ndim = get_le<std::uint32_t>(is);
  if (ndim == 0 || ndim > 16) throw IoError("PVCT: invalid rank " + std::to_string(ndim));
  Shape shape(ndim);
  for (auto& e : shape) {
    e = static_cast<std::size_t>(get_le<std::uint64_t>(is));
    if (e == 0) throw IoError("PVCT: zero extent");
  }
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(is));
  return Tensor(std::move(shape), std::move(data));
}

void save_pvct(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_pvct(os, t);
}

Tensor load_pvct(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return read_pvct(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string encode_pvct(const Tensor& t) {
  std::ostringstream os(std::ios::binary);
  write_pvct(os, t);
  return os.str();
}

Tensor decode_pvct(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  return read_pvct(is);
}

}  // namespace pvc
