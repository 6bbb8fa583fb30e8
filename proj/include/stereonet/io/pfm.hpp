#pragma once

// Portable float map. Header: "PF" (3 channels) or "Pf" (1 channel), then
// "width height", then a scale whose sign gives the byte order (negative =
// little-endian). Rows are stored bottom to top; in memory they are top down.

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stereonet/tensor.hpp"

namespace stereonet {

class IoError : public Error {
 public:
  using Error::Error;
};

struct PfmImage {
  Tensor<float> data;  // H x W x C
  double scale = -1.0;

  bool little_endian() const { return scale < 0; }
};

namespace detail {

inline std::string pfm_token(std::istream& in, const std::string& path) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
    } else {
      tok.push_back(c);
    }
  }
  throw IoError("pfm: malformed header in " + path);
}

inline std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

}  // namespace detail

/// `expected_channels` 0 accepts either variant.
inline PfmImage read_pfm(const std::string& path, int expected_channels = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("pfm: cannot open " + path);
  const std::string magic = detail::pfm_token(in, path);
  std::size_t channels;
  if (magic == "PF") {
    channels = 3;
  } else if (magic == "Pf") {
    channels = 1;
  } else {
    throw IoError("pfm: bad magic '" + magic + "' in " + path);
  }
  if (expected_channels != 0 && static_cast<std::size_t>(expected_channels) != channels) {
    throw IoError("pfm: " + path + " has " + std::to_string(channels) + " channel(s), expected " +
                  std::to_string(expected_channels));
  }
  long w, h;
  double scale;
  try {
    w = std::stol(detail::pfm_token(in, path));
    h = std::stol(detail::pfm_token(in, path));
    scale = std::stod(detail::pfm_token(in, path));
  } catch (const std::logic_error&) {
    throw IoError("pfm: malformed header in " + path);
  }
  if (w <= 0 || h <= 0 || scale == 0.0) throw IoError("pfm: malformed header in " + path);

  const std::size_t row = static_cast<std::size_t>(w) * channels;
  std::vector<std::uint32_t> bits(row * static_cast<std::size_t>(h));
  in.read(reinterpret_cast<char*>(bits.data()),
          static_cast<std::streamsize>(bits.size() * sizeof(std::uint32_t)));
  if (static_cast<std::size_t>(in.gcount()) != bits.size() * sizeof(std::uint32_t)) {
    throw IoError("pfm: truncated payload in " + path);
  }
  const bool file_le = scale < 0;
  const bool host_le = std::endian::native == std::endian::little;
  PfmImage out;
  out.scale = scale;
  out.data = Tensor<float>(Shape{std::size_t(h), std::size_t(w), channels});
  for (std::size_t y = 0; y < std::size_t(h); ++y) {
    const std::uint32_t* src = bits.data() + (std::size_t(h) - 1 - y) * row;
    float* dst = out.data.raw() + y * row;
    for (std::size_t i = 0; i < row; ++i) {
      const std::uint32_t v = file_le == host_le ? src[i] : detail::byteswap32(src[i]);
      std::memcpy(dst + i, &v, sizeof v);
    }
  }
  return out;
}

/// Writes H x W x 1 or H x W x 3 (rank 2 is treated as one channel).
/// The magnitude of `scale` is kept; its sign is taken from `little_endian`.
inline void write_pfm(const std::string& path, const Tensor<float>& t, double scale = 1.0,
                      bool little_endian = true) {
  const std::size_t channels = t.rank() == 3 ? t.dim(2) : 1;
  if ((t.rank() != 2 && t.rank() != 3) || (channels != 1 && channels != 3)) {
    throw IoError("pfm: can only write H x W x {1,3}, got " + to_string(t.shape()));
  }
  const std::size_t h = t.dim(0), w = t.dim(1), row = w * channels;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("pfm: cannot create " + path);
  std::ostringstream hdr;
  hdr << (channels == 3 ? "PF" : "Pf") << '\n' << w << ' ' << h << '\n'
      << (little_endian ? -std::abs(scale) : std::abs(scale)) << '\n';
  out << hdr.str();
  const bool host_le = std::endian::native == std::endian::little;
  std::vector<std::uint32_t> buf(row);
  for (std::size_t y = h; y-- > 0;) {
    const float* src = t.raw() + y * row;
    for (std::size_t i = 0; i < row; ++i) {
      std::uint32_t v;
      std::memcpy(&v, src + i, sizeof v);
      buf[i] = little_endian == host_le ? v : detail::byteswap32(v);
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(row * sizeof(std::uint32_t)));
  }
  if (!out) throw IoError("pfm: write failed for " + path);
}

}  // namespace stereonet
