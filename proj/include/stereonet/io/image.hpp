#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "stereonet/io/pfm.hpp"

namespace stereonet {

namespace detail {

inline std::string ppm_token(std::istream& in, const std::string& path) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#' && tok.empty()) {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
    } else {
      tok.push_back(c);
    }
  }
  throw IoError("ppm: malformed header in " + path);
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

/// Binary PPM (P6, maxval 255) to H x W x 3 floats in [0, 255].
inline Tensor<float> read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("ppm: cannot open " + path);
  if (detail::ppm_token(in, path) != "P6") throw IoError("ppm: not a P6 file: " + path);
  long w, h, maxval;
  try {
    w = std::stol(detail::ppm_token(in, path));
    h = std::stol(detail::ppm_token(in, path));
    maxval = std::stol(detail::ppm_token(in, path));
  } catch (const std::logic_error&) {
    throw IoError("ppm: malformed header in " + path);
  }
  if (w <= 0 || h <= 0) throw IoError("ppm: malformed header in " + path);
  if (maxval != 255) throw IoError("ppm: unsupported bit depth (maxval " + std::to_string(maxval) + ")");
  std::vector<unsigned char> buf(static_cast<std::size_t>(w * h * 3));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
    throw IoError("ppm: truncated payload in " + path);
  }
  Tensor<float> out(Shape{std::size_t(h), std::size_t(w), 3});
  for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i];
  return out;
}

inline void write_ppm(const std::string& path, const Tensor<float>& rgb) {
  if (rgb.rank() != 3 || rgb.dim(2) != 3) throw IoError("ppm: need H x W x 3");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("ppm: cannot create " + path);
  out << "P6\n" << rgb.dim(1) << ' ' << rgb.dim(0) << "\n255\n";
  std::vector<unsigned char> buf(rgb.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = static_cast<unsigned char>(std::lround(std::clamp(rgb[i], 0.0f, 255.0f)));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("ppm: write failed for " + path);
}

/// Decoded PNG samples, row-major, `channels` per pixel.
struct PngData {
  std::size_t width = 0, height = 0, channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

inline PngData read_png_raw(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("png: cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png: out of memory");
  }
  PngData out;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> bytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: decode failed for " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (out.bit_depth < 8) out.bit_depth = 8;
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (out.bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  bytes.resize(stride * out.height);
  rows.resize(out.height);
  for (std::size_t y = 0; y < out.height; ++y) rows[y] = bytes.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out.samples.resize(out.width * out.height * out.channels);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t i = 0; i < out.width * out.channels; ++i) {
      std::uint16_t v;
      if (out.bit_depth == 16) {
        std::memcpy(&v, rows[y] + 2 * i, 2);
      } else {
        v = rows[y][i];
      }
      out.samples[y * out.width * out.channels + i] = v;
    }
  }
  return out;
}

inline void write_png_rgb8(const std::string& path, std::size_t width, std::size_t height,
                           const std::vector<unsigned char>& rgb) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("png: cannot create " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png: out of memory");
  }
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: encode failed for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  for (std::size_t y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(rgb.data() + y * width * 3);
  }
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// 8-bit color PNG or P6 PPM to H x W x 3 in [0, 255]. Gray inputs are
/// replicated, alpha is dropped; 16-bit images are rejected.
inline Tensor<float> read_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("image: cannot open " + path);
  char magic[2] = {};
  probe.read(magic, 2);
  probe.close();
  if (magic[0] == 'P' && magic[1] == '6') return read_ppm(path);
  if (magic[0] == 'P') throw IoError("image: only binary P6 PPM is supported: " + path);
  const PngData png = read_png_raw(path);
  if (png.bit_depth != 8) {
    throw IoError("image: unsupported bit depth " + std::to_string(png.bit_depth) + " in " + path);
  }
  Tensor<float> out(Shape{png.height, png.width, 3});
  for (std::size_t p = 0; p < png.width * png.height; ++p) {
    const std::uint16_t* s = png.samples.data() + p * png.channels;
    const bool gray = png.channels < 3;
    for (std::size_t c = 0; c < 3; ++c) out[p * 3 + c] = s[gray ? 0 : c];
  }
  return out;
}

/// Color ramp used for disparity visualization: viridis sampled at nine
/// evenly spaced stops, linearly interpolated in sRGB.
inline constexpr std::array<std::array<unsigned char, 3>, 9> kDisparityRamp = {{
    {68, 1, 84},
    {71, 44, 122},
    {59, 81, 139},
    {44, 113, 142},
    {33, 144, 141},
    {39, 173, 129},
    {92, 200, 99},
    {170, 220, 50},
    {253, 231, 37},
}};

/// Color for disparity d on [0, max_disp]; values outside are clamped and
/// non-finite values map to black.
inline std::array<unsigned char, 3> disparity_color(float d, float max_disp) {
  if (!std::isfinite(d)) return {0, 0, 0};
  const float t = std::clamp(max_disp > 0 ? d / max_disp : 0.0f, 0.0f, 1.0f);
  const float pos = t * float(kDisparityRamp.size() - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(pos), kDisparityRamp.size() - 2);
  const float f = pos - float(i);
  std::array<unsigned char, 3> rgb;
  for (std::size_t c = 0; c < 3; ++c) {
    const float v = (1 - f) * kDisparityRamp[i][c] + f * kDisparityRamp[i + 1][c];
    rgb[c] = static_cast<unsigned char>(std::lround(v));
  }
  return rgb;
}

/// `invalid` (optional, same size) marks pixels painted black.
inline void write_disparity_png(const std::string& path, const Tensor<float>& disparity,
                                float max_disp, const std::vector<bool>* invalid = nullptr) {
  const std::size_t h = disparity.dim(0), w = disparity.dim(1);
  if (disparity.size() != h * w) throw IoError("disparity png: need a single-channel map");
  std::vector<unsigned char> rgb(h * w * 3);
  for (std::size_t p = 0; p < h * w; ++p) {
    auto c = (invalid && (*invalid)[p]) ? std::array<unsigned char, 3>{0, 0, 0}
                                        : disparity_color(disparity[p], max_disp);
    std::copy(c.begin(), c.end(), rgb.begin() + static_cast<long>(p * 3));
  }
  write_png_rgb8(path, w, h, rgb);
}

}  // namespace stereonet
