#pragma once

// Binary checkpoint: magic "SNKT1", u32 entry count, then per entry
// u32 name length, name bytes, u32 rank, rank x u32 dims, float32 data.
// All integers and floats are little-endian. Model metadata is stored as
// one-element entries named meta.*, optimizer accumulators as opt.<param>.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "stereonet/io/pfm.hpp"
#include "stereonet/train.hpp"

namespace stereonet {

namespace detail {

inline constexpr char kCheckpointMagic[5] = {'S', 'N', 'K', 'T', '1'};

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("checkpoint: truncated " + path);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

}  // namespace detail

using TensorMap = std::map<std::string, Tensor<float>>;

inline void write_tensors(const std::string& path, const TensorMap& entries) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot create " + path);
  os.write(detail::kCheckpointMagic, 5);
  detail::put_u32(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) detail::put_u32(os, static_cast<std::uint32_t>(d));
    for (float v : t.data()) detail::put_u32(os, std::bit_cast<std::uint32_t>(v));
  }
  if (!os) throw IoError("checkpoint: write failed for " + path);
}

inline TensorMap read_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path);
  char magic[5];
  if (!is.read(magic, 5) || std::memcmp(magic, detail::kCheckpointMagic, 5) != 0) {
    throw IoError("checkpoint: bad magic in " + path);
  }
  TensorMap out;
  const std::uint32_t n = detail::get_u32(is, path);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name(detail::get_u32(is, path), '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name.size()))) {
      throw IoError("checkpoint: truncated " + path);
    }
    Shape shape(detail::get_u32(is, path));
    for (auto& d : shape) d = detail::get_u32(is, path);
    Tensor<float> t(shape);
    for (auto& v : t.data()) v = std::bit_cast<float>(detail::get_u32(is, path));
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

/// Saves weights, model configuration, step and optimizer state.
inline void save_checkpoint(const std::string& path, TrainState<float>& s) {
  TensorMap m;
  const auto& c = s.model.config;
  m.emplace("meta.K", Tensor<float>::scalar(float(c.K)));
  m.emplace("meta.D", Tensor<float>::scalar(float(c.max_disparity)));
  m.emplace("meta.channels", Tensor<float>::scalar(float(c.channels)));
  m.emplace("meta.mode", Tensor<float>::scalar(c.mode == RefinementMode::kMulti ? 0.f : 1.f));
  m.emplace("meta.leaky_alpha", Tensor<float>::scalar(float(c.leaky_alpha)));
  m.emplace("meta.residual_gain", Tensor<float>::scalar(float(c.residual_gain)));
  // The step counter may exceed float's exact integer range; split it.
  m.emplace("meta.step", Tensor<float>(Shape{2}, {float(s.step >> 20), float(s.step & 0xfffff)}));
  auto params = collect_params<float>(s.model);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m.emplace(params[i]->name, params[i]->value);
    if (i < s.opt.accumulators.size()) m.emplace("opt." + params[i]->name, s.opt.accumulators[i]);
  }
  write_tensors(path, m);
}

inline ModelConfig checkpoint_config(const TensorMap& m, const std::string& path) {
  auto get = [&](const std::string& k) {
    auto it = m.find(k);
    if (it == m.end()) throw IoError("checkpoint: " + path + " lacks " + k);
    return double(it->second[0]);
  };
  ModelConfig c;
  c.K = int(get("meta.K"));
  c.max_disparity = int(get("meta.D"));
  c.channels = std::size_t(get("meta.channels"));
  c.mode = get("meta.mode") == 0 ? RefinementMode::kMulti : RefinementMode::kSingle;
  c.leaky_alpha = get("meta.leaky_alpha");
  c.residual_gain = get("meta.residual_gain");
  return c;
}

inline TrainState<float> load_checkpoint(const std::string& path) {
  const TensorMap m = read_tensors(path);
  TrainState<float> s;
  s.model = build_model<float>(checkpoint_config(m, path), 0);
  auto params = collect_params<float>(s.model);
  bool have_opt = true;
  for (auto* p : params) {
    auto it = m.find(p->name);
    if (it == m.end()) throw IoError("checkpoint: " + path + " lacks parameter " + p->name);
    if (it->second.shape() != p->value.shape()) {
      throw IoError("checkpoint: parameter " + p->name + " has shape " +
                    to_string(it->second.shape()) + ", model expects " +
                    to_string(p->value.shape()));
    }
    p->value = it->second;
    have_opt = have_opt && m.count("opt." + p->name);
  }
  if (have_opt) {
    for (auto* p : params) s.opt.accumulators.push_back(m.at("opt." + p->name));
  }
  if (auto it = m.find("meta.step"); it != m.end() && it->second.size() == 2) {
    s.step = (long(it->second[0]) << 20) | long(it->second[1]);
  }
  return s;
}

}  // namespace stereonet
