#pragma once

// Plain-text run configuration: one "key = value" per line, '#' starts a
// comment. Unknown keys are rejected so typos do not pass silently.

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "stereonet/model.hpp"
#include "stereonet/train.hpp"

namespace stereonet {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string dataset = "synth";  // synth | sceneflow | kitti
  std::string data_path;
  // synthetic data
  std::size_t synth_count = 200;
  std::size_t synth_width = 128;
  std::size_t synth_height = 64;
  double synth_max_disp = 20.0;
  double synth_noise = 2.0;
  std::uint64_t model_seed = 1;
  std::string checkpoint = "stereonet.ckpt";
  std::string loss_csv = "loss.csv";
  long checkpoint_every = 500;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename V>
V parse_value(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  V out{};
  is >> out;
  if (!is || !(is >> std::ws).eof()) throw ConfigError("config: bad value '" + v + "' for key '" + key + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: bad boolean '" + v + "' for key '" + key + "'");
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
    }
    const std::string k = detail::trim(line.substr(0, eq)), v = detail::trim(line.substr(eq + 1));
    using detail::parse_value;
    if (k == "K") c.model.K = parse_value<int>(k, v);
    else if (k == "D") c.model.max_disparity = parse_value<int>(k, v);
    else if (k == "channels") c.model.channels = parse_value<std::size_t>(k, v);
    else if (k == "refinement_mode") {
      try {
        c.model.mode = parse_refinement_mode(v);
      } catch (const Error&) {
        throw ConfigError("config: bad value '" + v + "' for key 'refinement_mode' (multi|single)");
      }
    }
    else if (k == "residual_gain") c.model.residual_gain = parse_value<double>(k, v);
    else if (k == "lr0") c.train.lr0 = parse_value<double>(k, v);
    else if (k == "decay_rate") c.train.decay_rate = parse_value<double>(k, v);
    else if (k == "decay_steps") c.train.decay_steps = parse_value<long>(k, v);
    else if (k == "iterations") c.train.iterations = parse_value<long>(k, v);
    else if (k == "seed") c.train.seed = parse_value<std::uint64_t>(k, v);
    else if (k == "model_seed") c.model_seed = parse_value<std::uint64_t>(k, v);
    else if (k == "both_sides") c.train.both_sides = detail::parse_bool(k, v);
    else if (k == "dataset") c.dataset = v;
    else if (k == "data_path") c.data_path = v;
    else if (k == "synth_count") c.synth_count = parse_value<std::size_t>(k, v);
    else if (k == "synth_width") c.synth_width = parse_value<std::size_t>(k, v);
    else if (k == "synth_height") c.synth_height = parse_value<std::size_t>(k, v);
    else if (k == "synth_max_disp") c.synth_max_disp = parse_value<double>(k, v);
    else if (k == "synth_noise") c.synth_noise = parse_value<double>(k, v);
    else if (k == "checkpoint") c.checkpoint = v;
    else if (k == "loss_csv") c.loss_csv = v;
    else if (k == "checkpoint_every") c.checkpoint_every = parse_value<long>(k, v);
    else throw ConfigError("config: unknown key '" + k + "'");
  }
  auto check = [](bool ok, const std::string& key, const std::string& why) {
    if (!ok) throw ConfigError("config: key '" + key + "': " + why);
  };
  check(c.model.K >= 1 && c.model.K <= 8, "K", "must be in [1, 8]");
  check(c.model.max_disparity >= 0 && (c.model.max_disparity + 1) % (1 << c.model.K) == 0, "D",
        "(D + 1) must be divisible by 2^K so the cost volume has (D + 1) / 2^K candidates");
  check(c.model.channels >= 1, "channels", "must be >= 1");
  check(c.train.lr0 > 0, "lr0", "must be positive");
  check(c.train.iterations >= 1, "iterations", "must be >= 1");
  check(c.train.decay_rate > 0 && c.train.decay_rate <= 1, "decay_rate", "must be in (0, 1]");
  check(c.dataset == "synth" || c.dataset == "sceneflow" || c.dataset == "kitti", "dataset",
        "must be synth, sceneflow or kitti");
  check(c.dataset == "synth" || !c.data_path.empty(), "data_path", "required for " + c.dataset);
  check(c.synth_count >= 1, "synth_count", "must be >= 1");
  check(c.synth_max_disp >= 0 && c.synth_max_disp < double(c.synth_width) / 4.0, "synth_max_disp",
        "must be in [0, synth_width / 4)");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  return parse_config(in);
}

}  // namespace stereonet
