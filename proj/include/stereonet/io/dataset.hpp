#pragma once

// Directory loaders for the two public layouts.
//
// Scene Flow:
//   <root>/frames_cleanpass/<subdirs...>/left/<name>.png
//   <root>/frames_cleanpass/<subdirs...>/right/<name>.png
//   <root>/disparity/<subdirs...>/left/<name>.pfm
//   <root>/disparity/<subdirs...>/right/<name>.pfm   (optional)
// KITTI 2015:
//   <root>/image_2/<id>_10.png, <root>/image_3/<id>_10.png
//   <root>/disp_occ_0/<id>_10.png   16-bit, disparity = value / 256, 0 = no data
//   <root>/disp_noc_0/<id>_10.png   optional, same encoding

#include <algorithm>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "stereonet/io/image.hpp"
#include "stereonet/io/pfm.hpp"
#include "stereonet/io/sample.hpp"

namespace stereonet {

struct SampleFiles {
  std::filesystem::path left, right, gt_left, gt_right, gt_nocc;
};

namespace fs = std::filesystem;

inline std::vector<SampleFiles> list_sceneflow(const fs::path& root) {
  const fs::path frames = root / "frames_cleanpass";
  if (!fs::is_directory(frames)) throw IoError("sceneflow: missing " + frames.string());
  std::vector<SampleFiles> out;
  for (const auto& e : fs::recursive_directory_iterator(frames)) {
    if (!e.is_regular_file() || e.path().parent_path().filename() != "left") continue;
    const fs::path rel = fs::relative(e.path(), frames);
    SampleFiles f;
    f.left = e.path();
    f.right = e.path().parent_path().parent_path() / "right" / e.path().filename();
    f.gt_left = (root / "disparity" / rel).replace_extension(".pfm");
    f.gt_right = f.gt_left.parent_path().parent_path() / "right" / f.gt_left.filename();
    if (!fs::exists(f.right) || !fs::exists(f.gt_left)) continue;
    if (!fs::exists(f.gt_right)) f.gt_right.clear();
    out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.left < b.left; });
  return out;
}

inline std::vector<SampleFiles> list_kitti(const fs::path& root) {
  const fs::path left_dir = root / "image_2";
  if (!fs::is_directory(left_dir)) throw IoError("kitti: missing " + left_dir.string());
  std::vector<SampleFiles> out;
  for (const auto& e : fs::directory_iterator(left_dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() < 7 || name.substr(name.size() - 7) != "_10.png") continue;
    SampleFiles f;
    f.left = e.path();
    f.right = root / "image_3" / name;
    f.gt_left = root / "disp_occ_0" / name;
    if (fs::exists(root / "disp_noc_0" / name)) f.gt_nocc = root / "disp_noc_0" / name;
    if (!fs::exists(f.right) || !fs::exists(f.gt_left)) continue;
    out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.left < b.left; });
  return out;
}

/// 16-bit KITTI disparity PNG; zero means no measurement and becomes NaN.
inline Tensor<float> read_kitti_disparity(const std::string& path) {
  const PngData png = read_png_raw(path);
  if (png.bit_depth != 16 || png.channels != 1) {
    throw IoError("kitti: disparity must be 16-bit single channel: " + path);
  }
  Tensor<float> d(Shape{png.height, png.width, 1});
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = png.samples[i] == 0 ? std::numeric_limits<float>::quiet_NaN()
                               : static_cast<float>(png.samples[i]) / 256.0f;
  }
  return d;
}

inline Tensor<float> read_disparity(const fs::path& p) {
  if (p.extension() == ".pfm") {
    auto img = read_pfm(p.string(), 1).data;
    // Scene Flow stores positive disparities; some exports keep a sign.
    for (auto& v : img.data()) v = std::abs(v);
    return img;
  }
  return read_kitti_disparity(p.string());
}

/// Loads one sample; pixels without finite ground truth are masked out.
inline StereoSample load_sample(const SampleFiles& f) {
  StereoSample s;
  s.left = read_image(f.left.string());
  s.right = read_image(f.right.string());
  if (s.left.shape() != s.right.shape()) {
    throw IoError("dataset: left/right size mismatch for " + f.left.string());
  }
  s.gt_left = read_disparity(f.gt_left);
  if (s.gt_left.dim(0) != s.height() || s.gt_left.dim(1) != s.width()) {
    throw IoError("dataset: ground truth size mismatch for " + f.gt_left.string());
  }
  s.valid_left = finite_mask(s.gt_left);
  for (auto& v : s.gt_left.data()) if (!std::isfinite(v)) v = 0.0f;
  if (!f.gt_right.empty()) {
    auto gr = read_disparity(f.gt_right);
    s.valid_right = finite_mask(gr);
    for (auto& v : gr.data()) if (!std::isfinite(v)) v = 0.0f;
    s.gt_right = std::move(gr);
  }
  if (!f.gt_nocc.empty()) s.nocc = finite_mask(read_disparity(f.gt_nocc));
  return s;
}

}  // namespace stereonet
