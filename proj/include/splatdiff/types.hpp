#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "splatdiff/linalg.hpp"

namespace splatdiff {

/// One vertex of a 3DGS PLY file, exactly as stored (no activations applied).
struct RawSplatRecord {
  Vec3 position = Vec3::Zero();
  std::array<double, 4> rotation_wxyz{1.0, 0.0, 0.0, 0.0};
  Vec3 log_scales = Vec3::Zero();
  double opacity_logit = 0.0;
  Vec3 sh_dc = Vec3::Zero();
  std::vector<double> sh_rest;
};

/// Pinhole camera. Camera frame is x right, y down, z forward (OpenCV/COLMAP);
/// a world point p maps to rotation * p + translation.
struct CameraRecord {
  std::int64_t id = 0;
  int width = 0;
  int height = 0;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_camera(const Vec3& world) const {
    return rotation * world + translation;
  }
  Vec3 center() const { return -rotation.transpose() * translation; }
};

enum class ChangeLabel : std::uint8_t { unchanged = 0, structural = 1, surface = 2 };

/// Row-major single-channel image.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> pixels;

  Image() = default;
  Image(int w, int h, T fill = T{})
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return pixels.size(); }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height;
  }
  bool operator==(const Image&) const = default;
};

using ScalarImage = Image<double>;
using MaskImage = Image<std::uint8_t>;
using LabelImage = Image<ChangeLabel>;

/// One row of the per-primitive score table.
struct ScoreRow {
  std::int64_t primitive_id = 0;
  double delta_geo = 0.0;
  double delta_app = 0.0;
  double omega = 0.0;
  double delta_combined = 0.0;
};

}  // namespace splatdiff
