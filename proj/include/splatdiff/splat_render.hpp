#pragma once

#include <span>
#include <utility>

#include "splatdiff/scene_model.hpp"
#include "splatdiff/types.hpp"

namespace splatdiff {

struct RenderOptions {
  /// Low-pass term added to the projected 2D covariance, in px^2.
  double blur = 0.3;
  double alpha_cap = 0.99;
  /// A splat contributes only where its 2D Mahalanobis distance is <= this.
  double cutoff_sigma = 3.0;
  FrustumBounds bounds{};
  int tile_size = 16;
  int threads = 1;
};

/// A primitive projected into one camera.
struct ProjectedSplat {
  std::size_t index = 0;
  double depth = 0.0;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov2d = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d conic = Eigen::Matrix2d::Zero();  // cov2d^{-1}
  double opacity = 0.0;
  // Inclusive pixel bounds of the cutoff ellipse, clipped to the image.
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

/// EWA projection: cov2d = J W Sigma W^T J^T + blur I, with J the
/// perspective Jacobian at the camera-frame mean. Returns false when the
/// mean lies outside the depth range or the footprint misses the image.
bool project_splat(const GaussianPrimitive& prim, std::size_t index,
                   const CameraRecord& cam, const RenderOptions& options,
                   ProjectedSplat& out);

/// Alpha-composites a per-primitive scalar front to back (depth ascending,
/// ties by primitive index). Pixel (x, y) samples image coordinates (x, y).
ScalarImage render_scalar(std::span<const GaussianPrimitive> primitives,
                          std::span<const double> channel, const CameraRecord& cam,
                          const RenderOptions& options = {});

inline ScalarImage render_scalar(const GaussianScene& scene,
                                 std::span<const double> channel,
                                 const CameraRecord& cam,
                                 const RenderOptions& options = {}) {
  return render_scalar(scene.primitives, channel, cam, options);
}

/// Pixel-wise maximum.
ScalarImage fuse_maps(const ScalarImage& m1, const ScalarImage& m2);

struct BinaryAndLabels {
  MaskImage binary;
  LabelImage labels;
};

inline constexpr double kDefaultThreshold = 0.5;

/// binary = fused > threshold; changed pixels get argmax(structural, surface)
/// with ties going to structural.
BinaryAndLabels binarize_and_label(const ScalarImage& fused,
                                   const ScalarImage& structural,
                                   const ScalarImage& surface,
                                   double threshold = kDefaultThreshold);

MaskImage binarize(const ScalarImage& map, double threshold);

/// Rescales intrinsics to a new resolution.
CameraRecord resize_camera(const CameraRecord& cam, int width, int height);

}  // namespace splatdiff
