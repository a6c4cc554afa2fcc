#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "splatdiff/types.hpp"

namespace splatdiff {

/// An activated 3D Gaussian.
struct GaussianPrimitive {
  Vec3 mu = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 S = Vec3::Ones();
  Mat3 Sigma = Mat3::Identity();
  double opacity = 1.0;
  Vec3 color_dc = Vec3::Constant(0.5);
  Vec3 normal = Vec3::UnitZ();
};

/// Fisher information of a primitive's position over its visible cameras.
struct ObservabilityState {
  Mat3 H = Mat3::Zero();
  Mat3 H_pinv = Mat3::Zero();
  double trace_H = 0.0;
  int visible_cameras = 0;
};

struct PrimitiveScores {
  double delta_geo = 1.0;
  double delta_app = 1.0;
  double omega = 0.0;
  double delta_combined = 0.0;
  double residual_surf = 0.0;
};

/// Per-primitive state produced by the drift and scoring stages. Each vector
/// is either empty or has one entry per primitive.
struct DerivedState {
  std::vector<Mat3> sigma_tilde;
  std::vector<ObservabilityState> observability;
  std::vector<Mat3> sigma_eff;
  std::vector<double> lambda_max;
  std::vector<PrimitiveScores> scores;
};

struct GaussianScene {
  std::vector<GaussianPrimitive> primitives;
  std::vector<CameraRecord> cameras;
  /// Index of each primitive in the file it was loaded from.
  std::vector<std::int64_t> source_ids;
  DerivedState derived;

  std::size_t size() const { return primitives.size(); }
};

struct FrustumBounds {
  double z_near = 0.01;
  double z_far = 1000.0;
};

inline constexpr double kShC0 = 0.28209479177387814;

GaussianPrimitive activate(const RawSplatRecord& raw);

/// Inverse of activate up to quaternion sign and clamped colors.
RawSplatRecord deactivate(const GaussianPrimitive& prim);

/// Builds R, Sigma and normal from a rotation and scales.
GaussianPrimitive make_primitive(const Vec3& mu, const Mat3& R, const Vec3& S,
                                 double opacity, const Vec3& color_dc);

/// Column of R for the smallest scale; ties resolve to the highest column.
Vec3 normal_from_axes(const Mat3& R, const Vec3& S);

/// Builds a scene from raw records, dropping primitives with opacity below
/// min_opacity. source_ids keep the original record indices.
GaussianScene make_scene(std::span<const RawSplatRecord> records,
                         std::vector<CameraRecord> cameras,
                         double min_opacity = 0.0);

bool frustum_visible(const Vec3& mu, const CameraRecord& cam,
                     const FrustumBounds& bounds = {});

bool visible_from_any(const Vec3& mu, std::span<const CameraRecord> cams,
                      const FrustumBounds& bounds = {});

/// Keeps the primitives of each scene that lie in at least one frustum of
/// both rigs. Throws PreconditionError when either scene is left empty.
std::pair<GaussianScene, GaussianScene> covisibility_filter(
    const GaussianScene& scene1, const GaussianScene& scene2,
    const FrustumBounds& bounds = {});

}  // namespace splatdiff
