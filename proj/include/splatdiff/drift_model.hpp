#pragma once

#include <span>

#include "splatdiff/scene_model.hpp"
#include "splatdiff/spatial_index.hpp"

namespace splatdiff {

/// Squared representation-ambiguity scales along the surface normal and in
/// the tangent plane.
struct AmbiguityScales {
  double u_n_sq = 0.0;
  double u_t_sq = 0.0;
};

struct DisplacementParts {
  double normal = 0.0;
  double tangential = 0.0;
};

struct EffectiveCovariance {
  Mat3 Sigma_tilde = Mat3::Zero();
  Mat3 Sigma_eff = Mat3::Zero();
  double lambda_max = 0.0;
};

/// Splits a displacement into its magnitude along `normal` and the magnitude
/// of the remainder.
DisplacementParts decompose_displacement(const Vec3& delta, const Vec3& normal);

/// Per-direction quantiles of nearest-neighbour displacement, before squaring.
struct DirectionalDrift {
  double q_normal = 0.0;
  double q_tangential = 0.0;
};

/// For every primitive of `source`, finds its Euclidean nearest neighbour in
/// `target_index` and takes the `level` quantile of the normal and tangential
/// displacement magnitudes.
DirectionalDrift directional_drift(const GaussianScene& source,
                                   const SpatialIndex& target_index, double level,
                                   int threads = 1);

/// Both directions, squared per direction, then averaged. Symmetric in its
/// scene arguments.
AmbiguityScales estimate_ambiguity_scales(const GaussianScene& scene1,
                                          const SpatialIndex& index1,
                                          const GaussianScene& scene2,
                                          const SpatialIndex& index2,
                                          double level = 0.75, int threads = 1);

/// Convenience overload that builds the indices.
AmbiguityScales estimate_ambiguity_scales(const GaussianScene& scene1,
                                          const GaussianScene& scene2,
                                          double level = 0.75, int threads = 1);

/// Sigma + u_t^2 I + (u_n^2 - u_t^2) n n^T.
Mat3 inflate_representation(const GaussianPrimitive& prim,
                            const AmbiguityScales& scales);

inline constexpr double kPseudoInverseCutoff = 1e-10;

/// Sum over frustum-visible cameras of (I - v v^T) / d^2, with v the unit ray
/// from the camera centre to mu. A primitive with no visible camera gets a
/// zero state with visible_cameras == 0.
ObservabilityState compute_fim(const Vec3& mu, std::span<const CameraRecord> cameras,
                               const FrustumBounds& bounds = {});

/// median(tr Sigma_tilde) / median(tr H^+) over one scene; 0 when the
/// denominator is 0.
double fim_injection_scale(std::span<const Mat3> sigma_tilde,
                           std::span<const ObservabilityState> observability);

EffectiveCovariance effective_covariance(const Mat3& sigma_tilde,
                                         const Mat3& H_pinv, double scale);

/// Fills sigma_tilde, observability, sigma_eff and lambda_max of one scene
/// and returns its injection scale. Throws InternalError when a primitive
/// has no visible camera of its own rig.
double apply_drift_model(GaussianScene& scene, const AmbiguityScales& scales,
                         const FrustumBounds& bounds, int threads = 1);

}  // namespace splatdiff
