#include "splatdiff/drift_model.hpp"

#include <cmath>
#include <vector>

#include "splatdiff/errors.hpp"
#include "splatdiff/parallel.hpp"
#include "splatdiff/stats.hpp"

namespace splatdiff {

DisplacementParts decompose_displacement(const Vec3& delta, const Vec3& normal) {
  const double along = normal.dot(delta);
  return {std::abs(along), (delta - along * normal).norm()};
}

DirectionalDrift directional_drift(const GaussianScene& source,
                                   const SpatialIndex& target_index, double level,
                                   int threads) {
  if (source.size() == 0 || target_index.size() == 0) {
    throw PreconditionError("ambiguity scales need two non-empty scenes");
  }
  std::vector<double> d_n(source.size()), d_t(source.size());
  parallel_for(source.size(), threads, [&](std::size_t i) {
    const auto& p = source.primitives[i];
    const auto nn = target_index.nearest(p.mu);
    const auto parts = decompose_displacement(target_index.point(nn.index) - p.mu, p.normal);
    d_n[i] = parts.normal;
    d_t[i] = parts.tangential;
  });
  return {quantile(d_n, level), quantile(d_t, level)};
}

namespace {

std::vector<Vec3> positions(const GaussianScene& scene) {
  std::vector<Vec3> pts;
  pts.reserve(scene.size());
  for (const auto& p : scene.primitives) pts.push_back(p.mu);
  return pts;
}

}  // namespace

AmbiguityScales estimate_ambiguity_scales(const GaussianScene& scene1,
                                          const SpatialIndex& index1,
                                          const GaussianScene& scene2,
                                          const SpatialIndex& index2,
                                          double level, int threads) {
  const auto forward = directional_drift(scene1, index2, level, threads);
  const auto backward = directional_drift(scene2, index1, level, threads);
  // Mean of squares; a + b is commutative in IEEE arithmetic, so swapping
  // the scenes reproduces the result bit for bit.
  AmbiguityScales s;
  s.u_n_sq = 0.5 * (forward.q_normal * forward.q_normal +
                    backward.q_normal * backward.q_normal);
  s.u_t_sq = 0.5 * (forward.q_tangential * forward.q_tangential +
                    backward.q_tangential * backward.q_tangential);
  return s;
}

AmbiguityScales estimate_ambiguity_scales(const GaussianScene& scene1,
                                          const GaussianScene& scene2,
                                          double level, int threads) {
  if (scene1.size() == 0 || scene2.size() == 0) {
    throw PreconditionError("ambiguity scales need two non-empty scenes");
  }
  const SpatialIndex index1(positions(scene1));
  const SpatialIndex index2(positions(scene2));
  return estimate_ambiguity_scales(scene1, index1, scene2, index2, level, threads);
}

Mat3 inflate_representation(const GaussianPrimitive& prim,
                            const AmbiguityScales& scales) {
  const Mat3 U = scales.u_t_sq * Mat3::Identity() +
                 (scales.u_n_sq - scales.u_t_sq) * prim.normal * prim.normal.transpose();
  return symmetrize(prim.Sigma + U);
}

ObservabilityState compute_fim(const Vec3& mu, std::span<const CameraRecord> cameras,
                               const FrustumBounds& bounds) {
  ObservabilityState state;
  for (const auto& cam : cameras) {
    if (!frustum_visible(mu, cam, bounds)) continue;
    const Vec3 ray = mu - cam.center();
    const double d2 = ray.squaredNorm();
    const Vec3 v = ray / std::sqrt(d2);
    state.H += (Mat3::Identity() - v * v.transpose()) / d2;
    ++state.visible_cameras;
  }
  state.H = symmetrize(state.H);
  state.H_pinv = symmetric_pseudo_inverse(state.H, kPseudoInverseCutoff);
  state.trace_H = state.H.trace();
  return state;
}

double fim_injection_scale(std::span<const Mat3> sigma_tilde,
                           std::span<const ObservabilityState> observability) {
  if (sigma_tilde.empty() || observability.empty()) {
    throw PreconditionError("FIM injection scale of an empty scene");
  }
  std::vector<double> tr_tilde, tr_pinv;
  tr_tilde.reserve(sigma_tilde.size());
  tr_pinv.reserve(observability.size());
  for (const auto& m : sigma_tilde) tr_tilde.push_back(m.trace());
  for (const auto& o : observability) tr_pinv.push_back(o.H_pinv.trace());
  const double denom = median(tr_pinv);
  if (denom == 0.0) return 0.0;
  return median(tr_tilde) / denom;
}

EffectiveCovariance effective_covariance(const Mat3& sigma_tilde,
                                         const Mat3& H_pinv, double scale) {
  EffectiveCovariance out;
  out.Sigma_tilde = sigma_tilde;
  out.Sigma_eff = scale == 0.0 ? sigma_tilde : symmetrize(sigma_tilde + scale * H_pinv);
  out.lambda_max = lambda_max(out.Sigma_eff);
  return out;
}

double apply_drift_model(GaussianScene& scene, const AmbiguityScales& scales,
                         const FrustumBounds& bounds, int threads) {
  const std::size_t n = scene.size();
  auto& d = scene.derived;
  d.sigma_tilde.assign(n, Mat3::Zero());
  d.observability.assign(n, ObservabilityState{});
  parallel_for(n, threads, [&](std::size_t i) {
    d.sigma_tilde[i] = inflate_representation(scene.primitives[i], scales);
    d.observability[i] = compute_fim(scene.primitives[i].mu, scene.cameras, bounds);
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (d.observability[i].visible_cameras == 0) {
      throw InternalError("primitive " + std::to_string(i) +
                          " is not visible from any camera of its own rig");
    }
  }
  const double scale = fim_injection_scale(d.sigma_tilde, d.observability);
  d.sigma_eff.assign(n, Mat3::Zero());
  d.lambda_max.assign(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto eff = effective_covariance(d.sigma_tilde[i], d.observability[i].H_pinv, scale);
    d.sigma_eff[i] = eff.Sigma_eff;
    d.lambda_max[i] = eff.lambda_max;
  });
  return scale;
}

}  // namespace splatdiff
