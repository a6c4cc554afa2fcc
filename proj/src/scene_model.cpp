#include "splatdiff/scene_model.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "splatdiff/errors.hpp"

namespace splatdiff {

Vec3 normal_from_axes(const Mat3& R, const Vec3& S) {
  int best = 2;
  for (int k = 1; k >= 0; --k) {
    if (S(k) < S(best)) best = k;
  }
  return R.col(best).normalized();
}

GaussianPrimitive make_primitive(const Vec3& mu, const Mat3& R, const Vec3& S,
                                 double opacity, const Vec3& color_dc) {
  GaussianPrimitive p;
  p.mu = mu;
  p.R = R;
  p.S = S;
  const Mat3 RS = R * S.asDiagonal();
  p.Sigma = symmetrize(RS * RS.transpose());
  p.opacity = opacity;
  p.color_dc = color_dc;
  p.normal = normal_from_axes(R, S);
  return p;
}

GaussianPrimitive activate(const RawSplatRecord& raw) {
  const auto& q = raw.rotation_wxyz;
  Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
  const double norm = quat.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw ValidationError("primitive has a zero or non-finite quaternion");
  }
  quat.coeffs() /= norm;
  const Vec3 S = raw.log_scales.array().exp();
  const double opacity = 1.0 / (1.0 + std::exp(-raw.opacity_logit));
  const Vec3 color =
      (Vec3::Constant(0.5) + kShC0 * raw.sh_dc).cwiseMax(0.0).cwiseMin(1.0);
  return make_primitive(raw.position, quat.toRotationMatrix(), S, opacity, color);
}

RawSplatRecord deactivate(const GaussianPrimitive& prim) {
  RawSplatRecord raw;
  raw.position = prim.mu;
  Eigen::Quaterniond q(prim.R);
  q.normalize();
  raw.rotation_wxyz = {q.w(), q.x(), q.y(), q.z()};
  raw.log_scales = prim.S.array().log();
  const double o = std::clamp(prim.opacity, 1e-12, 1.0 - 1e-12);
  raw.opacity_logit = std::log(o / (1.0 - o));
  raw.sh_dc = (prim.color_dc - Vec3::Constant(0.5)) / kShC0;
  return raw;
}

GaussianScene make_scene(std::span<const RawSplatRecord> records,
                         std::vector<CameraRecord> cameras, double min_opacity) {
  GaussianScene scene;
  scene.cameras = std::move(cameras);
  scene.primitives.reserve(records.size());
  scene.source_ids.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    GaussianPrimitive p = activate(records[i]);
    if (p.opacity < min_opacity) continue;
    scene.primitives.push_back(p);
    scene.source_ids.push_back(static_cast<std::int64_t>(i));
  }
  return scene;
}

bool frustum_visible(const Vec3& mu, const CameraRecord& cam,
                     const FrustumBounds& bounds) {
  const Vec3 pc = cam.to_camera(mu);
  const double z = pc.z();
  if (!(z > bounds.z_near && z < bounds.z_far)) return false;
  const double u = cam.fx * pc.x() / z + cam.cx;
  const double v = cam.fy * pc.y() / z + cam.cy;
  return u >= 0.0 && u < cam.width && v >= 0.0 && v < cam.height;
}

bool visible_from_any(const Vec3& mu, std::span<const CameraRecord> cams,
                      const FrustumBounds& bounds) {
  return std::any_of(cams.begin(), cams.end(), [&](const CameraRecord& c) {
    return frustum_visible(mu, c, bounds);
  });
}

namespace {

GaussianScene retain_covisible(const GaussianScene& scene,
                               std::span<const CameraRecord> rig1,
                               std::span<const CameraRecord> rig2,
                               const FrustumBounds& bounds) {
  GaussianScene out;
  out.cameras = scene.cameras;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Vec3& mu = scene.primitives[i].mu;
    if (visible_from_any(mu, rig1, bounds) && visible_from_any(mu, rig2, bounds)) {
      out.primitives.push_back(scene.primitives[i]);
      out.source_ids.push_back(scene.source_ids.empty()
                                   ? static_cast<std::int64_t>(i)
                                   : scene.source_ids[i]);
    }
  }
  return out;
}

}  // namespace

std::pair<GaussianScene, GaussianScene> covisibility_filter(
    const GaussianScene& scene1, const GaussianScene& scene2,
    const FrustumBounds& bounds) {
  auto kept1 = retain_covisible(scene1, scene1.cameras, scene2.cameras, bounds);
  auto kept2 = retain_covisible(scene2, scene1.cameras, scene2.cameras, bounds);
  if (kept1.primitives.empty() || kept2.primitives.empty()) {
    throw PreconditionError("no co-visible region between the two captures");
  }
  return {std::move(kept1), std::move(kept2)};
}

}  // namespace splatdiff
