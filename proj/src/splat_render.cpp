#include "splatdiff/splat_render.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <vector>

#include "splatdiff/errors.hpp"
#include "splatdiff/parallel.hpp"

namespace splatdiff {

bool project_splat(const GaussianPrimitive& prim, std::size_t index,
                   const CameraRecord& cam, const RenderOptions& options,
                   ProjectedSplat& out) {
  const Vec3 t = cam.to_camera(prim.mu);
  const double z = t.z();
  if (!(z > options.bounds.z_near && z < options.bounds.z_far)) return false;

  Eigen::Matrix<double, 2, 3> J;
  J << cam.fx / z, 0.0, -cam.fx * t.x() / (z * z),
       0.0, cam.fy / z, -cam.fy * t.y() / (z * z);
  const Eigen::Matrix<double, 2, 3> T = J * cam.rotation;
  Eigen::Matrix2d cov = T * prim.Sigma * T.transpose();
  cov = 0.5 * (cov + cov.transpose());
  cov += options.blur * Eigen::Matrix2d::Identity();
  const double det = cov.determinant();
  if (!(det > 0.0)) return false;

  out.index = index;
  out.depth = z;
  out.center = {cam.fx * t.x() / z + cam.cx, cam.fy * t.y() / z + cam.cy};
  out.cov2d = cov;
  out.conic << cov(1, 1) / det, -cov(0, 1) / det, -cov(1, 0) / det, cov(0, 0) / det;
  out.opacity = prim.opacity;

  const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
  const double lambda = mid + std::sqrt(std::max(mid * mid - det, 0.0));
  const double radius = options.cutoff_sigma * std::sqrt(lambda);
  out.x0 = std::max(0, static_cast<int>(std::ceil(out.center.x() - radius)));
  out.x1 = std::min(cam.width - 1, static_cast<int>(std::floor(out.center.x() + radius)));
  out.y0 = std::max(0, static_cast<int>(std::ceil(out.center.y() - radius)));
  out.y1 = std::min(cam.height - 1, static_cast<int>(std::floor(out.center.y() + radius)));
  return out.x0 <= out.x1 && out.y0 <= out.y1;
}

ScalarImage render_scalar(std::span<const GaussianPrimitive> primitives,
                          std::span<const double> channel, const CameraRecord& cam,
                          const RenderOptions& options) {
  if (cam.width <= 0 || cam.height <= 0) {
    throw ValidationError("render camera has zero image area");
  }
  if (channel.size() != primitives.size()) {
    throw ValidationError("render channel length differs from primitive count");
  }
  ScalarImage image(cam.width, cam.height, 0.0);

  std::vector<ProjectedSplat> splats;
  splats.reserve(primitives.size());
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    ProjectedSplat s;
    if (project_splat(primitives[i], i, cam, options, s)) splats.push_back(s);
  }
  std::sort(splats.begin(), splats.end(),
            [](const ProjectedSplat& a, const ProjectedSplat& b) {
              return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
            });

  const int tile = std::max(options.tile_size, 1);
  const int tiles_x = (cam.width + tile - 1) / tile;
  const int tiles_y = (cam.height + tile - 1) / tile;
  std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (std::size_t k = 0; k < splats.size(); ++k) {
    const auto& s = splats[k];
    for (int ty = s.y0 / tile; ty <= s.y1 / tile; ++ty) {
      for (int tx = s.x0 / tile; tx <= s.x1 / tile; ++tx) {
        bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(
            static_cast<std::uint32_t>(k));
      }
    }
  }

  const double cutoff_sq = options.cutoff_sigma * options.cutoff_sigma;
  parallel_for(bins.size(), options.threads, [&](std::size_t b) {
    const int tx = static_cast<int>(b % tiles_x);
    const int ty = static_cast<int>(b / tiles_x);
    const int xe = std::min(cam.width, (tx + 1) * tile);
    const int ye = std::min(cam.height, (ty + 1) * tile);
    for (int y = ty * tile; y < ye; ++y) {
      for (int x = tx * tile; x < xe; ++x) {
        double transmittance = 1.0;
        double value = 0.0;
        for (std::uint32_t k : bins[b]) {
          const auto& s = splats[k];
          if (x < s.x0 || x > s.x1 || y < s.y0 || y > s.y1) continue;
          const double dx = x - s.center.x();
          const double dy = y - s.center.y();
          const double power = s.conic(0, 0) * dx * dx +
                               2.0 * s.conic(0, 1) * dx * dy +
                               s.conic(1, 1) * dy * dy;
          if (power > cutoff_sq) continue;
          const double alpha =
              std::min(options.alpha_cap, s.opacity * std::exp(-0.5 * power));
          value += channel[s.index] * alpha * transmittance;
          transmittance *= 1.0 - alpha;
        }
        image.at(x, y) = std::clamp(value, 0.0, 1.0);
      }
    }
  });
  return image;
}

ScalarImage fuse_maps(const ScalarImage& m1, const ScalarImage& m2) {
  if (!m1.same_shape(m2)) throw ValidationError("fused maps differ in size");
  ScalarImage out(m1.width, m1.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.pixels[i] = std::max(m1.pixels[i], m2.pixels[i]);
  }
  return out;
}

MaskImage binarize(const ScalarImage& map, double threshold) {
  MaskImage mask(map.width, map.height, 0);
  for (std::size_t i = 0; i < map.size(); ++i) mask.pixels[i] = map.pixels[i] > threshold;
  return mask;
}

BinaryAndLabels binarize_and_label(const ScalarImage& fused,
                                   const ScalarImage& structural,
                                   const ScalarImage& surface, double threshold) {
  if (!fused.same_shape(structural) || !fused.same_shape(surface)) {
    throw ValidationError("label channels differ in size from the change map");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("threshold must lie in (0,1)");
  }
  BinaryAndLabels out{binarize(fused, threshold),
                      LabelImage(fused.width, fused.height, ChangeLabel::unchanged)};
  for (std::size_t i = 0; i < fused.size(); ++i) {
    if (!out.binary.pixels[i]) continue;
    out.labels.pixels[i] = surface.pixels[i] > structural.pixels[i]
                               ? ChangeLabel::surface
                               : ChangeLabel::structural;
  }
  return out;
}

CameraRecord resize_camera(const CameraRecord& cam, int width, int height) {
  if (width <= 0 || height <= 0) throw ValidationError("render size must be positive");
  CameraRecord out = cam;
  const double sx = static_cast<double>(width) / cam.width;
  const double sy = static_cast<double>(height) / cam.height;
  out.width = width;
  out.height = height;
  out.fx *= sx;
  out.cx *= sx;
  out.fy *= sy;
  out.cy *= sy;
  return out;
}

}  // namespace splatdiff
