#include "splatdiff/change_kernels.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "splatdiff/errors.hpp"
#include "splatdiff/parallel.hpp"
#include "splatdiff/stats.hpp"

namespace splatdiff {

NeighborSet retrieve_neighbors(const Vec3& mu, double lambda_max,
                               const SpatialIndex& target_index, double eta) {
  NeighborSet set;
  set.radius = eta * std::sqrt(std::max(lambda_max, 0.0));
  set.indices = target_index.ball(mu, set.radius);
  return set;
}

double geometric_kernel(const Vec3& mu_i, const Mat3& sigma_eff_i,
                        const Vec3& mu_j, const Mat3& sigma_eff_j) {
  const Vec3 delta = mu_i - mu_j;
  if (delta.isZero(0.0)) return 1.0;
  Mat3 M = symmetrize(sigma_eff_i + sigma_eff_j);
  Eigen::LLT<Mat3> llt(M);
  const double scale = M.trace() / 3.0;
  const auto degenerate = [&](const Eigen::LLT<Mat3>& f) {
    if (f.info() != Eigen::Success) return true;
    const Mat3 L = f.matrixL();
    return L.diagonal().array().square().minCoeff() <= 1e-15 * scale;
  };
  if (degenerate(llt)) {
    M += 1e-9 * scale * Mat3::Identity();
    llt.compute(M);
    if (llt.info() != Eigen::Success || !(scale > 0.0)) {
      throw InternalError("geometric kernel covariance is singular");
    }
  }
  const double mahalanobis_sq = delta.dot(llt.solve(delta));
  return std::exp(-0.5 * mahalanobis_sq);
}

double appearance_kernel(const Vec3& color_i, const Vec3& color_j,
                         double bandwidth_sq) {
  return std::exp(-(color_i - color_j).squaredNorm() / (2.0 * bandwidth_sq));
}

double score_geometric(std::size_t i, const GaussianScene& source,
                       const GaussianScene& target, const NeighborSet& neighbors) {
  const auto& src = source.primitives[i];
  const Mat3& sig_i = source.derived.sigma_eff[i];
  double best = 0.0;
  for (std::size_t j : neighbors.indices) {
    best = std::max(best, geometric_kernel(src.mu, sig_i, target.primitives[j].mu,
                                           target.derived.sigma_eff[j]));
    if (best == 1.0) break;
  }
  return 1.0 - best;
}

double score_appearance(std::size_t i, const GaussianScene& source,
                        const GaussianScene& target, const NeighborSet& neighbors,
                        double bandwidth_sq) {
  const Vec3& c_i = source.primitives[i].color_dc;
  double best = 0.0;
  for (std::size_t j : neighbors.indices) {
    best = std::max(best, appearance_kernel(c_i, target.primitives[j].color_dc,
                                            bandwidth_sq));
    if (best == 1.0) break;
  }
  return 1.0 - best;
}

double weighted_quantile(std::vector<double> values, std::vector<double> weights,
                         double level) {
  if (values.empty() || values.size() != weights.size()) {
    throw PreconditionError("weighted quantile needs matching non-empty inputs");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  });
  double total = 0.0;
  for (std::size_t k : order) total += weights[k];
  if (!(total > 0.0)) return quantile(values, level);
  const double target = level * total;
  double cumulative = 0.0;
  for (std::size_t k : order) {
    cumulative += weights[k];
    if (cumulative >= target) return values[k];
  }
  return values[order.back()];
}

double directional_color_bandwidth(const GaussianScene& source,
                                   const GaussianScene& target,
                                   const SpatialIndex& target_index,
                                   const BandwidthOptions& options, int threads) {
  if (source.size() == 0 || target.size() == 0) {
    throw PreconditionError("color bandwidth needs two non-empty scenes");
  }
  std::vector<double> weights(source.size()), sq_diff(source.size());
  parallel_for(source.size(), threads, [&](std::size_t i) {
    const auto& p = source.primitives[i];
    const std::size_t j = target_index.nearest(p.mu).index;
    weights[i] = geometric_kernel(p.mu, source.derived.sigma_eff[i],
                                  target.primitives[j].mu, target.derived.sigma_eff[j]);
    sq_diff[i] = (p.color_dc - target.primitives[j].color_dc).squaredNorm();
  });
  if (options.statistic == BandwidthStatistic::weighted_quantile) {
    return weighted_quantile(std::move(sq_diff), std::move(weights), options.level);
  }
  std::vector<double> products(source.size());
  for (std::size_t i = 0; i < products.size(); ++i) products[i] = weights[i] * sq_diff[i];
  return quantile(products, options.level);
}

double estimate_color_bandwidth(const GaussianScene& scene1,
                                const SpatialIndex& index1,
                                const GaussianScene& scene2,
                                const SpatialIndex& index2,
                                const BandwidthOptions& options, int threads) {
  const double a = directional_color_bandwidth(scene1, scene2, index2, options, threads);
  const double b = directional_color_bandwidth(scene2, scene1, index1, options, threads);
  return std::max(0.5 * (a + b), options.floor);
}

double adaptive_bandwidth(double sigma_c_sq, const Mat3& sigma_eff_i,
                          double h_tilde_sq) {
  if (!(h_tilde_sq > 0.0)) {
    throw PreconditionError("degenerate scene: median effective-covariance trace is 0");
  }
  return sigma_c_sq * std::max(sigma_eff_i.trace() / h_tilde_sq, 1.0);
}

}  // namespace splatdiff
