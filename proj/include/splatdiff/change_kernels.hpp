#pragma once

#include <cstddef>
#include <vector>

#include "splatdiff/scene_model.hpp"
#include "splatdiff/spatial_index.hpp"

namespace splatdiff {

struct NeighborSet {
  std::vector<std::size_t> indices;
  double radius = 0.0;
};

inline constexpr double kDefaultEta = 3.0;
inline constexpr double kDefaultColorFloor = 1e-6;

/// Every target primitive within eta * sqrt(lambda_max) of mu. The ball
/// contains the Mahalanobis eta-ellipsoid of the query's effective covariance.
NeighborSet retrieve_neighbors(const Vec3& mu, double lambda_max,
                               const SpatialIndex& target_index,
                               double eta = kDefaultEta);

/// Unnormalized anisotropic RBF exp(-0.5 d^T (Sigma_i + Sigma_j)^{-1} d).
/// Exactly 1 when the centres coincide.
double geometric_kernel(const Vec3& mu_i, const Mat3& sigma_eff_i,
                        const Vec3& mu_j, const Mat3& sigma_eff_j);

/// Isotropic RBF over DC colors.
double appearance_kernel(const Vec3& color_i, const Vec3& color_j,
                         double bandwidth_sq);

/// 1 - max kernel over the neighbour set; 1 for an empty set.
double score_geometric(std::size_t i, const GaussianScene& source,
                       const GaussianScene& target, const NeighborSet& neighbors);

double score_appearance(std::size_t i, const GaussianScene& source,
                        const GaussianScene& target, const NeighborSet& neighbors,
                        double bandwidth_sq);

enum class BandwidthStatistic {
  /// Quantile of the products w_i * |dc|^2.
  product_quantile,
  /// w-weighted quantile of |dc|^2.
  weighted_quantile,
};

struct BandwidthOptions {
  double level = 0.5;
  double floor = kDefaultColorFloor;
  BandwidthStatistic statistic = BandwidthStatistic::product_quantile;
};

/// One direction of the color-bandwidth estimate, before flooring.
double directional_color_bandwidth(const GaussianScene& source,
                                   const GaussianScene& target,
                                   const SpatialIndex& target_index,
                                   const BandwidthOptions& options, int threads = 1);

/// Mean of both directions, floored. Requires sigma_eff on both scenes.
double estimate_color_bandwidth(const GaussianScene& scene1,
                                const SpatialIndex& index1,
                                const GaussianScene& scene2,
                                const SpatialIndex& index2,
                                const BandwidthOptions& options = {},
                                int threads = 1);

/// sigma_c^2 * max(tr(Sigma_eff_i) / h_tilde_sq, 1).
double adaptive_bandwidth(double sigma_c_sq, const Mat3& sigma_eff_i,
                          double h_tilde_sq);

/// w-weighted quantile: smallest sorted value whose cumulative weight reaches
/// `level` of the total. Zero total weight falls back to the plain quantile.
double weighted_quantile(std::vector<double> values, std::vector<double> weights,
                         double level);

}  // namespace splatdiff
