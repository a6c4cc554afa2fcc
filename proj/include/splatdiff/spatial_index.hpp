#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "splatdiff/linalg.hpp"

namespace splatdiff {

struct NearestResult {
  std::size_t index = 0;
  double squared_distance = 0.0;
};

/// Balanced k-d tree over a fixed set of 3D points. Read-only after
/// construction, so concurrent queries are safe.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  explicit SpatialIndex(std::vector<Vec3> points, std::size_t leaf_size = 8);

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  /// All indices j with |query - p_j|^2 <= radius^2, ascending.
  std::vector<std::size_t> ball(const Vec3& query, double radius) const;

  /// Euclidean nearest neighbour; equal distances resolve to the lower index.
  /// Throws PreconditionError on an empty index.
  NearestResult nearest(const Vec3& query) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int axis = 0;
    double split = 0.0;
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void ball_recursive(std::int32_t node, const Vec3& q, double r2,
                      std::vector<std::size_t>& out) const;
  void nearest_recursive(std::int32_t node, const Vec3& q,
                         NearestResult& best) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 8;
};

}  // namespace splatdiff
