#include "splatdiff/spatial_index.hpp"

#include <algorithm>
#include <limits>

#include "splatdiff/errors.hpp"

namespace splatdiff {
namespace {

// Squared distance from q to an axis-aligned box; zero inside.
double box_distance_sq(const Vec3& q, const Vec3& lo, const Vec3& hi) {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    double d = 0.0;
    if (q(k) < lo(k)) {
      d = lo(k) - q(k);
    } else if (q(k) > hi(k)) {
      d = q(k) - hi(k);
    }
    d2 += d * d;
  }
  return d2;
}

}  // namespace

SpatialIndex::SpatialIndex(std::vector<Vec3> points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw PreconditionError("too many points for the spatial index");
  }
  order_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) {
    order_[i] = static_cast<std::uint32_t>(i);
  }
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    node.lo = node.lo.cwiseMin(points_[order_[i]]);
    node.hi = node.hi.cwiseMax(points_[order_[i]]);
  }
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= leaf_size_) return id;

  int axis = 0;
  (node.hi - node.lo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a](axis), pb = points_[b](axis);
                     return pa < pb || (pa == pb && a < b);
                   });
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = points_[order_[mid]](axis);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<std::size_t> SpatialIndex::ball(const Vec3& query, double radius) const {
  std::vector<std::size_t> out;
  if (nodes_.empty() || !(radius >= 0.0)) return out;
  ball_recursive(0, query, radius * radius, out);
  std::sort(out.begin(), out.end());
  return out;
}

void SpatialIndex::ball_recursive(std::int32_t id, const Vec3& q, double r2,
                                  std::vector<std::size_t>& out) const {
  const Node& node = nodes_[id];
  // Pruning is conservative; membership is decided by the exact test below.
  if (box_distance_sq(q, node.lo, node.hi) > r2 * (1.0 + 1e-12)) return;
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t j = order_[i];
      if ((points_[j] - q).squaredNorm() <= r2) out.push_back(j);
    }
    return;
  }
  ball_recursive(node.left, q, r2, out);
  ball_recursive(node.right, q, r2, out);
}

NearestResult SpatialIndex::nearest(const Vec3& query) const {
  if (nodes_.empty()) throw PreconditionError("nearest-neighbour query on an empty index");
  NearestResult best{0, std::numeric_limits<double>::infinity()};
  best.index = std::numeric_limits<std::size_t>::max();
  nearest_recursive(0, query, best);
  return best;
}

void SpatialIndex::nearest_recursive(std::int32_t id, const Vec3& q,
                                     NearestResult& best) const {
  const Node& node = nodes_[id];
  if (box_distance_sq(q, node.lo, node.hi) > best.squared_distance * (1.0 + 1e-12)) {
    return;
  }
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t j = order_[i];
      const double d2 = (points_[j] - q).squaredNorm();
      if (d2 < best.squared_distance ||
          (d2 == best.squared_distance && j < best.index)) {
        best.squared_distance = d2;
        best.index = j;
      }
    }
    return;
  }
  const bool go_left_first = q(node.axis) < node.split;
  nearest_recursive(go_left_first ? node.left : node.right, q, best);
  nearest_recursive(go_left_first ? node.right : node.left, q, best);
}

}  // namespace splatdiff
