#pragma once

#include <span>
#include <vector>

namespace splatdiff {

/// Linear-interpolation quantile of an unsorted sample (the "type 7"
/// estimator): position q*(n-1) in the sorted sample, interpolated between
/// the two bracketing order statistics. Throws PreconditionError when empty.
double quantile(std::span<const double> values, double q);

inline double median(std::span<const double> values) {
  return quantile(values, 0.5);
}

}  // namespace splatdiff
