#include "splatdiff/stats.hpp"

#include <algorithm>
#include <cmath>

#include "splatdiff/errors.hpp"

namespace splatdiff {

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw PreconditionError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) {
    throw PreconditionError("quantile level outside [0,1]");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace splatdiff
