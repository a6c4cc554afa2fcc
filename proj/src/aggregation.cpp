#include "splatdiff/aggregation.hpp"

#include <algorithm>
#include <cmath>

#include "splatdiff/errors.hpp"
#include "splatdiff/stats.hpp"

namespace splatdiff {

double confidence_weight(double trace_H, double reference_trace) {
  if (!(trace_H > 0.0) || !(reference_trace > 0.0)) {
    throw ValidationError("confidence weight needs positive FIM traces");
  }
  return trace_H / (trace_H + reference_trace);
}

double confidence_reference(std::span<const ObservabilityState> observability,
                            double level) {
  std::vector<double> traces;
  traces.reserve(observability.size());
  for (const auto& o : observability) traces.push_back(o.trace_H);
  return quantile(traces, level);
}

double combine_scores(double delta_geo, double delta_app, double omega) {
  return omega * std::min(delta_geo + delta_app, 1.0);
}

DisambiguationChannels disambiguation_channels(double delta_geo, double delta_app) {
  return {delta_geo, std::max(delta_app - delta_geo, 0.0)};
}

PrimitiveScores make_scores(double delta_geo, double delta_app, double omega) {
  PrimitiveScores s;
  s.delta_geo = delta_geo;
  s.delta_app = delta_app;
  s.omega = omega;
  s.delta_combined = combine_scores(delta_geo, delta_app, omega);
  s.residual_surf = disambiguation_channels(delta_geo, delta_app).surface;
  return s;
}

}  // namespace splatdiff
