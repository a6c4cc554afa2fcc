#pragma once

#include <span>
#include <utility>
#include <vector>

#include "splatdiff/scene_model.hpp"

namespace splatdiff {

/// sigmoid(ln trace_H - ln reference), computed as trace_H / (trace_H +
/// reference) so a common rescale of both arguments cancels.
double confidence_weight(double trace_H, double reference_trace);

/// The `level` quantile of FIM traces over one scene.
double confidence_reference(std::span<const ObservabilityState> observability,
                            double level = 0.25);

/// omega * min(delta_geo + delta_app, 1).
double combine_scores(double delta_geo, double delta_app, double omega);

struct DisambiguationChannels {
  double structural = 0.0;
  double surface = 0.0;
};

/// (delta_geo, max(delta_app - delta_geo, 0)).
DisambiguationChannels disambiguation_channels(double delta_geo, double delta_app);

/// Builds the full score record from kernel scores and a confidence weight.
PrimitiveScores make_scores(double delta_geo, double delta_app, double omega);

}  // namespace splatdiff
