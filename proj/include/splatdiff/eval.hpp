#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splatdiff/pipeline.hpp"
#include "splatdiff/types.hpp"

namespace splatdiff {

struct ViewMetrics {
  double iou = 0.0;
  double f1 = 0.0;
};

/// Changed-class IoU and F1, pooled over all pixels of all views of one
/// instance. Empty prediction against empty truth scores 1; any prediction
/// against empty truth scores 0.
struct DetectionMetrics {
  double miou = 0.0;
  double f1 = 0.0;
  double threshold_used = kDefaultThreshold;
  double mean_view_iou = 0.0;
  std::vector<ViewMetrics> per_view;
};

DetectionMetrics detection_metrics(std::span<const MaskImage> pred,
                                   std::span<const MaskImage> gt);

/// k / 256 for k = 1..255.
std::vector<double> default_threshold_grid();

struct OracleResult {
  double best_threshold = 0.0;
  DetectionMetrics metrics;
};

/// Exhaustive search for the threshold maximising pooled IoU; the smallest
/// maximiser wins ties.
OracleResult oracle_threshold(std::span<const ScalarImage> scores,
                              std::span<const MaskImage> gt,
                              std::span<const double> grid);

struct ClassRouting {
  std::size_t support = 0;  // ground-truth pixels of this class evaluated
  std::optional<double> precision;
  std::optional<double> recall;
};

/// Structural-vs-surface routing on pixels marked changed in both label
/// images. A class without ground-truth pixels has no recall and is left out
/// of the balanced accuracy.
struct RoutingMetrics {
  std::optional<double> balanced_accuracy;
  ClassRouting structural;
  ClassRouting surface;
  std::size_t evaluated_pixels = 0;
};

RoutingMetrics routing_metrics(std::span<const LabelImage> pred,
                               std::span<const LabelImage> gt);

/// Labels every pixel of `mask` by argmax(structural, surface), ties to
/// structural. Used to route ground-truth-changed pixels irrespective of
/// detection.
LabelImage route_pixels(const ScalarImage& structural, const ScalarImage& surface,
                        const MaskImage& mask);

/// Area under the ROC curve of `scores` for separating positives; ties count
/// one half.
double auroc(std::span<const double> scores, std::span<const bool> positive);

// --- Quantile sweeps ------------------------------------------------------

enum class SweepAxis { geo_quantile, color_quantile, conf_quantile };

std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& name);
double default_level(SweepAxis axis);

struct SweepInstance {
  GaussianScene scene1;
  GaussianScene scene2;
  std::vector<CameraRecord> views;
  std::vector<MaskImage> gt;
};

struct SweepRow {
  double quantile = 0.0;
  double fixed_miou = 0.0;
  double oracle_miou = 0.0;
  double oracle_threshold = 0.0;
  bool is_default = false;
};

/// 0.05, 0.10, ..., 0.95.
std::vector<double> default_sweep_grid();

/// One full pipeline run per grid point with only `axis` changed.
std::vector<SweepRow> quantile_sweep(const SweepInstance& instance,
                                     const PipelineConfig& base, SweepAxis axis,
                                     std::span<const double> grid);

std::string format_sweep_csv(SweepAxis axis, std::span<const SweepRow> rows);

/// Fused change maps of every view.
std::vector<ScalarImage> render_fused_maps(const DetectionResult& result,
                                           std::span<const CameraRecord> views,
                                           const PipelineConfig& config);

}  // namespace splatdiff
