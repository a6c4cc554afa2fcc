#include "splatdiff/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <iomanip>

#include "splatdiff/errors.hpp"

namespace splatdiff {
namespace {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;

  ViewMetrics metrics() const {
    if (tp + fp + fn == 0) return {1.0, 1.0};
    const double t = static_cast<double>(tp);
    return {t / static_cast<double>(tp + fp + fn),
            2.0 * t / static_cast<double>(2 * tp + fp + fn)};
  }
};

template <typename A, typename B>
void check_views(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size()) throw ValidationError("prediction and ground truth view counts differ");
  for (std::size_t v = 0; v < a.size(); ++v) {
    if (a[v].width != b[v].width || a[v].height != b[v].height) {
      throw ValidationError("view " + std::to_string(v) + " dimensions differ");
    }
  }
}

}  // namespace

DetectionMetrics detection_metrics(std::span<const MaskImage> pred,
                                   std::span<const MaskImage> gt) {
  check_views(pred, gt);
  DetectionMetrics out;
  Counts pooled;
  double view_sum = 0.0;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    Counts c;
    for (std::size_t i = 0; i < pred[v].size(); ++i) {
      const bool p = pred[v].pixels[i] != 0;
      const bool g = gt[v].pixels[i] != 0;
      c.tp += p && g;
      c.fp += p && !g;
      c.fn += !p && g;
    }
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
    out.per_view.push_back(c.metrics());
    view_sum += out.per_view.back().iou;
  }
  const ViewMetrics all = pooled.metrics();
  out.miou = all.iou;
  out.f1 = all.f1;
  out.mean_view_iou = pred.empty() ? 1.0 : view_sum / static_cast<double>(pred.size());
  return out;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 255; ++k) grid.push_back(k / 256.0);
  return grid;
}

OracleResult oracle_threshold(std::span<const ScalarImage> scores,
                              std::span<const MaskImage> gt,
                              std::span<const double> grid) {
  check_views(scores, gt);
  if (grid.empty()) throw PreconditionError("empty threshold grid");
  OracleResult best;
  bool have = false;
  std::vector<MaskImage> pred(scores.size());
  for (double t : grid) {
    for (std::size_t v = 0; v < scores.size(); ++v) pred[v] = binarize(scores[v], t);
    DetectionMetrics m = detection_metrics(pred, gt);
    m.threshold_used = t;
    if (!have || m.miou > best.metrics.miou ||
        (m.miou == best.metrics.miou && t < best.best_threshold)) {
      best.best_threshold = t;
      best.metrics = std::move(m);
      have = true;
    }
  }
  return best;
}

RoutingMetrics routing_metrics(std::span<const LabelImage> pred,
                               std::span<const LabelImage> gt) {
  check_views(pred, gt);
  // confusion[g][p] over {structural, surface}.
  std::size_t confusion[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t v = 0; v < pred.size(); ++v) {
    for (std::size_t i = 0; i < pred[v].size(); ++i) {
      const auto p = pred[v].pixels[i];
      const auto g = gt[v].pixels[i];
      if (p == ChangeLabel::unchanged || g == ChangeLabel::unchanged) continue;
      confusion[g == ChangeLabel::surface][p == ChangeLabel::surface]++;
    }
  }
  RoutingMetrics out;
  ClassRouting* classes[2] = {&out.structural, &out.surface};
  double recall_sum = 0.0;
  int present = 0;
  for (int c = 0; c < 2; ++c) {
    const std::size_t support = confusion[c][0] + confusion[c][1];
    const std::size_t predicted = confusion[0][c] + confusion[1][c];
    classes[c]->support = support;
    if (support > 0) {
      classes[c]->recall = static_cast<double>(confusion[c][c]) / static_cast<double>(support);
      recall_sum += *classes[c]->recall;
      ++present;
    }
    if (predicted > 0) {
      classes[c]->precision =
          static_cast<double>(confusion[c][c]) / static_cast<double>(predicted);
    }
    out.evaluated_pixels += support;
  }
  if (present > 0) out.balanced_accuracy = recall_sum / present;
  return out;
}

LabelImage route_pixels(const ScalarImage& structural, const ScalarImage& surface,
                        const MaskImage& mask) {
  if (!structural.same_shape(surface) || structural.width != mask.width ||
      structural.height != mask.height) {
    throw ValidationError("routing channels differ in size");
  }
  LabelImage out(mask.width, mask.height, ChangeLabel::unchanged);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.pixels[i]) continue;
    out.pixels[i] = surface.pixels[i] > structural.pixels[i] ? ChangeLabel::surface
                                                             : ChangeLabel::structural;
  }
  return out;
}

double auroc(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw ValidationError("AUROC inputs differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U with mid-ranks for ties.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        rank_sum += mid_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw PreconditionError("AUROC needs both classes");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::geo_quantile: return "geo_quantile";
    case SweepAxis::color_quantile: return "color_quantile";
    case SweepAxis::conf_quantile: return "conf_quantile";
  }
  return "unknown";
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "geo_quantile") return SweepAxis::geo_quantile;
  if (name == "color_quantile") return SweepAxis::color_quantile;
  if (name == "conf_quantile") return SweepAxis::conf_quantile;
  throw ValidationError("unknown sweep axis " + name);
}

double default_level(SweepAxis axis) {
  const PipelineConfig defaults;
  switch (axis) {
    case SweepAxis::geo_quantile: return defaults.geo_quantile;
    case SweepAxis::color_quantile: return defaults.color_quantile;
    case SweepAxis::conf_quantile: return defaults.conf_quantile;
  }
  return 0.0;
}

std::vector<double> default_sweep_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 19; ++k) grid.push_back(k / 20.0);
  return grid;
}

std::vector<ScalarImage> render_fused_maps(const DetectionResult& result,
                                           std::span<const CameraRecord> views,
                                           const PipelineConfig& config) {
  RenderOptions options;
  options.bounds = config.bounds;
  options.threads = config.threads;
  const auto c1 = combined_channel(result.scene1);
  const auto c2 = combined_channel(result.scene2);
  std::vector<ScalarImage> maps;
  maps.reserve(views.size());
  for (const auto& view : views) {
    const CameraRecord cam = render_camera(view, config);
    maps.push_back(fuse_maps(render_scalar(result.scene1, c1, cam, options),
                             render_scalar(result.scene2, c2, cam, options)));
  }
  return maps;
}

std::vector<SweepRow> quantile_sweep(const SweepInstance& instance,
                                     const PipelineConfig& base, SweepAxis axis,
                                     std::span<const double> grid) {
  const auto thresholds = default_threshold_grid();
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (double level : grid) {
    PipelineConfig config = base;
    switch (axis) {
      case SweepAxis::geo_quantile: config.geo_quantile = level; break;
      case SweepAxis::color_quantile: config.color_quantile = level; break;
      case SweepAxis::conf_quantile: config.conf_quantile = level; break;
    }
    const auto result = score_scene_pair(instance.scene1, instance.scene2, config);
    const auto maps = render_fused_maps(result, instance.views, config);
    std::vector<MaskImage> fixed;
    fixed.reserve(maps.size());
    for (const auto& m : maps) fixed.push_back(binarize(m, config.threshold));
    const auto oracle = oracle_threshold(maps, instance.gt, thresholds);
    SweepRow row;
    row.quantile = level;
    row.fixed_miou = detection_metrics(fixed, instance.gt).miou;
    row.oracle_miou = oracle.metrics.miou;
    row.oracle_threshold = oracle.best_threshold;
    row.is_default = std::abs(level - default_level(axis)) < 1e-9;
    rows.push_back(row);
  }
  return rows;
}

std::string format_sweep_csv(SweepAxis axis, std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "axis,quantile,fixed_miou,oracle_miou,oracle_threshold,is_default\n";
  for (const auto& r : rows) {
    out << to_string(axis) << ',' << std::setprecision(2) << std::fixed << r.quantile
        << ',' << std::defaultfloat << std::setprecision(17) << r.fixed_miou << ',' << r.oracle_miou << ','
        << r.oracle_threshold << ',' << (r.is_default ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace splatdiff
