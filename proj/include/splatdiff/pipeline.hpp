#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "splatdiff/change_kernels.hpp"
#include "splatdiff/drift_model.hpp"
#include "splatdiff/scene_model.hpp"
#include "splatdiff/splat_render.hpp"

namespace splatdiff {

struct PipelineConfig {
  double eta = kDefaultEta;
  double geo_quantile = 0.75;
  double color_quantile = 0.50;
  double conf_quantile = 0.25;
  double threshold = kDefaultThreshold;
  FrustumBounds bounds{};
  double min_opacity = 0.0;
  double color_floor = kDefaultColorFloor;
  BandwidthStatistic bandwidth_statistic = BandwidthStatistic::product_quantile;
  /// 0 keeps each view's native resolution.
  int render_width = 0;
  int render_height = 0;
  int threads = 1;

  /// Throws ValidationError on out-of-range values.
  void validate() const;
};

/// Scene-pair statistics estimated by the drift and bandwidth stages.
struct DriftStatistics {
  AmbiguityScales scales;
  double sigma_c_sq = 0.0;
  std::array<double, 2> fim_scale{};
  std::array<double, 2> h_tilde_sq{};
  std::array<double, 2> conf_reference{};
  std::array<std::size_t, 2> input_count{};
  std::array<std::size_t, 2> retained_count{};
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

/// Scored scene pair: both scenes co-visibility filtered with every derived
/// slot filled.
struct DetectionResult {
  GaussianScene scene1;
  GaussianScene scene2;
  DriftStatistics stats;
  std::vector<StageTiming> timings;
};

struct ChangeMaps {
  std::int64_t view_id = 0;
  ScalarImage M1, M2, M;
  ScalarImage M_struct, M_surf;
  MaskImage binary;
  LabelImage labels;
};

/// Stages 1 and 2 plus per-primitive aggregation. `progress`, when given,
/// receives statistics as soon as each stage completes.
DetectionResult score_scene_pair(const GaussianScene& scene1,
                                 const GaussianScene& scene2,
                                 const PipelineConfig& config,
                                 nlohmann::json* progress = nullptr);

/// Per-primitive channels rendered by the pipeline.
std::vector<double> combined_channel(const GaussianScene& scene);
std::vector<double> structural_channel(const GaussianScene& scene);
std::vector<double> surface_channel(const GaussianScene& scene);

/// Stages 3 and 4 at one viewpoint. The structural and surface channels are
/// rendered per scene and fused by pixel-wise maximum, like the change map.
ChangeMaps render_change_maps(const DetectionResult& result, const CameraRecord& view,
                              const PipelineConfig& config);

CameraRecord render_camera(const CameraRecord& view, const PipelineConfig& config);

std::vector<ScoreRow> score_rows(const GaussianScene& scene);

nlohmann::json statistics_json(const DriftStatistics& stats);

struct DetectInputs {
  std::filesystem::path scene1_ply;
  std::filesystem::path scene2_ply;
  std::filesystem::path poses1;
  std::filesystem::path poses2;
  /// Empty: render every camera of rig 2.
  std::filesystem::path views;
};

/// Full run from files: writes score tables, per-view maps and manifest.json
/// into out_dir. On failure the manifest records the stages completed and the
/// error before the exception propagates.
DetectionResult detect(const DetectInputs& inputs, const PipelineConfig& config,
                       const std::filesystem::path& out_dir);

/// Writes maps for one view using the file naming of `detect`.
void write_change_maps(const ChangeMaps& maps, const std::filesystem::path& out_dir);

std::string view_stem(std::int64_t view_id);

}  // namespace splatdiff
