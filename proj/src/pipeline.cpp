#include "splatdiff/pipeline.hpp"

#include <chrono>
#include <fstream>

#include "splatdiff/aggregation.hpp"
#include "splatdiff/errors.hpp"
#include "splatdiff/parallel.hpp"
#include "splatdiff/splat_io.hpp"
#include "splatdiff/stats.hpp"

namespace splatdiff {

void PipelineConfig::validate() const {
  auto in_open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_open_unit(geo_quantile) || !in_open_unit(color_quantile) ||
      !in_open_unit(conf_quantile)) {
    throw ValidationError("quantile levels must lie in (0,1)");
  }
  if (!(eta > 0.0)) throw ValidationError("eta must be positive");
  if (!in_open_unit(threshold)) throw ValidationError("threshold must lie in (0,1)");
  if (!(bounds.z_near >= 0.0 && bounds.z_far > bounds.z_near)) {
    throw ValidationError("need 0 <= z_near < z_far");
  }
  if (!(color_floor > 0.0)) throw ValidationError("color floor must be positive");
  if (render_width < 0 || render_height < 0 || (render_width == 0) != (render_height == 0)) {
    throw ValidationError("render size needs both width and height");
  }
}

namespace {

using Clock = std::chrono::steady_clock;

std::vector<Vec3> positions(const GaussianScene& scene) {
  std::vector<Vec3> pts;
  pts.reserve(scene.size());
  for (const auto& p : scene.primitives) pts.push_back(p.mu);
  return pts;
}

GaussianScene drop_transparent(const GaussianScene& scene, double min_opacity) {
  if (min_opacity <= 0.0) return scene;
  GaussianScene out;
  out.cameras = scene.cameras;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (scene.primitives[i].opacity < min_opacity) continue;
    out.primitives.push_back(scene.primitives[i]);
    out.source_ids.push_back(scene.source_ids.empty() ? static_cast<std::int64_t>(i)
                                                      : scene.source_ids[i]);
  }
  return out;
}

void score_scene(GaussianScene& source, const GaussianScene& target,
                 const SpatialIndex& target_index, double sigma_c_sq,
                 double h_tilde_sq, double conf_reference, const PipelineConfig& config) {
  auto& d = source.derived;
  d.scores.assign(source.size(), PrimitiveScores{});
  parallel_for(source.size(), config.threads, [&](std::size_t i) {
    const auto neighbors =
        retrieve_neighbors(source.primitives[i].mu, d.lambda_max[i], target_index, config.eta);
    const double geo = score_geometric(i, source, target, neighbors);
    const double bandwidth = adaptive_bandwidth(sigma_c_sq, d.sigma_eff[i], h_tilde_sq);
    const double app = score_appearance(i, source, target, neighbors, bandwidth);
    const double omega = confidence_weight(d.observability[i].trace_H, conf_reference);
    d.scores[i] = make_scores(geo, app, omega);
  });
}

double median_trace(const std::vector<Mat3>& matrices) {
  std::vector<double> traces;
  traces.reserve(matrices.size());
  for (const auto& m : matrices) traces.push_back(m.trace());
  return median(traces);
}

}  // namespace

nlohmann::json statistics_json(const DriftStatistics& s) {
  return {
      {"u_n_sq", s.scales.u_n_sq},
      {"u_t_sq", s.scales.u_t_sq},
      {"sigma_c_sq", s.sigma_c_sq},
      {"fim_scale", s.fim_scale},
      {"h_tilde_sq", s.h_tilde_sq},
      {"confidence_reference", s.conf_reference},
      {"input_count", s.input_count},
      {"retained_count", s.retained_count},
  };
}

DetectionResult score_scene_pair(const GaussianScene& scene1,
                                 const GaussianScene& scene2,
                                 const PipelineConfig& config, nlohmann::json* progress) {
  config.validate();
  DetectionResult result;
  auto& stats = result.stats;
  auto mark = [&, start = Clock::now()](const std::string& stage) mutable {
    const auto now = Clock::now();
    result.timings.push_back({stage, std::chrono::duration<double>(now - start).count()});
    start = now;
    if (progress) (*progress)["stages_completed"].push_back(stage);
  };

  stats.input_count = {scene1.size(), scene2.size()};
  auto filtered = covisibility_filter(drop_transparent(scene1, config.min_opacity),
                                      drop_transparent(scene2, config.min_opacity),
                                      config.bounds);
  result.scene1 = std::move(filtered.first);
  result.scene2 = std::move(filtered.second);
  stats.retained_count = {result.scene1.size(), result.scene2.size()};
  if (progress) (*progress)["retained_count"] = stats.retained_count;
  mark("covisibility");

  const SpatialIndex index1(positions(result.scene1));
  const SpatialIndex index2(positions(result.scene2));

  // Stage 1: drift modelling.
  stats.scales = estimate_ambiguity_scales(result.scene1, index1, result.scene2, index2,
                                           config.geo_quantile, config.threads);
  stats.fim_scale[0] = apply_drift_model(result.scene1, stats.scales, config.bounds,
                                         config.threads);
  stats.fim_scale[1] = apply_drift_model(result.scene2, stats.scales, config.bounds,
                                         config.threads);
  if (progress) {
    (*progress)["u_n_sq"] = stats.scales.u_n_sq;
    (*progress)["u_t_sq"] = stats.scales.u_t_sq;
    (*progress)["fim_scale"] = stats.fim_scale;
  }
  mark("drift_model");

  // Stage 2: kernel scoring.
  BandwidthOptions bandwidth;
  bandwidth.level = config.color_quantile;
  bandwidth.floor = config.color_floor;
  bandwidth.statistic = config.bandwidth_statistic;
  stats.sigma_c_sq = estimate_color_bandwidth(result.scene1, index1, result.scene2,
                                              index2, bandwidth, config.threads);
  if (progress) (*progress)["sigma_c_sq"] = stats.sigma_c_sq;

  GaussianScene* scenes[2] = {&result.scene1, &result.scene2};
  const SpatialIndex* indices[2] = {&index1, &index2};
  for (int s = 0; s < 2; ++s) {
    auto& d = scenes[s]->derived;
    stats.h_tilde_sq[s] = median_trace(d.sigma_eff);
    stats.conf_reference[s] = confidence_reference(d.observability, config.conf_quantile);
  }
  for (int s = 0; s < 2; ++s) {
    score_scene(*scenes[s], *scenes[1 - s], *indices[1 - s], stats.sigma_c_sq,
                stats.h_tilde_sq[s], stats.conf_reference[s], config);
  }
  mark("kernel_scoring");
  return result;
}

std::vector<double> combined_channel(const GaussianScene& scene) {
  std::vector<double> c;
  c.reserve(scene.size());
  for (const auto& s : scene.derived.scores) c.push_back(s.delta_combined);
  return c;
}

std::vector<double> structural_channel(const GaussianScene& scene) {
  std::vector<double> c;
  c.reserve(scene.size());
  for (const auto& s : scene.derived.scores) c.push_back(s.delta_geo);
  return c;
}

std::vector<double> surface_channel(const GaussianScene& scene) {
  std::vector<double> c;
  c.reserve(scene.size());
  for (const auto& s : scene.derived.scores) c.push_back(s.residual_surf);
  return c;
}

CameraRecord render_camera(const CameraRecord& view, const PipelineConfig& config) {
  if (config.render_width > 0) {
    return resize_camera(view, config.render_width, config.render_height);
  }
  return view;
}

ChangeMaps render_change_maps(const DetectionResult& result, const CameraRecord& view,
                              const PipelineConfig& config) {
  const CameraRecord cam = render_camera(view, config);
  RenderOptions options;
  options.bounds = config.bounds;
  options.threads = config.threads;

  ChangeMaps maps;
  maps.view_id = view.id;
  maps.M1 = render_scalar(result.scene1, combined_channel(result.scene1), cam, options);
  maps.M2 = render_scalar(result.scene2, combined_channel(result.scene2), cam, options);
  maps.M = fuse_maps(maps.M1, maps.M2);
  maps.M_struct =
      fuse_maps(render_scalar(result.scene1, structural_channel(result.scene1), cam, options),
                render_scalar(result.scene2, structural_channel(result.scene2), cam, options));
  maps.M_surf =
      fuse_maps(render_scalar(result.scene1, surface_channel(result.scene1), cam, options),
                render_scalar(result.scene2, surface_channel(result.scene2), cam, options));
  auto labelled = binarize_and_label(maps.M, maps.M_struct, maps.M_surf, config.threshold);
  maps.binary = std::move(labelled.binary);
  maps.labels = std::move(labelled.labels);
  return maps;
}

std::vector<ScoreRow> score_rows(const GaussianScene& scene) {
  std::vector<ScoreRow> rows;
  rows.reserve(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto& s = scene.derived.scores[i];
    rows.push_back({scene.source_ids.empty() ? static_cast<std::int64_t>(i)
                                             : scene.source_ids[i],
                    s.delta_geo, s.delta_app, s.omega, s.delta_combined});
  }
  return rows;
}

std::string view_stem(std::int64_t view_id) {
  return "view_" + std::to_string(view_id);
}

void write_change_maps(const ChangeMaps& maps, const std::filesystem::path& out_dir) {
  const std::string stem = view_stem(maps.view_id);
  write_change_map(maps.M1, out_dir / (stem + "_M1.png"));
  write_change_map(maps.M2, out_dir / (stem + "_M2.png"));
  write_change_map(maps.M, out_dir / (stem + "_M.png"));
  write_change_map(maps.M_struct, out_dir / (stem + "_struct.png"));
  write_change_map(maps.M_surf, out_dir / (stem + "_surf.png"));
  write_mask(maps.binary, out_dir / (stem + "_binary.png"));
  write_label_map(maps.labels, out_dir / (stem + "_labels.png"));
}

namespace {

nlohmann::json config_json(const PipelineConfig& c) {
  return {{"eta", c.eta},
          {"geo_quantile", c.geo_quantile},
          {"color_quantile", c.color_quantile},
          {"conf_quantile", c.conf_quantile},
          {"threshold", c.threshold},
          {"z_near", c.bounds.z_near},
          {"z_far", c.bounds.z_far},
          {"min_opacity", c.min_opacity},
          {"color_floor", c.color_floor},
          {"bandwidth_statistic",
           c.bandwidth_statistic == BandwidthStatistic::product_quantile
               ? "product_quantile"
               : "weighted_quantile"},
          {"render_width", c.render_width},
          {"render_height", c.render_height}};
}

void write_manifest(const nlohmann::json& manifest, const std::filesystem::path& out_dir) {
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (out_dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

}  // namespace

DetectionResult detect(const DetectInputs& inputs, const PipelineConfig& config,
                       const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  nlohmann::json manifest;
  manifest["status"] = "running";
  manifest["config"] = config_json(config);
  manifest["inputs"] = {{"scene1", inputs.scene1_ply.string()},
                        {"scene2", inputs.scene2_ply.string()},
                        {"poses1", inputs.poses1.string()},
                        {"poses2", inputs.poses2.string()},
                        {"views", inputs.views.string()}};
  manifest["stages_completed"] = nlohmann::json::array();
  try {
    const auto scene1 = make_scene(read_splat_ply(inputs.scene1_ply),
                                   read_cameras(inputs.poses1), 0.0);
    const auto scene2 = make_scene(read_splat_ply(inputs.scene2_ply),
                                   read_cameras(inputs.poses2), 0.0);
    manifest["stages_completed"].push_back("load");
    auto result = score_scene_pair(scene1, scene2, config, &manifest);

    write_score_table(score_rows(result.scene1), out_dir / "scores_scene1.csv");
    write_score_table(score_rows(result.scene2), out_dir / "scores_scene2.csv");

    const auto views = inputs.views.empty() ? result.scene2.cameras
                                            : read_cameras(inputs.views);
    const auto render_start = Clock::now();
    nlohmann::json view_list = nlohmann::json::array();
    for (const auto& view : views) {
      write_change_maps(render_change_maps(result, view, config), out_dir);
      view_list.push_back(view.id);
    }
    result.timings.push_back(
        {"render", std::chrono::duration<double>(Clock::now() - render_start).count()});
    manifest["stages_completed"].push_back("render");
    manifest["views"] = view_list;
    manifest["statistics"] = statistics_json(result.stats);
    nlohmann::json timing;
    for (const auto& t : result.timings) timing[t.stage] = t.seconds;
    manifest["timing_seconds"] = timing;
    manifest["status"] = "ok";
    write_manifest(manifest, out_dir);
    return result;
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    write_manifest(manifest, out_dir);
    throw;
  }
}

}  // namespace splatdiff
