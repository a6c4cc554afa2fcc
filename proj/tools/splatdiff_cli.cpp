// splatdiff: change detection between two Gaussian-splat reconstructions.
//
//   splatdiff detect --scene1 a.ply --scene2 b.ply --poses1 p1.json --poses2 p2.json --out dir
//   splatdiff synth  --spec spec.json --out dir
//   splatdiff eval   --pred dir --gt dir [--out metrics.json]
//   splatdiff sweep  --axis geo_quantile --spec spec.json --out sweep.csv

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>

#include "splatdiff/errors.hpp"
#include "splatdiff/eval.hpp"
#include "splatdiff/pipeline.hpp"
#include "splatdiff/splat_io.hpp"
#include "splatdiff/synth.hpp"

namespace fs = std::filesystem;
using namespace splatdiff;

namespace {

void add_pipeline_flags(CLI::App& cmd, PipelineConfig& config, bool& weighted) {
  cmd.add_option("--eta", config.eta, "Neighbour search radius in effective std-devs")
      ->capture_default_str();
  cmd.add_option("--geo-quantile", config.geo_quantile, "Quantile of NN displacement")
      ->capture_default_str();
  cmd.add_option("--color-quantile", config.color_quantile, "Quantile for the color bandwidth")
      ->capture_default_str();
  cmd.add_option("--conf-quantile", config.conf_quantile, "Reference quantile of FIM traces")
      ->capture_default_str();
  cmd.add_option("--threshold", config.threshold, "Binarization threshold")
      ->capture_default_str();
  cmd.add_option("--z-near", config.bounds.z_near)->capture_default_str();
  cmd.add_option("--z-far", config.bounds.z_far)->capture_default_str();
  cmd.add_option("--min-opacity", config.min_opacity)->capture_default_str();
  cmd.add_option("--color-floor", config.color_floor, "Lower bound on sigma_c^2")
      ->capture_default_str();
  cmd.add_flag("--weighted-median", weighted,
               "Use a kernel-weighted median of color differences for sigma_c^2");
  cmd.add_option("--render-width", config.render_width, "Override view width (px)");
  cmd.add_option("--render-height", config.render_height, "Override view height (px)");
  cmd.add_option("--threads", config.threads)->capture_default_str();
}

SynthSpec load_synth_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synth spec: ") + e.what());
  }
  return synth_spec_from_json(j);
}

void write_labels_csv(const std::vector<ChangeLabel>& labels, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "primitive_id,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << i << ',' << static_cast<int>(labels[i]) << '\n';
  }
}

void run_synth(const fs::path& spec_path, const fs::path& out) {
  const SynthSpec spec = load_synth_spec(spec_path);
  const SynthPair pair = generate_pair(spec);
  fs::create_directories(out / "gt");
  auto raw = [](const GaussianScene& scene) {
    std::vector<RawSplatRecord> records;
    records.reserve(scene.size());
    for (const auto& p : scene.primitives) records.push_back(deactivate(p));
    return records;
  };
  write_splat_ply(raw(pair.scene1), out / "scene1.ply");
  write_splat_ply(raw(pair.scene2), out / "scene2.ply");
  write_cameras_json(pair.scene1.cameras, out / "poses1.json");
  write_cameras_json(pair.scene2.cameras, out / "poses2.json");
  write_labels_csv(pair.truth.labels1, out / "truth_scene1.csv");
  write_labels_csv(pair.truth.labels2, out / "truth_scene2.csv");
  for (std::size_t v = 0; v < pair.truth.view_ids.size(); ++v) {
    const std::string stem = view_stem(pair.truth.view_ids[v]);
    write_mask(pair.truth.masks[v], out / "gt" / (stem + "_binary.png"));
    write_label_map(pair.truth.label_masks[v], out / "gt" / (stem + "_labels.png"));
  }
  std::ofstream(out / "spec.json") << to_json(spec).dump(2) << "\n";
}

// View ids of every "<stem>_binary.png" in a directory, sorted.
std::vector<std::string> view_stems(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  static const std::regex pattern(R"((view_-?\d+)_binary\.png)");
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) stems.push_back(m[1]);
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

nlohmann::json routing_json(const RoutingMetrics& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"balanced_accuracy", opt(r.balanced_accuracy)},
          {"evaluated_pixels", r.evaluated_pixels},
          {"structural",
           {{"support", r.structural.support},
            {"precision", opt(r.structural.precision)},
            {"recall", opt(r.structural.recall)}}},
          {"surface",
           {{"support", r.surface.support},
            {"precision", opt(r.surface.precision)},
            {"recall", opt(r.surface.recall)}}}};
}

void run_eval(const fs::path& pred_dir, const fs::path& gt_dir, fs::path out_json) {
  const auto stems = view_stems(gt_dir);
  if (stems.empty()) throw IoError("no *_binary.png ground-truth masks in " + gt_dir.string());
  std::vector<MaskImage> pred, gt;
  std::vector<LabelImage> pred_labels, gt_labels;
  std::vector<ScalarImage> scores;
  std::vector<LabelImage> routed;  // gt-changed pixels routed by the channel maps
  bool have_labels = true, have_scores = true, have_channels = true;
  for (const auto& stem : stems) {
    gt.push_back(read_mask(gt_dir / (stem + "_binary.png")));
    pred.push_back(read_mask(pred_dir / (stem + "_binary.png")));
    const fs::path gl = gt_dir / (stem + "_labels.png");
    const fs::path pl = pred_dir / (stem + "_labels.png");
    if (have_labels && fs::exists(gl) && fs::exists(pl)) {
      gt_labels.push_back(read_label_map(gl));
      pred_labels.push_back(read_label_map(pl));
    } else {
      have_labels = false;
    }
    const fs::path ms = pred_dir / (stem + "_struct.png");
    const fs::path mf = pred_dir / (stem + "_surf.png");
    if (have_channels && have_labels && fs::exists(ms) && fs::exists(mf)) {
      routed.push_back(route_pixels(read_change_map(ms), read_change_map(mf), gt.back()));
    } else {
      have_channels = false;
    }
    const fs::path sm = pred_dir / (stem + "_M.png");
    if (have_scores && fs::exists(sm)) {
      scores.push_back(read_change_map(sm));
    } else {
      have_scores = false;
    }
  }
  const auto metrics = detection_metrics(pred, gt);
  nlohmann::json report;
  report["views"] = stems;
  report["fixed"] = {{"miou", metrics.miou},
                     {"f1", metrics.f1},
                     {"mean_view_iou", metrics.mean_view_iou}};
  if (have_scores) {
    const auto oracle = oracle_threshold(scores, gt, default_threshold_grid());
    report["oracle"] = {{"miou", oracle.metrics.miou},
                        {"f1", oracle.metrics.f1},
                        {"threshold", oracle.best_threshold}};
  }
  if (have_labels) {
    report["routing_detected"] = routing_json(routing_metrics(pred_labels, gt_labels));
    if (have_channels) {
      report["routing_gt_changed"] = routing_json(routing_metrics(routed, gt_labels));
    }
  }
  if (out_json.empty()) out_json = pred_dir / "metrics.json";
  std::ofstream(out_json) << report.dump(2) << "\n";

  fs::path csv_path = out_json;
  csv_path.replace_extension(".csv");
  std::ofstream csv(csv_path);
  csv << "view,iou,f1\n";
  for (std::size_t v = 0; v < stems.size(); ++v) {
    csv << stems[v] << ',' << metrics.per_view[v].iou << ',' << metrics.per_view[v].f1 << '\n';
  }
  std::cout << report.dump(2) << "\n";
}

int fail(const std::string& kind, const std::string& message) {
  std::cerr << "error: " << kind << ": " << message << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primitive-space change detection between Gaussian-splat scenes"};
  app.require_subcommand(1);

  PipelineConfig config;
  bool weighted = false;

  DetectInputs inputs;
  fs::path detect_out;
  auto* detect_cmd = app.add_subcommand("detect", "Score two scenes and render change maps");
  detect_cmd->add_option("--scene1", inputs.scene1_ply)->required();
  detect_cmd->add_option("--scene2", inputs.scene2_ply)->required();
  detect_cmd->add_option("--poses1", inputs.poses1, "Pose JSON or COLMAP text directory")
      ->required();
  detect_cmd->add_option("--poses2", inputs.poses2)->required();
  detect_cmd->add_option("--views", inputs.views, "Poses to render (default: rig 2)");
  detect_cmd->add_option("--out", detect_out)->required();
  add_pipeline_flags(*detect_cmd, config, weighted);

  fs::path synth_spec, synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene pair with truth");
  synth_cmd->add_option("--spec", synth_spec, "Synth spec JSON")->required();
  synth_cmd->add_option("--out", synth_out)->required();

  fs::path eval_pred, eval_gt, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Score predicted masks against ground truth");
  eval_cmd->add_option("--pred", eval_pred)->required();
  eval_cmd->add_option("--gt", eval_gt)->required();
  eval_cmd->add_option("--out", eval_out, "Metrics JSON (CSV written alongside)");

  std::string axis_name;
  fs::path sweep_spec, sweep_out, sweep_gt;
  DetectInputs sweep_inputs;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one quantile from 0.05 to 0.95");
  sweep_cmd->add_option("--axis", axis_name)
      ->required()
      ->check(CLI::IsMember({"geo_quantile", "color_quantile", "conf_quantile"}));
  sweep_cmd->add_option("--spec", sweep_spec, "Synthetic instance spec JSON");
  sweep_cmd->add_option("--scene1", sweep_inputs.scene1_ply);
  sweep_cmd->add_option("--scene2", sweep_inputs.scene2_ply);
  sweep_cmd->add_option("--poses1", sweep_inputs.poses1);
  sweep_cmd->add_option("--poses2", sweep_inputs.poses2);
  sweep_cmd->add_option("--gt", sweep_gt, "Ground-truth mask directory for loaded scenes");
  sweep_cmd->add_option("--out", sweep_out)->required();
  add_pipeline_flags(*sweep_cmd, config, weighted);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string message = e.what();
    std::replace(message.begin(), message.end(), '\n', ' ');
    return fail("usage", message);
  }
  if (weighted) config.bandwidth_statistic = BandwidthStatistic::weighted_quantile;

  try {
    if (detect_cmd->parsed()) {
      detect(inputs, config, detect_out);
    } else if (synth_cmd->parsed()) {
      run_synth(synth_spec, synth_out);
    } else if (eval_cmd->parsed()) {
      run_eval(eval_pred, eval_gt, eval_out);
    } else if (sweep_cmd->parsed()) {
      const SweepAxis axis = sweep_axis_from_string(axis_name);
      SweepInstance instance;
      if (!sweep_spec.empty()) {
        auto pair = generate_pair(load_synth_spec(sweep_spec));
        instance.views = pair.scene2.cameras;
        instance.gt = std::move(pair.truth.masks);
        instance.scene1 = std::move(pair.scene1);
        instance.scene2 = std::move(pair.scene2);
      } else {
        if (sweep_inputs.scene1_ply.empty() || sweep_gt.empty()) {
          return fail("usage", "sweep needs --spec or --scene1/--scene2/--poses1/--poses2/--gt");
        }
        instance.scene1 = make_scene(read_splat_ply(sweep_inputs.scene1_ply),
                                     read_cameras(sweep_inputs.poses1));
        instance.scene2 = make_scene(read_splat_ply(sweep_inputs.scene2_ply),
                                     read_cameras(sweep_inputs.poses2));
        for (const auto& cam : instance.scene2.cameras) {
          instance.views.push_back(cam);
          instance.gt.push_back(read_mask(sweep_gt / (view_stem(cam.id) + "_binary.png")));
        }
      }
      const auto rows = quantile_sweep(instance, config, axis, default_sweep_grid());
      std::ofstream out(sweep_out);
      if (!out) throw IoError("cannot write " + sweep_out.string());
      out << format_sweep_csv(axis, rows);
    }
  } catch (const Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return 0;
}
