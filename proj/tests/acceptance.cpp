// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances and runtime limits are pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include "e2e_suite.hpp"
#include "oracles.hpp"
#include "splatdiff/aggregation.hpp"
#include "splatdiff/change_kernels.hpp"
#include "splatdiff/drift_model.hpp"
#include "splatdiff/eval.hpp"
#include "splatdiff/linalg.hpp"
#include "splatdiff/pipeline.hpp"
#include "splatdiff/splat_io.hpp"
#include "splatdiff/stats.hpp"
#include "splatdiff/synth.hpp"

using namespace splatdiff;
using namespace splatdiff::testing;
namespace fs = std::filesystem;

namespace {

constexpr double kClosedFormTol = 1e-12;
constexpr double kOracleTol = 1e-12;
constexpr double kRenderTol = 1e-5;
constexpr double kEquivarianceTol = 1e-9;
constexpr double kMinAuroc = 0.95;
constexpr double kMiouTol = 0.02;
constexpr double kMinRoutingBa = 0.90;

struct Check {
  bool ok = true;
  std::string detail;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

using Clock = std::chrono::steady_clock;

bool report(int id, const std::string& title, double limit_s,
            const std::function<Check()>& body) {
  const auto start = Clock::now();
  Check c;
  try {
    c = body();
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (limit_s > 0 && secs > limit_s) {
    c.require(false, "runtime " + std::to_string(secs) + " s over limit");
  }
  std::printf("criterion %d %s %s (%.2f s)%s%s\n", id, c.ok ? "PASS" : "FAIL", title.c_str(),
              secs, c.detail.empty() ? "" : ": ", c.detail.c_str());
  std::fflush(stdout);
  return c.ok;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::vector<Vec3> positions(const GaussianScene& s) {
  std::vector<Vec3> p;
  for (const auto& g : s.primitives) p.push_back(g.mu);
  return p;
}

std::vector<CameraRecord> ring(int count, double radius, double height, std::int64_t id0) {
  std::vector<CameraRecord> cams;
  for (int i = 0; i < count; ++i) {
    const double a = 2.0 * M_PI * i / count + 0.1 * id0;
    cams.push_back(look_at_camera({radius * std::cos(a), radius * std::sin(a), height},
                                  Vec3::Zero(), 80, 60, 60.0, id0 + i));
  }
  return cams;
}

std::pair<GaussianScene, GaussianScene> drifted_pair(std::uint64_t seed, int n) {
  Rng rng(seed);
  GaussianScene a, b;
  a.cameras = ring(6, 3.0, 1.0, 0);
  b.cameras = ring(5, 3.2, 1.3, 100);
  for (int i = 0; i < n; ++i) {
    const auto p = random_primitive(rng, 0.5);
    a.primitives.push_back(p);
    if (i % 9 == 4) continue;
    Vec3 color = p.color_dc + Vec3::Constant(gaussian(rng, 0.02));
    if (p.mu.x() > 0.3) color += Vec3(0.3, -0.3, 0.2);
    b.primitives.push_back(make_primitive(p.mu + random_vec(rng, -0.02, 0.02), p.R, p.S,
                                          p.opacity, color));
  }
  return {a, b};
}

// --- criterion 1 -----------------------------------------------------------

Check analytic_kernels() {
  Check c;
  Rng rng(101);
  for (int k = 0; k < 100; ++k) {
    const Vec3 mu = random_vec(rng, -10, 10);
    const Mat3 a = random_spd(rng, 1e-6, 1.0), b = random_spd(rng, 1e-4, 25.0);
    c.require(geometric_kernel(mu, a, mu, b) == 1.0, "k_geo != 1 at zero displacement");
  }
  const Mat3 I = Mat3::Identity();
  const Mat3 D = Vec3(1, 1, 4).asDiagonal();
  const double k1 = geometric_kernel(Vec3::Zero(), I, Vec3(2, 0, 0), I);
  const double k2 = geometric_kernel(Vec3::Zero(), D, Vec3(0, 0, 2), D);
  const double bw = 0.09;
  const double d3 = 1.0 - appearance_kernel(Vec3::Zero(), Vec3(0.3, 0, 0), bw);
  c.require(std::abs(k1 - std::exp(-1.0)) <= kClosedFormTol, fmt("exp(-1) off: %.17g", k1));
  c.require(std::abs(k2 - std::exp(-0.25)) <= kClosedFormTol, fmt("exp(-0.25) off: %.17g", k2));
  c.require(std::abs(d3 - (1.0 - std::exp(-0.5))) <= kClosedFormTol,
            fmt("1-exp(-0.5) off: %.17g", d3));
  if (c.ok) c.detail = "100 coincident pairs exact; exp(-1), exp(-0.25), 1-exp(-0.5) within 1e-12";
  return c;
}

// --- criterion 2 -----------------------------------------------------------

Check oracle_equivalence() {
  Check c;
  Rng rng(202);

  // Ball retrieval.
  std::vector<Vec3> pts(2000);
  for (auto& p : pts) p = random_vec(rng, -1, 1);
  const SpatialIndex index(pts);
  for (int q = 0; q < 500; ++q) {
    const Vec3 center = random_vec(rng, -1.1, 1.1);
    const double r = uniform(rng, 0.0, 0.5);
    c.require(index.ball(center, r) == linear_ball(pts, center, r), "ball != linear scan");
  }

  // Quantile and median estimators.
  for (int n : {1, 2, 7, 100, 1001}) {
    std::vector<double> v(n);
    for (double& x : v) x = gaussian(rng);
    for (double q = 0.0; q <= 1.0; q += 0.05) {
      c.require(std::abs(quantile(v, q) - sort_quantile(v, q)) <= kOracleTol, "quantile");
    }
    c.require(std::abs(median(v) - sort_quantile(v, 0.5)) <= kOracleTol, "median");
  }

  // Fisher information.
  for (int t = 0; t < 50; ++t) {
    std::vector<CameraRecord> cams;
    for (int k = 0; k < 20; ++k) {
      cams.push_back(look_at_camera(random_unit(rng) * uniform(rng, 2, 6),
                                    random_vec(rng, -0.3, 0.3), 64, 48, 40, k));
    }
    const Vec3 mu = random_vec(rng, -0.2, 0.2);
    const double err = (compute_fim(mu, cams).H - direct_fim(mu, cams, {})).cwiseAbs().maxCoeff();
    c.require(err <= kOracleTol, fmt("FIM differs by %.3g", err));
  }

  // Kernel scores against exhaustive all-pairs scoring.
  auto [a, b] = drifted_pair(203, 200);
  const auto u = estimate_ambiguity_scales(a, b);
  apply_drift_model(a, u, {});
  apply_drift_model(b, u, {});
  const SpatialIndex ib(positions(b));
  const double bw = 0.004;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto n = retrieve_neighbors(a.primitives[i].mu, a.derived.lambda_max[i], ib);
    const double g = score_geometric(i, a, b, n);
    const double app = score_appearance(i, a, b, n, bw);
    const double r = kDefaultEta * std::sqrt(power_iteration_lambda_max(a.derived.sigma_eff[i]));
    double bg = 0.0, ba = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if ((b.primitives[j].mu - a.primitives[i].mu).squaredNorm() > r * r) continue;
      bg = std::max(bg, direct_geometric_kernel(a.primitives[i].mu, a.derived.sigma_eff[i],
                                                b.primitives[j].mu, b.derived.sigma_eff[j]));
      ba = std::max(ba, std::exp(-(a.primitives[i].color_dc - b.primitives[j].color_dc)
                                      .squaredNorm() /
                                 (2.0 * bw)));
    }
    worst = std::max({worst, std::abs(g - (1.0 - bg)), std::abs(app - (1.0 - ba))});
  }
  c.require(worst <= kOracleTol, fmt("delta scores differ by %.3g", worst));

  // Tiled renderer against the per-pixel reference.
  double render_err = 0.0;
  for (int t = 0; t < 5; ++t) {
    std::vector<GaussianPrimitive> prims;
    std::vector<double> channel;
    for (int k = 0; k < 200; ++k) {
      auto p = random_primitive(rng, 0.6);
      prims.push_back(make_primitive(p.mu, p.R, 2.0 * p.S, p.opacity, p.color_dc));
      channel.push_back(uniform(rng));
    }
    const auto cam = look_at_camera(random_unit(rng) * 2.5, Vec3::Zero(), 64, 64, 50);
    RenderOptions opt;
    opt.threads = 4;
    const auto img = render_scalar(prims, channel, cam, opt);
    const auto ref = reference_render(prims, channel, cam);
    for (std::size_t i = 0; i < img.size(); ++i) {
      render_err = std::max(render_err, std::abs(img.pixels[i] - ref.pixels[i]));
    }
  }
  c.require(render_err <= kRenderTol, fmt("render differs by %.3g", render_err));
  if (c.ok) {
    c.detail = fmt("ball exact; delta err %.2g; render err %.2g", worst, render_err);
  }
  return c;
}

// --- criterion 3 -----------------------------------------------------------

Check invariants(const std::vector<E2eOutcome>& e2e) {
  Check c;
  Rng rng(303);

  auto [a, b] = drifted_pair(304, 300);
  const auto uab = estimate_ambiguity_scales(a, b);
  const auto uba = estimate_ambiguity_scales(b, a);
  c.require(uab.u_n_sq == uba.u_n_sq && uab.u_t_sq == uba.u_t_sq, "u^2 not symmetric");
  apply_drift_model(a, uab, {});
  apply_drift_model(b, uab, {});
  for (const auto* s : {&a, &b}) {
    for (std::size_t i = 0; i < s->size(); ++i) {
      c.require(is_psd(s->derived.sigma_tilde[i] - s->primitives[i].Sigma), "Sigma_tilde < Sigma");
      c.require(is_psd(s->derived.sigma_eff[i] - s->derived.sigma_tilde[i]),
                "Sigma_eff < Sigma_tilde");
    }
  }
  const SpatialIndex ia(positions(a)), ib(positions(b));
  c.require(estimate_color_bandwidth(a, ia, b, ib) == estimate_color_bandwidth(b, ib, a, ia),
            "sigma_c^2 not symmetric");

  // Confidence weights under a global trace rescale.
  auto obs = a.derived.observability;
  auto scaled = obs;
  for (auto& o : scaled) o.trace_H *= 7.0;
  const double q = confidence_reference(obs), q7 = confidence_reference(scaled);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    c.require(std::abs(confidence_weight(obs[i].trace_H, q) -
                       confidence_weight(scaled[i].trace_H, q7)) <= kOracleTol,
              "omega not scale invariant");
  }

  // Rigid rotation of scenes and cameras.
  const Mat3 Q = random_rotation(rng);
  auto rotate = [&](const GaussianScene& s) {
    GaussianScene r;
    for (const auto& p : s.primitives) {
      r.primitives.push_back(make_primitive(Q * p.mu, Q * p.R, p.S, p.opacity, p.color_dc));
    }
    r.cameras = s.cameras;
    for (auto& cam : r.cameras) cam.rotation = cam.rotation * Q.transpose();
    return r;
  };
  auto ra = rotate(a), rb = rotate(b);
  const auto ru = estimate_ambiguity_scales(ra, rb);
  apply_drift_model(ra, ru, {});
  double rot_err = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    rot_err = std::max(rot_err, (Q * a.derived.observability[i].H * Q.transpose() -
                                 ra.derived.observability[i].H).cwiseAbs().maxCoeff());
    rot_err = std::max(rot_err, (Q * a.derived.sigma_eff[i] * Q.transpose() -
                                 ra.derived.sigma_eff[i]).cwiseAbs().maxCoeff());
  }
  c.require(rot_err <= kEquivarianceTol, fmt("rotation error %.3g", rot_err));

  // Oracle threshold dominates the fixed threshold.
  for (const auto& r : e2e) c.require(r.oracle_miou >= r.miou, "oracle mIoU < fixed mIoU");

  // Renderer monotonicity and permutation invariance.
  std::vector<GaussianPrimitive> prims;
  std::vector<double> channel;
  for (int k = 0; k < 150; ++k) {
    prims.push_back(random_primitive(rng, 0.6));
    channel.push_back(uniform(rng));
  }
  const auto cam = look_at_camera({0.4, -2.4, 1.0}, Vec3::Zero(), 64, 64, 50);
  const auto base = render_scalar(prims, channel, cam);
  auto raised = channel;
  raised[42] = 1.0;
  const auto up = render_scalar(prims, raised, cam);
  for (std::size_t i = 0; i < up.size(); ++i) {
    c.require(up.pixels[i] >= base.pixels[i], "raising a channel lowered a pixel");
  }
  std::vector<std::size_t> perm(prims.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<GaussianPrimitive> pp;
  std::vector<double> pc;
  for (auto i : perm) {
    pp.push_back(prims[i]);
    pc.push_back(channel[i]);
  }
  c.require(render_scalar(pp, pc, cam) == base, "render depends on primitive order");
  if (c.ok) c.detail = fmt("rotation error %.2g; oracle >= fixed on %g instances", rot_err,
                           static_cast<double>(e2e.size()));
  return c;
}

// --- criteria 4 and 5 ------------------------------------------------------

struct Fixture {
  std::map<std::string, double> miou;
  double routing_ba = 0.0;
};

Fixture load_fixture() {
  std::ifstream in(fixture_path());
  if (!in) throw std::runtime_error("missing fixture " + fixture_path());
  const auto j = nlohmann::json::parse(in);
  Fixture f;
  for (const auto& c : j.at("cases")) f.miou[c.at("name")] = c.at("miou");
  f.routing_ba = j.at("routing_balanced_accuracy");
  return f;
}

Check end_to_end(const std::vector<E2eCase>& cases, const std::vector<E2eOutcome>& out) {
  Check c;
  const Fixture fx = load_fixture();
  double min_auroc = 1.0, max_gap = 0.0;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto& r = out[k];
    const auto it = fx.miou.find(cases[k].name());
    if (it == fx.miou.end()) {
      c.require(false, "fixture lacks " + cases[k].name());
      continue;
    }
    const double gap = std::abs(r.miou - it->second);
    std::printf("  %-10s auroc %.4f  miou %.4f  fixture %.4f  oracle-threshold miou %.4f\n",
                cases[k].name().c_str(), r.auroc, r.miou, it->second, r.oracle_miou);
    min_auroc = std::min(min_auroc, r.auroc);
    max_gap = std::max(max_gap, gap);
    c.require(r.auroc >= kMinAuroc, cases[k].name() + fmt(" auroc %.4f", r.auroc));
    c.require(gap <= kMiouTol, cases[k].name() + fmt(" mIoU gap %.4f", gap));
  }
  if (c.ok) c.detail = fmt("min AUROC %.4f; max mIoU gap to fixture %.4f", min_auroc, max_gap);
  return c;
}

Check routing(const std::vector<E2eCase>& cases, const std::vector<E2eOutcome>& out) {
  Check c;
  const Fixture fx = load_fixture();
  RoutingCounts pooled;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    if (cases[k].kind == ChangeKind::add) continue;
    const auto& r = out[k].routing;
    pooled.structural_total += r.structural_total;
    pooled.structural_correct += r.structural_correct;
    pooled.surface_total += r.surface_total;
    pooled.surface_correct += r.surface_correct;
  }
  const double ba = pooled.balanced_accuracy();
  c.require(pooled.structural_total > 0 && pooled.surface_total > 0, "a class has no pixels");
  c.require(ba >= kMinRoutingBa, fmt("balanced accuracy %.4f", ba));
  if (c.ok) {
    c.detail = fmt("balanced accuracy %.4f (structural %.4f, surface %.4f)", ba,
                   static_cast<double>(pooled.structural_correct) / pooled.structural_total,
                   static_cast<double>(pooled.surface_correct) / pooled.surface_total) +
               fmt("; exhaustive fixture %.4f", fx.routing_ba);
  }
  return c;
}

// --- criterion 6 -----------------------------------------------------------

Check zero_change() {
  Check c;
  const auto pair = generate_pair(static_preset(7));
  const PipelineConfig cfg;
  const auto r = score_scene_pair(pair.scene1, pair.scene2, cfg);
  c.require(r.stats.scales.u_n_sq == 0.0 && r.stats.scales.u_t_sq == 0.0, "u^2 != 0");
  c.require(r.stats.sigma_c_sq == cfg.color_floor, "sigma_c^2 != floor");
  for (const auto& view : pair.scene2.cameras) {
    const auto maps = render_change_maps(r, view, cfg);
    c.require(std::all_of(maps.M.pixels.begin(), maps.M.pixels.end(),
                          [](double v) { return v == 0.0; }),
              "fused map not all zero");
  }
  if (c.ok) c.detail = "u^2 = 0, sigma_c^2 = 1e-6, all fused maps zero";
  return c;
}

// --- criteria 7 and 8 ------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(SPLATDIFF_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  return std::system(cmd.c_str());
}

Check sweep() {
  Check c;
  const auto dir = scratch_dir("acceptance_sweep");
  std::ofstream(dir / "spec.json") << to_json(moderate_preset(1, ChangeKind::recolor)).dump();
  const std::map<std::string, std::string> defaults = {
      {"geo_quantile", "0.75"}, {"color_quantile", "0.50"}, {"conf_quantile", "0.25"}};
  for (const auto& [axis, def] : defaults) {
    const auto csv = dir / (axis + ".csv");
    const int status = run_cli("sweep --threads 4 --axis " + axis + " --spec " +
                                   (dir / "spec.json").string() + " --out " + csv.string(),
                               dir / "log.txt");
    c.require(status == 0, axis + " sweep failed");
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    c.require(line == "axis,quantile,fixed_miou,oracle_miou,oracle_threshold,is_default",
              "bad CSV header");
    int rows = 0;
    std::string marked;
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string cells[6];
      for (auto& cell : cells) std::getline(ss, cell, ',');
      c.require(cells[0] == axis, "wrong axis column");
      const double fixed = std::stod(cells[2]), oracle = std::stod(cells[3]);
      c.require(oracle >= fixed, axis + " oracle < fixed at " + cells[1]);
      c.require(fixed >= 0.0 && oracle <= 1.0, "mIoU out of range");
      if (cells[5] == "1") marked += cells[1];
      ++rows;
    }
    c.require(rows == 19, axis + " has " + std::to_string(rows) + " rows");
    c.require(marked == def, axis + " default marked at '" + marked + "'");
  }
  if (c.ok) c.detail = "3 axes x 19 points; defaults 0.75/0.50/0.25 marked; oracle >= fixed";
  return c;
}

Check determinism() {
  Check c;
  const auto dir = scratch_dir("acceptance_determinism");
  std::ofstream(dir / "spec.json") << to_json(moderate_preset(2, ChangeKind::remove)).dump();
  c.require(run_cli("synth --spec " + (dir / "spec.json").string() + " --out " +
                        (dir / "data").string(),
                    dir / "log.txt") == 0,
            "synth failed");
  const auto d = dir / "data";
  const std::string inputs = " --scene1 " + (d / "scene1.ply").string() + " --scene2 " +
                             (d / "scene2.ply").string() + " --poses1 " +
                             (d / "poses1.json").string() + " --poses2 " +
                             (d / "poses2.json").string();
  for (int threads : {1, 4}) {
    c.require(run_cli("detect" + inputs + " --threads " + std::to_string(threads) + " --out " +
                          (dir / ("t" + std::to_string(threads))).string(),
                      dir / "log.txt") == 0,
              "detect failed");
  }
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(dir / "t1")) {
    const auto ext = entry.path().extension();
    if (ext != ".csv" && ext != ".png") continue;
    const auto other = dir / "t4" / entry.path().filename();
    c.require(fs::exists(other) && read_bytes(entry.path()) == read_bytes(other),
              entry.path().filename().string() + " differs");
    ++compared;
  }
  std::size_t files4 = 0;
  for (const auto& entry : fs::directory_iterator(dir / "t4")) {
    const auto ext = entry.path().extension();
    files4 += ext == ".csv" || ext == ".png";
  }
  c.require(compared > 0 && files4 == static_cast<std::size_t>(compared), "file sets differ");
  if (c.ok) c.detail = std::to_string(compared) + " CSV/PNG files bit-identical at 1 and 4 threads";
  return c;
}

}  // namespace

int main() {
  bool ok = true;
  ok &= report(1, "analytic kernel suite", 1.0, analytic_kernels);
  ok &= report(2, "oracle equivalence", 60.0, oracle_equivalence);

  const auto cases = e2e_cases();
  std::vector<E2eOutcome> e2e;
  const auto e2e_start = Clock::now();
  for (const auto& c : cases) e2e.push_back(run_production(c, 4));
  const double e2e_secs = std::chrono::duration<double>(Clock::now() - e2e_start).count();

  ok &= report(3, "invariant suite", 60.0, [&] { return invariants(e2e); });
  ok &= report(4, "synthetic end-to-end detection", 300.0, [&] {
    Check c = end_to_end(cases, e2e);
    if (e2e_secs > 300.0) c.require(false, fmt("pipeline runs took %.1f s", e2e_secs));
    c.detail += fmt(" [9 pipeline runs %.1f s]", e2e_secs);
    return c;
  });
  ok &= report(5, "synthetic routing", 120.0, [&] { return routing(cases, e2e); });
  ok &= report(6, "zero-change sanity", 10.0, zero_change);
  ok &= report(7, "quantile sweep harness", 600.0, sweep);
  ok &= report(8, "determinism across thread counts", 0.0, determinism);
  std::printf("acceptance %s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}
