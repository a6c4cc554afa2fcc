#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "splatdiff/errors.hpp"
#include "splatdiff/eval.hpp"

using namespace splatdiff;
using namespace splatdiff::testing;

namespace {

MaskImage mask(int w, std::vector<std::uint8_t> px) {
  MaskImage m(w, static_cast<int>(px.size()) / w);
  m.pixels = std::move(px);
  return m;
}

LabelImage labels(std::size_t structural_ok, std::size_t structural_bad, std::size_t surface_ok,
                  std::size_t surface_bad, bool predicted) {
  LabelImage l(static_cast<int>(structural_ok + structural_bad + surface_ok + surface_bad), 1);
  std::size_t i = 0;
  using L = ChangeLabel;
  for (std::size_t k = 0; k < structural_ok; ++k) l.pixels[i++] = L::structural;
  for (std::size_t k = 0; k < structural_bad; ++k)
    l.pixels[i++] = predicted ? L::surface : L::structural;
  for (std::size_t k = 0; k < surface_ok; ++k) l.pixels[i++] = L::surface;
  for (std::size_t k = 0; k < surface_bad; ++k)
    l.pixels[i++] = predicted ? L::structural : L::surface;
  return l;
}

double brute_iou(const std::vector<ScalarImage>& maps, const std::vector<MaskImage>& gt,
                 double t) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t v = 0; v < maps.size(); ++v) {
    for (std::size_t i = 0; i < maps[v].size(); ++i) {
      const bool p = maps[v].pixels[i] > t, g = gt[v].pixels[i] != 0;
      inter += p && g;
      uni += p || g;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

}  // namespace

TEST_CASE("detection metric examples") {
  const std::vector<MaskImage> gt = {mask(4, {1, 1, 0, 0})};
  auto m = detection_metrics(gt, gt);
  CHECK(m.miou == 1.0);
  CHECK(m.f1 == 1.0);

  const std::vector<MaskImage> pred = {mask(4, {0, 1, 1, 0})};
  m = detection_metrics(pred, gt);
  CHECK(m.miou == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(m.f1 == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<MaskImage> empty = {mask(4, {0, 0, 0, 0})};
  CHECK(detection_metrics(empty, empty).miou == 1.0);
  CHECK(detection_metrics(pred, empty).miou == 0.0);
  CHECK_THROWS_AS(detection_metrics(std::vector<MaskImage>{mask(2, {0, 0})}, gt),
                  ValidationError);
}

TEST_CASE("detection metrics pool pixels and ignore view order") {
  Rng rng(3);
  std::vector<MaskImage> pred, gt;
  for (int v = 0; v < 5; ++v) {
    MaskImage p(8, 6), g(8, 6);
    for (auto& x : p.pixels) x = uniform(rng) < 0.3;
    for (auto& x : g.pixels) x = uniform(rng) < 0.2 * v;
    pred.push_back(p);
    gt.push_back(g);
  }
  const auto a = detection_metrics(pred, gt);
  std::reverse(pred.begin(), pred.end());
  std::reverse(gt.begin(), gt.end());
  const auto b = detection_metrics(pred, gt);
  CHECK(a.miou == b.miou);
  CHECK(a.f1 == b.f1);
  CHECK(a.per_view.size() == 5);
}

TEST_CASE("oracle threshold") {
  const auto grid = default_threshold_grid();
  CHECK(grid.size() == 255);
  CHECK(grid.front() == 1.0 / 256.0);

  // Step map: every grid point in [0.2, 0.8) separates perfectly.
  ScalarImage step(4, 1);
  step.pixels = {0.2, 0.8, 0.8, 0.2};
  const std::vector<MaskImage> gt = {mask(4, {0, 1, 1, 0})};
  auto r = oracle_threshold(std::vector<ScalarImage>{step}, gt, grid);
  CHECK(r.metrics.miou == 1.0);
  CHECK(r.best_threshold == 52.0 / 256.0);

  // Constant map: every threshold ties, smallest wins.
  r = oracle_threshold(std::vector<ScalarImage>{ScalarImage(4, 1, 0.5)}, gt, grid);
  CHECK(r.best_threshold == grid.front());

  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<ScalarImage> maps;
    std::vector<MaskImage> masks;
    for (int v = 0; v < 3; ++v) {
      ScalarImage m(10, 10);
      MaskImage g(10, 10);
      for (std::size_t i = 0; i < m.size(); ++i) {
        g.pixels[i] = uniform(rng) < 0.3;
        m.pixels[i] = std::clamp(0.5 * g.pixels[i] + uniform(rng, 0, 0.6), 0.0, 1.0);
      }
      maps.push_back(m);
      masks.push_back(g);
    }
    r = oracle_threshold(maps, masks, grid);
    double best = -1, best_t = 0;
    for (double t : grid) {
      const double iou = brute_iou(maps, masks, t);
      if (iou > best) {
        best = iou;
        best_t = t;
      }
    }
    CHECK(r.best_threshold == best_t);
    CHECK(std::abs(r.metrics.miou - best) < 1e-15);
    CHECK(r.metrics.miou >= brute_iou(maps, masks, 0.5));
  }
}

TEST_CASE("routing metrics") {
  auto perfect = labels(5, 0, 4, 0, true);
  auto truth = labels(5, 0, 4, 0, false);
  CHECK(*routing_metrics(std::vector<LabelImage>{perfect}, std::vector<LabelImage>{truth})
             .balanced_accuracy == 1.0);

  const auto half = routing_metrics(std::vector<LabelImage>{labels(4, 0, 2, 2, true)},
                                    std::vector<LabelImage>{labels(4, 0, 2, 2, false)});
  CHECK(*half.balanced_accuracy == 0.75);

  const auto fixture = routing_metrics(std::vector<LabelImage>{labels(90, 10, 8, 2, true)},
                                       std::vector<LabelImage>{labels(90, 10, 8, 2, false)});
  CHECK(*fixture.balanced_accuracy == doctest::Approx(0.85).epsilon(1e-15));
  CHECK(*fixture.structural.recall == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(*fixture.surface.recall == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(*fixture.structural.precision == doctest::Approx(90.0 / 92.0).epsilon(1e-15));

  // Only structural pixels present: surface recall absent.
  const auto single = routing_metrics(std::vector<LabelImage>{labels(3, 1, 0, 0, true)},
                                      std::vector<LabelImage>{labels(3, 1, 0, 0, false)});
  CHECK_FALSE(single.surface.recall.has_value());
  CHECK(*single.balanced_accuracy == 0.75);

  // Pixels unchanged in either image are not evaluated.
  LabelImage p(3, 1, ChangeLabel::unchanged), g(3, 1, ChangeLabel::unchanged);
  p.pixels = {ChangeLabel::surface, ChangeLabel::unchanged, ChangeLabel::structural};
  g.pixels = {ChangeLabel::surface, ChangeLabel::structural, ChangeLabel::unchanged};
  const auto partial =
      routing_metrics(std::vector<LabelImage>{p}, std::vector<LabelImage>{g});
  CHECK(partial.evaluated_pixels == 1);
}

TEST_CASE("pixel routing") {
  ScalarImage st(3, 1), su(3, 1);
  st.pixels = {0.5, 0.1, 0.3};
  su.pixels = {0.5, 0.4, 0.1};
  const auto out = route_pixels(st, su, mask(3, {1, 1, 0}));
  CHECK(out.pixels[0] == ChangeLabel::structural);
  CHECK(out.pixels[1] == ChangeLabel::surface);
  CHECK(out.pixels[2] == ChangeLabel::unchanged);
}

TEST_CASE("AUROC matches pair counting") {
  Rng rng(7);
  std::vector<double> s(300);
  std::unique_ptr<bool[]> pos(new bool[300]);
  for (std::size_t i = 0; i < s.size(); ++i) {
    pos[i] = uniform(rng) < 0.3;
    s[i] = std::round((uniform(rng) + 0.3 * pos[i]) * 20.0) / 20.0;  // many ties
  }
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!pos[i] || pos[j]) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  CHECK(std::abs(auroc(s, std::span<const bool>(pos.get(), s.size())) - wins / pairs) < 1e-12);
}

TEST_CASE("sweep grid and CSV") {
  const auto grid = default_sweep_grid();
  REQUIRE(grid.size() == 19);
  CHECK(grid.front() == doctest::Approx(0.05));
  CHECK(grid.back() == doctest::Approx(0.95));
  CHECK(default_level(SweepAxis::geo_quantile) == 0.75);
  CHECK(default_level(SweepAxis::color_quantile) == 0.50);
  CHECK(default_level(SweepAxis::conf_quantile) == 0.25);
  for (auto a : {SweepAxis::geo_quantile, SweepAxis::color_quantile, SweepAxis::conf_quantile}) {
    CHECK(sweep_axis_from_string(to_string(a)) == a);
  }
  CHECK_THROWS(sweep_axis_from_string("eta"));

  std::vector<SweepRow> rows = {{0.5, 0.6, 0.7, 0.25, true}, {0.55, 0.5, 0.65, 0.3, false}};
  const auto csv = format_sweep_csv(SweepAxis::color_quantile, rows);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "axis,quantile,fixed_miou,oracle_miou,oracle_threshold,is_default");
  std::getline(in, line);
  CHECK(line == "color_quantile,0.50,0.59999999999999998,0.69999999999999996,0.25,1");
  CHECK(line.back() == '1');
}
