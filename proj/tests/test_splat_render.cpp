#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "splatdiff/errors.hpp"
#include "splatdiff/splat_render.hpp"

using namespace splatdiff;
using namespace splatdiff::testing;

namespace {

CameraRecord test_camera(int size = 64) {
  return look_at_camera({0.3, -2.5, 1.2}, Vec3::Zero(), size, size, 55.0);
}

double max_diff(const ScalarImage& a, const ScalarImage& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.pixels[i] - b.pixels[i]));
  return d;
}

struct RandomScene {
  std::vector<GaussianPrimitive> prims;
  std::vector<double> channel;
};

RandomScene random_scene(std::uint64_t seed, int n) {
  Rng rng(seed);
  RandomScene s;
  for (int i = 0; i < n; ++i) {
    auto p = random_primitive(rng, 0.6);
    p = make_primitive(p.mu, p.R, p.S * 2.0, p.opacity, p.color_dc);
    s.prims.push_back(p);
    s.channel.push_back(uniform(rng));
  }
  return s;
}

}  // namespace

TEST_CASE("empty scene and zero channel render to zero") {
  const auto cam = test_camera();
  const auto empty = render_scalar(std::vector<GaussianPrimitive>{}, {}, cam);
  CHECK(std::all_of(empty.pixels.begin(), empty.pixels.end(), [](double v) { return v == 0.0; }));
  const auto s = random_scene(1, 50);
  const std::vector<double> zeros(s.prims.size(), 0.0);
  const auto img = render_scalar(s.prims, zeros, cam);
  CHECK(std::all_of(img.pixels.begin(), img.pixels.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("render argument validation") {
  auto cam = test_camera();
  const auto s = random_scene(1, 3);
  CHECK_THROWS_AS(render_scalar(s.prims, std::vector<double>(2, 0.0), cam), ValidationError);
  cam.width = 0;
  CHECK_THROWS_AS(render_scalar(s.prims, s.channel, cam), ValidationError);
}

TEST_CASE("single isotropic primitive on the optical axis") {
  CameraRecord cam;
  cam.width = cam.height = 65;
  cam.fx = cam.fy = 60.0;
  cam.cx = cam.cy = 32.0;
  const std::vector<GaussianPrimitive> prims = {
      make_primitive(Vec3(0, 0, 2), Mat3::Identity(), Vec3::Constant(0.05), 1.0, Vec3::Zero())};
  const std::vector<double> ones = {1.0};
  const auto img = render_scalar(prims, ones, cam);
  CHECK(img.at(32, 32) == 0.99);
  CHECK(max_diff(img, reference_render(prims, ones, cam)) <= 1e-5);
  CHECK(img.at(31, 32) < 0.99);
  CHECK(img.at(0, 0) == 0.0);
}

TEST_CASE("tiled renderer matches the per-pixel reference") {
  for (std::uint64_t seed : {2, 3, 4, 5, 6}) {
    const auto s = random_scene(seed, 200);
    const auto cam = test_camera();
    for (int threads : {1, 3}) {
      RenderOptions opt;
      opt.threads = threads;
      const auto img = render_scalar(s.prims, s.channel, cam, opt);
      CHECK(max_diff(img, reference_render(s.prims, s.channel, cam)) <= 1e-5);
    }
  }
}

TEST_CASE("dense opaque wall composites to the alpha cap") {
  std::vector<GaussianPrimitive> wall;
  for (int i = -30; i <= 30; ++i) {
    for (int j = -30; j <= 30; ++j) {
      wall.push_back(make_primitive(Vec3(0.05 * i, 0.05 * j, 2.0), Mat3::Identity(),
                                    Vec3(0.05, 0.05, 0.005), 1.0, Vec3::Zero()));
    }
  }
  CameraRecord cam;
  cam.width = cam.height = 32;
  cam.fx = cam.fy = 30.0;
  cam.cx = cam.cy = 16.0;
  const std::vector<double> ones(wall.size(), 1.0);
  const auto img = render_scalar(wall, ones, cam);
  const auto ref = reference_render(wall, ones, cam);
  CHECK(max_diff(img, ref) <= 1e-5);
  for (double v : img.pixels) CHECK(v >= 0.99);
}

TEST_CASE("raising one channel value never lowers a pixel") {
  const auto s = random_scene(7, 120);
  const auto cam = test_camera();
  const auto base = render_scalar(s.prims, s.channel, cam);
  for (std::size_t k : {0, 13, 77, 119}) {
    auto raised = s.channel;
    raised[k] = std::min(1.0, raised[k] + 0.5);
    const auto img = render_scalar(s.prims, raised, cam);
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(img.pixels[i] >= base.pixels[i]);
  }
}

TEST_CASE("output does not depend on primitive order") {
  auto s = random_scene(8, 150);
  // Two primitives at identical depth exercise the index tie-break.
  s.prims[5] = s.prims[4];
  const auto cam = test_camera();
  const auto base = render_scalar(s.prims, s.channel, cam);

  std::vector<std::size_t> perm(s.prims.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(9);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<GaussianPrimitive> prims;
  std::vector<double> channel;
  for (auto i : perm) {
    prims.push_back(s.prims[i]);
    channel.push_back(s.channel[i]);
  }
  // Keep the relative order of the tied pair so the composite is canonical.
  const auto p4 = std::find(perm.begin(), perm.end(), 4) - perm.begin();
  const auto p5 = std::find(perm.begin(), perm.end(), 5) - perm.begin();
  if (p5 < p4) std::swap(channel[p4], channel[p5]);
  CHECK(max_diff(render_scalar(prims, channel, cam), base) <= 1e-12);
}

TEST_CASE("map fusion") {
  ScalarImage a(2, 1), b(2, 1);
  a.pixels = {0.3, 0.9};
  b.pixels = {0.7, 0.1};
  const auto m = fuse_maps(a, b);
  CHECK(m.pixels == std::vector<double>{0.7, 0.9});
  CHECK(fuse_maps(b, a) == m);
  CHECK(fuse_maps(a, ScalarImage(2, 1, 0.0)) == a);
  CHECK_THROWS_AS(fuse_maps(a, ScalarImage(1, 2)), ValidationError);
}

TEST_CASE("binarize and label") {
  ScalarImage m(4, 1), st(4, 1), su(4, 1);
  m.pixels = {0.6, 0.4, 0.9, 0.5};
  st.pixels = {0.1, 0.0, 0.3, 0.9};
  su.pixels = {0.4, 0.9, 0.3, 0.0};
  const auto out = binarize_and_label(m, st, su, kDefaultThreshold);
  CHECK(kDefaultThreshold == 0.5);
  CHECK(out.binary.pixels == std::vector<std::uint8_t>{1, 0, 1, 0});
  CHECK(out.labels.pixels[0] == ChangeLabel::surface);
  CHECK(out.labels.pixels[1] == ChangeLabel::unchanged);
  CHECK(out.labels.pixels[2] == ChangeLabel::structural);
  CHECK(out.labels.pixels[3] == ChangeLabel::unchanged);
  CHECK_THROWS_AS(binarize_and_label(m, st, su, 1.0), ValidationError);
}
