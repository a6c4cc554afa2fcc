#include "splatdiff/synth.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

#include "splatdiff/errors.hpp"

namespace splatdiff {
namespace {

// mt19937_64 is fully specified by the standard; the distributions are not,
// so uniform and normal variates are derived here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

struct Sample {
  Vec3 base;
  Vec3 normal;
  Vec3 t1, t2;
  Vec3 color;
  double spacing = 0.05;
  int surface = -1;
  // In-plane orientation, shared by both scenes.
  double spin = 0.0;
};

void tangent_frame(const Vec3& n, Vec3& t1, Vec3& t2) {
  const Vec3 helper = std::abs(n.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  t1 = helper.cross(n).normalized();
  t2 = n.cross(t1);
}

// Checker modulation so that appearance is not constant along a surface.
Vec3 textured(const Vec3& color, const Vec3& p) {
  const auto cell = [](double v) { return static_cast<long>(std::floor(v / 0.25)); };
  const bool odd = ((cell(p.x()) + cell(p.y()) + cell(p.z())) & 1L) != 0;
  return (color * (odd ? 0.88 : 1.12)).cwiseMin(1.0);
}

void add_sample(std::vector<Sample>& out, const Vec3& p, const Vec3& n,
                const SurfaceSpec& s, int surface) {
  Sample smp;
  smp.base = p;
  smp.normal = n.normalized();
  tangent_frame(smp.normal, smp.t1, smp.t2);
  smp.color = textured(s.color, p);
  smp.spacing = s.spacing;
  smp.surface = surface;
  out.push_back(smp);
}

void sample_grid(std::vector<Sample>& out, const Vec3& origin, const Vec3& du,
                 const Vec3& dv, double half_u, double half_v, const Vec3& n,
                 const SurfaceSpec& s, int surface) {
  const int nu = std::max(1, static_cast<int>(std::lround(2.0 * half_u / s.spacing)));
  const int nv = std::max(1, static_cast<int>(std::lround(2.0 * half_v / s.spacing)));
  const double su = 2.0 * half_u / nu;
  const double sv = 2.0 * half_v / nv;
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      const Vec3 p = origin + du * (-half_u + (i + 0.5) * su) + dv * (-half_v + (j + 0.5) * sv);
      add_sample(out, p, n, s, surface);
    }
  }
}

void sample_surface(std::vector<Sample>& out, const SurfaceSpec& s, int surface) {
  if (!(s.spacing > 0.0)) throw ValidationError("surface spacing must be positive");
  switch (s.kind) {
    case SurfaceKind::plane:
      sample_grid(out, s.center, Vec3::UnitX(), Vec3::UnitY(), s.size.x(), s.size.y(),
                  Vec3::UnitZ(), s, surface);
      break;
    case SurfaceKind::sphere: {
      const double r = s.size.x();
      const int count = std::max(
          8, static_cast<int>(std::lround(4.0 * std::numbers::pi * r * r / (s.spacing * s.spacing))));
      const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
      for (int k = 0; k < count; ++k) {
        const double z = 1.0 - 2.0 * (k + 0.5) / count;
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * k;
        const Vec3 n(rho * std::cos(phi), rho * std::sin(phi), z);
        add_sample(out, s.center + r * n, n, s, surface);
      }
      break;
    }
    case SurfaceKind::box: {
      const Vec3 h = s.size;
      for (int axis = 0; axis < 3; ++axis) {
        const int a = (axis + 1) % 3, b = (axis + 2) % 3;
        for (double sign : {-1.0, 1.0}) {
          Vec3 n = Vec3::Zero();
          n(axis) = sign;
          const Vec3 origin = s.center + sign * h(axis) * Vec3::Unit(axis);
          sample_grid(out, origin, Vec3::Unit(a), Vec3::Unit(b), h(a), h(b), n, s, surface);
        }
      }
      break;
    }
  }
}

bool in_region(const Sample& smp, const ChangeSpec& c) {
  if (c.surface >= 0 && smp.surface != c.surface) return false;
  return (smp.base - c.center).norm() <= c.radius;
}

struct SampleEdit {
  ChangeLabel label1 = ChangeLabel::unchanged;
  ChangeLabel label2 = ChangeLabel::unchanged;
  bool removed = false;
  Vec3 translation = Vec3::Zero();
  Vec3 color_shift = Vec3::Zero();
};

// Draws one scene's primitives for a sample. The draw sequence is the same
// whatever the edit, so editing one sample never perturbs another.
void instantiate(const Sample& smp, const DriftSpec& drift, bool second_scene,
                 const SampleEdit& edit, Rng& rng, GaussianScene& scene,
                 std::vector<ChangeLabel>& labels) {
  const double spin = smp.spin;
  const bool split = rng.uniform() < drift.resample_fraction;
  const Vec3 a = std::cos(spin) * smp.t1 + std::sin(spin) * smp.t2;
  const Vec3 b = smp.normal.cross(a);
  Mat3 R;
  R.col(0) = a;
  R.col(1) = b;
  R.col(2) = smp.normal;
  const double tangential = 0.5 * smp.spacing;
  const double normal_scale = 0.05 * smp.spacing;

  const int parts = split ? 2 : 1;
  for (int part = 0; part < parts; ++part) {
    Vec3 mu = smp.base;
    Vec3 S(tangential, tangential, normal_scale);
    if (split) {
      mu += (part == 0 ? -0.25 : 0.25) * smp.spacing * a;
      S.x() *= 0.5;
    }
    mu += drift.normal_jitter * rng.normal() * smp.normal +
          drift.tangential_jitter * rng.normal() * a +
          drift.tangential_jitter * rng.normal() * b;
    Vec3 color = smp.color;
    for (int k = 0; k < 3; ++k) color(k) += drift.color_jitter * rng.normal();
    if (second_scene) {
      color += drift.global_color_offset + edit.color_shift;
      mu += edit.translation;
    }
    if (second_scene && edit.removed) continue;
    color = color.cwiseMax(0.0).cwiseMin(1.0);
    scene.primitives.push_back(make_primitive(mu, R, S, 0.95, color));
    scene.source_ids.push_back(static_cast<std::int64_t>(scene.primitives.size() - 1));
    labels.push_back(second_scene ? edit.label2 : edit.label1);
  }
}

}  // namespace

std::vector<CameraRecord> generate_camera_ring(const Vec3& center, double radius,
                                               int count, const Vec3& look_at,
                                               int width, int height, double focal,
                                               std::int64_t first_id, double phase) {
  if (!(radius > 0.0) || count < 1) {
    throw ValidationError("camera ring needs radius > 0 and count >= 1");
  }
  std::vector<CameraRecord> cams;
  cams.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double theta = phase + 2.0 * std::numbers::pi * k / count;
    const Vec3 pos = center + radius * Vec3(std::cos(theta), std::sin(theta), 0.0);
    const Vec3 forward = (look_at - pos).normalized();
    Vec3 up = Vec3::UnitZ();
    if (std::abs(forward.dot(up)) > 0.999) up = Vec3::UnitY();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    CameraRecord c;
    c.id = first_id + k;
    c.width = width;
    c.height = height;
    c.fx = c.fy = focal;
    c.cx = 0.5 * width;
    c.cy = 0.5 * height;
    c.rotation.row(0) = right;
    c.rotation.row(1) = down;
    c.rotation.row(2) = forward;
    c.translation = -c.rotation * pos;
    if (!frustum_visible(look_at, c)) {
      throw InternalError("ring camera does not see its look-at point");
    }
    cams.push_back(c);
  }
  return cams;
}

std::vector<CameraRecord> generate_rig(const RigSpec& rig) {
  const Vec3 center = rig.look_at + Vec3(0.0, 0.0, rig.height);
  return generate_camera_ring(center, rig.radius, rig.count, rig.look_at, rig.width,
                              rig.height_px, rig.focal, rig.first_id, rig.phase);
}

void render_truth(const GaussianScene& scene1, const GaussianScene& scene2,
                  SynthTruth& truth, const std::vector<CameraRecord>& views) {
  auto channel = [](const std::vector<ChangeLabel>& labels, auto pred) {
    std::vector<double> c(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) c[i] = pred(labels[i]) ? 1.0 : 0.0;
    return c;
  };
  auto changed = [](ChangeLabel l) { return l != ChangeLabel::unchanged; };
  auto structural = [](ChangeLabel l) { return l == ChangeLabel::structural; };
  auto surface = [](ChangeLabel l) { return l == ChangeLabel::surface; };

  truth.view_ids.clear();
  truth.masks.clear();
  truth.label_masks.clear();
  for (const auto& view : views) {
    const ScalarImage fused =
        fuse_maps(render_scalar(scene1, channel(truth.labels1, changed), view),
                  render_scalar(scene2, channel(truth.labels2, changed), view));
    const ScalarImage s =
        fuse_maps(render_scalar(scene1, channel(truth.labels1, structural), view),
                  render_scalar(scene2, channel(truth.labels2, structural), view));
    const ScalarImage f =
        fuse_maps(render_scalar(scene1, channel(truth.labels1, surface), view),
                  render_scalar(scene2, channel(truth.labels2, surface), view));
    auto labelled = binarize_and_label(fused, s, f, 0.5);
    truth.view_ids.push_back(view.id);
    truth.masks.push_back(std::move(labelled.binary));
    truth.label_masks.push_back(std::move(labelled.labels));
  }
}

SynthPair generate_pair(const SynthSpec& spec) {
  const auto& d = spec.drift;
  if (d.tangential_jitter < 0 || d.normal_jitter < 0 || d.color_jitter < 0 ||
      d.resample_fraction < 0 || d.resample_fraction > 1) {
    throw ValidationError("drift parameters must be non-negative (fraction <= 1)");
  }
  std::vector<Sample> samples;
  for (std::size_t s = 0; s < spec.surfaces.size(); ++s) {
    sample_surface(samples, spec.surfaces[s], static_cast<int>(s));
  }
  std::vector<SampleEdit> edits(samples.size());
  std::vector<Sample> added;
  for (const auto& change : spec.changes) {
    if (change.kind == ChangeKind::add) {
      SurfaceSpec cluster;
      cluster.kind = SurfaceKind::sphere;
      cluster.center = change.center;
      cluster.size = Vec3::Constant(change.radius);
      cluster.color = change.offset;
      cluster.spacing = spec.surfaces.empty() ? 0.05 : spec.surfaces.front().spacing;
      if (!(change.radius > 0.0)) throw ValidationError("added cluster needs a radius");
      sample_surface(added, cluster, -1);
      continue;
    }
    std::size_t hits = 0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      if (!in_region(samples[k], change)) continue;
      ++hits;
      auto& e = edits[k];
      const ChangeLabel label =
          change.kind == ChangeKind::recolor ? ChangeLabel::surface : ChangeLabel::structural;
      // Structural edits take precedence when regions overlap.
      if (e.label1 != ChangeLabel::structural) e.label1 = label;
      switch (change.kind) {
        case ChangeKind::remove:
          e.removed = true;
          break;
        case ChangeKind::displace:
          e.translation += change.offset;
          if (e.label2 != ChangeLabel::structural) e.label2 = label;
          break;
        case ChangeKind::recolor:
          e.color_shift += change.offset;
          if (e.label2 != ChangeLabel::structural) e.label2 = label;
          break;
        case ChangeKind::add:
          break;
      }
    }
    if (hits == 0) {
      throw ValidationError("change region of a " + to_string(change.kind) +
                            " change contains no primitives");
    }
  }

  SynthPair pair;
  pair.scene1.cameras = generate_rig(spec.rig1);
  pair.scene2.cameras = generate_rig(spec.rig2);
  Rng rng(spec.seed);
  for (auto* set : {&samples, &added}) {
    for (auto& smp : *set) smp.spin = 2.0 * std::numbers::pi * rng.uniform();
  }
  for (std::size_t k = 0; k < samples.size(); ++k) {
    instantiate(samples[k], spec.drift, false, edits[k], rng, pair.scene1, pair.truth.labels1);
  }
  for (std::size_t k = 0; k < samples.size(); ++k) {
    instantiate(samples[k], spec.drift, true, edits[k], rng, pair.scene2, pair.truth.labels2);
  }
  SampleEdit new_object;
  new_object.label2 = ChangeLabel::structural;
  for (const auto& smp : added) {
    instantiate(smp, spec.drift, true, new_object, rng, pair.scene2, pair.truth.labels2);
  }
  render_truth(pair.scene1, pair.scene2, pair.truth, pair.scene2.cameras);
  return pair;
}

SynthSpec static_preset(std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  auto surface = [](SurfaceKind kind, Vec3 center, Vec3 size, Vec3 color) {
    SurfaceSpec s;
    s.kind = kind;
    s.center = center;
    s.size = size;
    s.color = color;
    s.spacing = 0.05;
    return s;
  };
  spec.surfaces = {
      surface(SurfaceKind::plane, {0, 0, 0}, {1.5, 1.5, 0}, {0.55, 0.5, 0.45}),
      surface(SurfaceKind::box, {-0.6, -0.5, 0.25}, {0.25, 0.25, 0.25}, {0.8, 0.3, 0.2}),
      surface(SurfaceKind::box, {0.6, 0.6, 0.2}, {0.3, 0.2, 0.2}, {0.2, 0.6, 0.3}),
      surface(SurfaceKind::sphere, {0.55, -0.55, 0.3}, {0.3, 0.3, 0.3}, {0.25, 0.35, 0.8}),
      surface(SurfaceKind::sphere, {-0.55, 0.6, 0.25}, {0.25, 0.25, 0.25}, {0.8, 0.75, 0.25}),
  };
  spec.rig1 = RigSpec{10, 3.2, 2.0, 0.0, Vec3::Zero(), 96, 72, 70.0, 0};
  spec.rig2 = RigSpec{10, 3.0, 2.3, std::numbers::pi / 10.0, Vec3::Zero(), 96, 72, 70.0, 100};
  return spec;
}

SynthSpec moderate_preset(std::uint64_t seed, ChangeKind kind) {
  SynthSpec spec = static_preset(seed);
  spec.drift.tangential_jitter = 0.015;
  spec.drift.normal_jitter = 0.004;
  spec.drift.resample_fraction = 0.2;
  spec.drift.color_jitter = 0.02;
  spec.drift.global_color_offset = Vec3(0.03, 0.02, -0.02);

  // Seed picks which object changes.
  const int object = 1 + static_cast<int>(seed % 4);
  ChangeSpec change;
  change.kind = kind;
  change.center = spec.surfaces[object].center;
  change.radius = 10.0;
  change.surface = object;
  switch (kind) {
    case ChangeKind::remove:
      break;
    case ChangeKind::add:
      change.center = Vec3(0.0, 0.0, 0.2);
      change.radius = 0.2;
      change.surface = -1;
      change.offset = Vec3(0.9, 0.15, 0.6);
      break;
    case ChangeKind::displace:
      change.offset = Vec3(0.0, 0.0, 0.25);
      break;
    case ChangeKind::recolor:
      change.offset = Vec3(1.0, -1.0, 1.0) * (0.4 / std::sqrt(3.0));
      break;
  }
  spec.changes = {change};
  return spec;
}

std::string to_string(ChangeKind kind) {
  switch (kind) {
    case ChangeKind::remove: return "remove";
    case ChangeKind::add: return "add";
    case ChangeKind::displace: return "displace";
    case ChangeKind::recolor: return "recolor";
  }
  return "unknown";
}

ChangeKind change_kind_from_string(const std::string& name) {
  if (name == "remove") return ChangeKind::remove;
  if (name == "add") return ChangeKind::add;
  if (name == "displace") return ChangeKind::displace;
  if (name == "recolor") return ChangeKind::recolor;
  throw ValidationError("unknown change kind " + name);
}

namespace {

std::string surface_name(SurfaceKind k) {
  switch (k) {
    case SurfaceKind::plane: return "plane";
    case SurfaceKind::sphere: return "sphere";
    case SurfaceKind::box: return "box";
  }
  return "plane";
}

SurfaceKind surface_from(const std::string& name) {
  if (name == "plane") return SurfaceKind::plane;
  if (name == "sphere") return SurfaceKind::sphere;
  if (name == "box") return SurfaceKind::box;
  throw ValidationError("unknown surface kind " + name);
}

nlohmann::json vec(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ValidationError("expected a 3-vector");
  return {v[0], v[1], v[2]};
}

nlohmann::json rig_json(const RigSpec& r) {
  return {{"count", r.count},     {"radius", r.radius}, {"height", r.height},
          {"phase", r.phase},     {"look_at", vec(r.look_at)},
          {"width", r.width},     {"height_px", r.height_px},
          {"focal", r.focal},     {"first_id", r.first_id}};
}

RigSpec rig_from(const nlohmann::json& j) {
  RigSpec r;
  r.count = j.value("count", r.count);
  r.radius = j.value("radius", r.radius);
  r.height = j.value("height", r.height);
  r.phase = j.value("phase", r.phase);
  if (j.contains("look_at")) r.look_at = vec_from(j["look_at"]);
  r.width = j.value("width", r.width);
  r.height_px = j.value("height_px", r.height_px);
  r.focal = j.value("focal", r.focal);
  r.first_id = j.value("first_id", r.first_id);
  return r;
}

}  // namespace

nlohmann::json to_json(const SynthSpec& spec) {
  nlohmann::json j;
  j["seed"] = spec.seed;
  j["surfaces"] = nlohmann::json::array();
  for (const auto& s : spec.surfaces) {
    j["surfaces"].push_back({{"kind", surface_name(s.kind)},
                             {"center", vec(s.center)},
                             {"size", vec(s.size)},
                             {"color", vec(s.color)},
                             {"spacing", s.spacing}});
  }
  j["drift"] = {{"tangential_jitter", spec.drift.tangential_jitter},
                {"normal_jitter", spec.drift.normal_jitter},
                {"resample_fraction", spec.drift.resample_fraction},
                {"color_jitter", spec.drift.color_jitter},
                {"global_color_offset", vec(spec.drift.global_color_offset)}};
  j["changes"] = nlohmann::json::array();
  for (const auto& c : spec.changes) {
    j["changes"].push_back({{"kind", to_string(c.kind)},
                            {"center", vec(c.center)},
                            {"radius", c.radius},
                            {"surface", c.surface},
                            {"offset", vec(c.offset)}});
  }
  j["rig1"] = rig_json(spec.rig1);
  j["rig2"] = rig_json(spec.rig2);
  return j;
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("preset")) {
      const auto seed = j.value("seed", std::uint64_t{0});
      const std::string preset = j["preset"].get<std::string>();
      if (preset == "static") return static_preset(seed);
      if (preset == "moderate") {
        return moderate_preset(seed, change_kind_from_string(j.value("change", std::string("remove"))));
      }
      throw ValidationError("unknown synth preset " + preset);
    }
    SynthSpec spec;
    spec.seed = j.value("seed", std::uint64_t{0});
    for (const auto& s : j.at("surfaces")) {
      SurfaceSpec surf;
      surf.kind = surface_from(s.at("kind").get<std::string>());
      surf.center = vec_from(s.at("center"));
      surf.size = vec_from(s.at("size"));
      if (s.contains("color")) surf.color = vec_from(s["color"]);
      surf.spacing = s.value("spacing", surf.spacing);
      spec.surfaces.push_back(surf);
    }
    if (j.contains("drift")) {
      const auto& d = j["drift"];
      spec.drift.tangential_jitter = d.value("tangential_jitter", 0.0);
      spec.drift.normal_jitter = d.value("normal_jitter", 0.0);
      spec.drift.resample_fraction = d.value("resample_fraction", 0.0);
      spec.drift.color_jitter = d.value("color_jitter", 0.0);
      if (d.contains("global_color_offset")) {
        spec.drift.global_color_offset = vec_from(d["global_color_offset"]);
      }
    }
    if (j.contains("changes")) {
      for (const auto& c : j["changes"]) {
        ChangeSpec change;
        change.kind = change_kind_from_string(c.at("kind").get<std::string>());
        if (c.contains("center")) change.center = vec_from(c["center"]);
        change.radius = c.value("radius", 0.0);
        change.surface = c.value("surface", -1);
        if (c.contains("offset")) change.offset = vec_from(c["offset"]);
        spec.changes.push_back(change);
      }
    }
    spec.rig1 = rig_from(j.at("rig1"));
    spec.rig2 = rig_from(j.at("rig2"));
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synth spec: ") + e.what());
  }
}

}  // namespace splatdiff
