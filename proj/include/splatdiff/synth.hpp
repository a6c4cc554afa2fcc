#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "splatdiff/scene_model.hpp"
#include "splatdiff/splat_render.hpp"

namespace splatdiff {

enum class SurfaceKind { plane, sphere, box };
enum class ChangeKind { remove, add, displace, recolor };

struct SurfaceSpec {
  SurfaceKind kind = SurfaceKind::plane;
  Vec3 center = Vec3::Zero();
  /// plane: half extents in x and y (z ignored), horizontal at center.z;
  /// sphere: radius in x; box: half extents.
  Vec3 size = Vec3::Ones();
  Vec3 color = Vec3::Constant(0.5);
  /// Sample spacing; density is 1 / spacing^2 per unit area.
  double spacing = 0.05;
};

struct DriftSpec {
  double tangential_jitter = 0.0;
  double normal_jitter = 0.0;
  /// Fraction of surface samples represented by two half-size primitives.
  double resample_fraction = 0.0;
  double color_jitter = 0.0;
  /// Added to every scene-2 color.
  Vec3 global_color_offset = Vec3::Zero();
};

struct ChangeSpec {
  ChangeKind kind = ChangeKind::remove;
  /// Region: samples with base position within `radius` of `center`, further
  /// restricted to one surface when `surface` >= 0. For `add`, the new
  /// sphere cluster's centre and radius.
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  int surface = -1;
  /// displace: translation; recolor: RGB shift; add: cluster color.
  Vec3 offset = Vec3::Zero();
};

struct RigSpec {
  int count = 8;
  double radius = 3.0;
  double height = 1.5;
  /// Angle of the first camera, radians.
  double phase = 0.0;
  Vec3 look_at = Vec3::Zero();
  int width = 96;
  int height_px = 72;
  double focal = 80.0;
  std::int64_t first_id = 0;
};

struct SynthSpec {
  std::uint64_t seed = 0;
  std::vector<SurfaceSpec> surfaces;
  DriftSpec drift;
  std::vector<ChangeSpec> changes;
  RigSpec rig1;
  RigSpec rig2;
};

struct SynthTruth {
  /// Per primitive of each scene: unchanged, structural or surface.
  std::vector<ChangeLabel> labels1;
  std::vector<ChangeLabel> labels2;
  /// Per camera of rig 2.
  std::vector<std::int64_t> view_ids;
  std::vector<MaskImage> masks;
  std::vector<LabelImage> label_masks;
};

struct SynthPair {
  GaussianScene scene1;
  GaussianScene scene2;
  SynthTruth truth;
};

/// Evenly spaced poses on a horizontal circle, all looking at look_at.
std::vector<CameraRecord> generate_camera_ring(const Vec3& center, double radius,
                                               int count, const Vec3& look_at,
                                               int width = 96, int height = 72,
                                               double focal = 80.0,
                                               std::int64_t first_id = 0,
                                               double phase = 0.0);

std::vector<CameraRecord> generate_rig(const RigSpec& rig);

/// Deterministic for a given spec (mt19937_64 with hand-written
/// distributions, so results do not depend on the standard library).
SynthPair generate_pair(const SynthSpec& spec);

/// Renders ground-truth masks for `views` from per-primitive labels.
void render_truth(const GaussianScene& scene1, const GaussianScene& scene2,
                  SynthTruth& truth, const std::vector<CameraRecord>& views);

/// Documented "moderate" drift preset: ground plane, two boxes, two spheres,
/// two ten-camera rigs and a single change of the given kind.
SynthSpec moderate_preset(std::uint64_t seed, ChangeKind kind);

/// Same layout with all drift set to zero and no changes.
SynthSpec static_preset(std::uint64_t seed);

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

std::string to_string(ChangeKind kind);
ChangeKind change_kind_from_string(const std::string& name);

}  // namespace splatdiff
