#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fracgen/core/vec.hpp"
#include "fracgen/impulse/impulse.hpp"
#include "fracgen/nn/model.hpp"
#include "fracgen/recon/reconstruct.hpp"
#include "fracgen/train/trainer.hpp"
#include "fracgen/voxel/grid.hpp"
#include "fracgen/voxel/mesh.hpp"

namespace fracgen::harness {

enum class ShapeKind { Sphere, Mesh };

/// Point-mass rigid body. Breakable bodies carry their voxelization and a
/// signed distance field (negative inside, local frame) for contact tests;
/// the mesh of a breakable body is expected to be normalized to [-1,1]^3.
struct RigidBody {
  uint64_t id = 0;
  ShapeKind shape = ShapeKind::Sphere;
  double radius = 0.1;
  voxel::TriMesh mesh;
  double mass = 1.0;
  Vec3 velocity{0, 0, 0};
  Vec3 position{0, 0, 0};
  std::array<double, 4> orientation{1, 0, 0, 0};
  bool breakable = false;
  bool dynamic = true;
  voxel::OccupancyGrid occ;
  voxel::ScalarField sdf;

  void validate() const;
};

/// Scene and integrator parameters. `impulse_threshold` is per 4 ms
/// reference window; `i_max` is the magnitude mapped to +1 when impulses
/// are normalized for the network.
struct SceneConfig {
  Vec3 gravity{0, 0, 0};
  double spawn_radius = 2.5;
  double speed_min = 20.0;
  double speed_max = 60.0;
  double aim_jitter_deg = 10.0;
  double ball_mass = 1.0;
  double ball_radius = 0.15;
  double restitution = 0.5;
  double frame_dt = 0.004;
  double impulse_threshold = 10.0;
  double i_max = 100.0;
  int resolution = 32;
  int dz = 8;
  int max_contact_frames = 1000;
  uint64_t seed = 0;

  void validate() const;
};

/// Reads a scene config from JSON; unknown keys are ignored, missing keys
/// keep their defaults.
SceneConfig load_scene_config(const std::string& path);

struct World {
  std::vector<RigidBody> bodies;
  long frame = 0;
  uint64_t next_id = 1;

  uint64_t add_body(RigidBody body);
  RigidBody* find(uint64_t id);
  const RigidBody* find(uint64_t id) const;
  void remove_body(uint64_t id);
};

/// Breakable body at the origin from a watertight mesh already normalized
/// to [-1,1]^3: voxelizes it and caches the contact distance field.
RigidBody make_breakable(const voxel::TriMesh& mesh, double mass, int resolution);

/// Dynamic sphere, non-breakable.
RigidBody make_ball(const Vec3& position, const Vec3& velocity, double mass, double radius);

/// Ball on the spawn sphere, aimed at the origin with up to
/// `aim_jitter_deg` of tilt and a speed drawn from the configured range.
RigidBody sample_ball(Rng& rng, const SceneConfig& cfg);

/// One contact this frame, impulse given in the breakable body's local frame.
struct ContactEvent {
  uint64_t body = 0;
  impulse::ImpulseRaw raw;
};

/// Semi-implicit Euler over every dynamic body plus sphere-vs-breakable
/// contact response (balls bounce, targets hold still). Returns the frame's
/// contacts; nothing fractures here.
std::vector<ContactEvent> advance_frame(World& world, const SceneConfig& cfg);

struct FrameReport {
  long frame = 0;
  int contacts = 0;
  int fractures = 0;
  int fractures_skipped = 0;
  std::vector<uint64_t> fractured_bodies;
  double predict_seconds = 0.0;
  double recon_seconds = 0.0;
};

/// Everything a fracture trigger produced, for callers that archive runs.
/// `fragments` is empty when the prediction had no surviving region.
struct FractureArtifacts {
  long frame = 0;
  uint64_t body = 0;
  gssdf::GssdfField field;
  voxel::LabelGrid labels;
  std::vector<recon::FragmentBody> fragments;
};

/// advance_frame plus the fracture pipeline: accumulated impulses at or
/// above the threshold trigger predict -> segment -> rebuild, and the body
/// is swapped for its fragments. A prediction with no surviving region
/// leaves the body intact and is counted in `fractures_skipped`.
FrameReport runtime_step(World& world, const nn::FractureModel& model, const SceneConfig& cfg,
                         std::vector<FractureArtifacts>* artifacts = nullptr);

/// Removes a breakable body and inserts its fragments at the body's pose.
/// Fragments are dynamic, non-breakable mesh bodies.
void replace_with_fragments(World& world, uint64_t body_id,
                            const std::vector<recon::FragmentBody>& fragments);

/// Reference fragment labeling for dataset targets: seed count grows
/// linearly with impulse magnitude (2 at zero, 10 at i_max, capped at 24),
/// seeds cluster around the impact point with Gaussian density (sigma 0.35),
/// and every material voxel joins its nearest seed.
voxel::LabelGrid synthetic_fracture_oracle(const voxel::OccupancyGrid& occ,
                                           const impulse::ImpulseRaw& imp, double i_max,
                                           uint64_t seed);

/// Shoots one ball per sample at the target from random directions on the
/// spawn sphere, records the contact impulse, labels the shape with the
/// fracture oracle, and encodes the signed field. Samples that never touch
/// the target within `max_contact_frames` are skipped with a warning on
/// stderr. The target mesh must be watertight and normalized to [-1,1]^3.
train::Dataset generate_dataset(const voxel::TriMesh& target, int n_samples,
                                const SceneConfig& cfg);

}  // namespace fracgen::harness
