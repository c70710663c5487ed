#include "fracgen/harness/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "fracgen/core/error.hpp"
#include "fracgen/core/rng.hpp"
#include "fracgen/gssdf/gssdf.hpp"
#include "fracgen/seg/watershed.hpp"
#include "fracgen/voxel/distance.hpp"
#include "fracgen/voxel/voxelize.hpp"

namespace fracgen::harness {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_finite_vec(const Vec3& v, const char* what) {
  if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
    throw NumericError(std::string(what) + " is not finite");
}

/// Trilinear sample of a cell-centered field; points beyond the outermost
/// centers clamp onto them and the clipped-off distance is added, so far-away
/// queries still read as far away.
double sample_field(const voxel::ScalarField& f, const Vec3& q) {
  const int r = f.meta.resolution;
  const double h = f.meta.spacing();
  const double lo = -1.0 + 0.5 * h;
  const double hi = 1.0 - 0.5 * h;
  const Vec3 c{std::clamp(q.x, lo, hi), std::clamp(q.y, lo, hi), std::clamp(q.z, lo, hi)};
  const double extra = (q - c).norm();

  const double ux = (c.x - lo) / h;
  const double uy = (c.y - lo) / h;
  const double uz = (c.z - lo) / h;
  const int ix = std::min(static_cast<int>(ux), r - 2);
  const int iy = std::min(static_cast<int>(uy), r - 2);
  const int iz = std::min(static_cast<int>(uz), r - 2);
  const double fx = ux - ix;
  const double fy = uy - iy;
  const double fz = uz - iz;

  double v = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) * (dz ? fz : 1.0 - fz);
        v += w * f.at(ix + dx, iy + dy, iz + dz);
      }
  return v + extra;
}

Vec3 field_gradient(const voxel::ScalarField& f, const Vec3& q) {
  const double d = 0.5 * f.meta.spacing();
  return {(sample_field(f, {q.x + d, q.y, q.z}) - sample_field(f, {q.x - d, q.y, q.z})) / (2 * d),
          (sample_field(f, {q.x, q.y + d, q.z}) - sample_field(f, {q.x, q.y - d, q.z})) / (2 * d),
          (sample_field(f, {q.x, q.y, q.z + d}) - sample_field(f, {q.x, q.y, q.z - d})) / (2 * d)};
}

uint64_t mix_seeds(uint64_t a, uint64_t b, uint64_t c) {
  uint64_t s = a ^ (b * 0x9e3779b97f4a7c15ull) ^ (c * 0xbf58476d1ce4e5b9ull);
  return splitmix64(s);
}

}  // namespace

void RigidBody::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigError("body mass must be positive");
  require_finite_vec(position, "body position");
  require_finite_vec(velocity, "body velocity");
  if (shape == ShapeKind::Sphere) {
    if (!(radius > 0.0)) throw ConfigError("sphere radius must be positive");
    if (breakable) throw ConfigError("breakable bodies need a mesh shape");
  } else if (mesh.empty()) {
    throw ConfigError("mesh body has no triangles");
  }
  if (breakable && sdf.values.empty()) throw ConfigError("breakable body has no distance field");
}

void SceneConfig::validate() const {
  if (!(frame_dt > 0.0)) throw ConfigError("frame_dt must be positive");
  if (!(spawn_radius > 0.0)) throw ConfigError("spawn_radius must be positive");
  if (!(speed_min > 0.0) || speed_max < speed_min)
    throw ConfigError("ball speed range must satisfy 0 < min <= max");
  if (aim_jitter_deg < 0.0 || aim_jitter_deg >= 90.0)
    throw ConfigError("aim_jitter_deg must lie in [0, 90)");
  if (!(ball_mass > 0.0)) throw ConfigError("ball_mass must be positive");
  if (!(ball_radius > 0.0)) throw ConfigError("ball_radius must be positive");
  if (restitution < 0.0 || restitution > 1.0) throw ConfigError("restitution must lie in [0, 1]");
  if (impulse_threshold < 0.0) throw ConfigError("impulse_threshold must be non-negative");
  if (!(i_max > 0.0)) throw ConfigError("i_max must be positive");
  if (resolution < 4) throw ConfigError("resolution must be at least 4");
  if (dz < 1) throw ConfigError("dz must be positive");
  if (max_contact_frames < 1) throw ConfigError("max_contact_frames must be positive");
  require_finite_vec(gravity, "gravity");
}

SceneConfig load_scene_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("no such scene config: " + path);
  SceneConfig cfg;
  try {
    nlohmann::json j;
    in >> j;
    if (j.contains("gravity")) {
      const auto& g = j.at("gravity");
      if (!g.is_array() || g.size() != 3)
        throw ConfigError("gravity must be an array of 3 numbers: " + path);
      cfg.gravity = {g.at(0).get<double>(), g.at(1).get<double>(), g.at(2).get<double>()};
    }
    cfg.spawn_radius = j.value("spawn_radius", cfg.spawn_radius);
    cfg.speed_min = j.value("speed_min", cfg.speed_min);
    cfg.speed_max = j.value("speed_max", cfg.speed_max);
    cfg.aim_jitter_deg = j.value("aim_jitter_deg", cfg.aim_jitter_deg);
    cfg.ball_mass = j.value("ball_mass", cfg.ball_mass);
    cfg.ball_radius = j.value("ball_radius", cfg.ball_radius);
    cfg.restitution = j.value("restitution", cfg.restitution);
    cfg.frame_dt = j.value("frame_dt", cfg.frame_dt);
    cfg.impulse_threshold = j.value("impulse_threshold", cfg.impulse_threshold);
    cfg.i_max = j.value("i_max", cfg.i_max);
    cfg.resolution = j.value("resolution", cfg.resolution);
    cfg.dz = j.value("dz", cfg.dz);
    cfg.max_contact_frames = j.value("max_contact_frames", cfg.max_contact_frames);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed scene config " + path + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

uint64_t World::add_body(RigidBody body) {
  body.validate();
  body.id = next_id++;
  bodies.push_back(std::move(body));
  return bodies.back().id;
}

RigidBody* World::find(uint64_t id) {
  for (auto& b : bodies)
    if (b.id == id) return &b;
  return nullptr;
}

const RigidBody* World::find(uint64_t id) const {
  for (const auto& b : bodies)
    if (b.id == id) return &b;
  return nullptr;
}

void World::remove_body(uint64_t id) {
  const auto it = std::find_if(bodies.begin(), bodies.end(),
                               [id](const RigidBody& b) { return b.id == id; });
  if (it == bodies.end()) throw ConfigError("no body with id " + std::to_string(id));
  bodies.erase(it);
}

RigidBody make_breakable(const voxel::TriMesh& mesh, double mass, int resolution) {
  voxel::GridMeta meta;
  meta.resolution = resolution;
  RigidBody b;
  b.shape = ShapeKind::Mesh;
  b.mesh = mesh;
  b.mass = mass;
  b.breakable = true;
  b.occ = voxel::voxelize(mesh, meta);
  if (b.occ.count() == 0) throw ConfigError("mesh voxelizes to nothing at this resolution");
  const auto din = voxel::distance_transform(b.occ, voxel::Region::Inside);
  const auto dout = voxel::distance_transform(b.occ, voxel::Region::Outside);
  b.sdf = voxel::ScalarField(meta);
  for (size_t i = 0; i < b.sdf.values.size(); ++i)
    b.sdf.values[i] = dout.values[i] - din.values[i];
  b.validate();
  return b;
}

RigidBody make_ball(const Vec3& position, const Vec3& velocity, double mass, double radius) {
  RigidBody b;
  b.shape = ShapeKind::Sphere;
  b.radius = radius;
  b.mass = mass;
  b.position = position;
  b.velocity = velocity;
  b.validate();
  return b;
}

RigidBody sample_ball(Rng& rng, const SceneConfig& cfg) {
  Vec3 u{rng.normal(), rng.normal(), rng.normal()};
  while (u.norm() < 1e-9) u = {rng.normal(), rng.normal(), rng.normal()};
  u = u.normalized();

  // aim at the origin, tilted uniformly within the jitter cone
  const Vec3 axis = -u;
  const Vec3 ref = std::abs(axis.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  const Vec3 t1 = axis.cross(ref).normalized();
  const Vec3 t2 = axis.cross(t1);
  const double cos_max = std::cos(cfg.aim_jitter_deg * kPi / 180.0);
  const double c = 1.0 - rng.uniform01() * (1.0 - cos_max);
  const double az = rng.uniform(0.0, 2.0 * kPi);
  const double sn = std::sqrt(std::max(0.0, 1.0 - c * c));
  const Vec3 dir = axis * c + t1 * (sn * std::cos(az)) + t2 * (sn * std::sin(az));
  const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);

  return make_ball(u * cfg.spawn_radius, dir * speed, cfg.ball_mass, cfg.ball_radius);
}

std::vector<ContactEvent> advance_frame(World& world, const SceneConfig& cfg) {
  std::vector<ContactEvent> events;
  for (auto& b : world.bodies)
    if (b.dynamic) b.velocity += cfg.gravity * cfg.frame_dt;

  for (auto& b : world.bodies) {
    if (!b.dynamic) continue;
    const Vec3 x0 = b.position;
    Vec3 x1 = x0 + b.velocity * cfg.frame_dt;

    if (b.shape == ShapeKind::Sphere && !b.breakable) {
      // sample the path so a fast ball cannot step through a thin target
      const double travel = (x1 - x0).norm();
      const int steps = std::max(1, static_cast<int>(std::ceil(travel / (0.5 * b.radius))));
      bool placed = false;
      for (int s = 1; s <= steps && !placed; ++s) {
        const Vec3 p = x0 + (x1 - x0) * (static_cast<double>(s) / steps);
        for (auto& t : world.bodies) {
          if (!t.breakable || t.id == b.id) continue;
          const Vec3 q = p - t.position;
          const double phi = sample_field(t.sdf, q);
          if (phi > b.radius) continue;
          Vec3 n = field_gradient(t.sdf, q);
          const double nlen = n.norm();
          n = nlen > 1e-12 ? n / nlen : (q.norm() > 1e-12 ? q.normalized() : Vec3{0, 0, 1});
          const double vn = (b.velocity - t.velocity).dot(n);
          if (vn >= 0.0) continue;  // already separating
          const double j = (1.0 + cfg.restitution) * b.mass * (-vn);
          b.velocity = b.velocity - n * ((1.0 + cfg.restitution) * vn);
          x1 = p + n * std::max(0.0, b.radius - phi);

          impulse::ImpulseRaw raw;
          raw.p = q - n * phi;
          raw.d = -n;
          raw.I = j;
          events.push_back({t.id, raw});
          placed = true;
          break;
        }
      }
    }
    b.position = x1;
  }
  ++world.frame;
  return events;
}

FrameReport runtime_step(World& world, const nn::FractureModel& model, const SceneConfig& cfg,
                         std::vector<FractureArtifacts>* artifacts) {
  using clock = std::chrono::steady_clock;
  const auto seconds_since = [](clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };

  FrameReport rep;
  rep.frame = world.frame;
  const auto events = advance_frame(world, cfg);
  rep.contacts = static_cast<int>(events.size());

  std::map<uint64_t, std::vector<impulse::ImpulseRaw>> per_body;
  for (const auto& e : events) per_body[e.body].push_back(e.raw);

  for (const auto& [id, contacts] : per_body) {
    const auto engaged =
        impulse::accumulate_impulses(contacts, cfg.impulse_threshold, cfg.frame_dt);
    if (!engaged) continue;
    RigidBody* body = world.find(id);
    if (!body || !body->breakable) continue;

    const recon::SourceState src{body->mass, body->velocity};
    const auto vnorm = impulse::normalize_impulse(*engaged, cfg.i_max);
    const uint64_t z_seed = mix_seeds(cfg.seed, static_cast<uint64_t>(rep.frame), id);

    const auto t_pred = clock::now();
    auto field = train::predict(model, vnorm, z_seed);
    rep.predict_seconds += seconds_since(t_pred);

    const auto t_recon = clock::now();
    const auto mask = gssdf::extract_mask(field);
    const auto usdf = gssdf::extract_usdf(field);
    const auto basins = seg::watershed_segment(usdf, {});
    auto kept = seg::filter_labels(basins, mask);
    std::vector<recon::FragmentBody> fragments;
    if (kept.num_regions > 0) fragments = recon::reconstruct_fragments(kept, src);
    rep.recon_seconds += seconds_since(t_recon);

    if (fragments.empty()) {
      ++rep.fractures_skipped;
    } else {
      replace_with_fragments(world, id, fragments);
      ++rep.fractures;
      rep.fractured_bodies.push_back(id);
    }
    if (artifacts)
      artifacts->push_back(
          {rep.frame, id, std::move(field), std::move(kept), std::move(fragments)});
  }
  return rep;
}

void replace_with_fragments(World& world, uint64_t body_id,
                            const std::vector<recon::FragmentBody>& fragments) {
  RigidBody* body = world.find(body_id);
  if (!body) throw ConfigError("no body with id " + std::to_string(body_id));
  if (!body->breakable) throw ConfigError("body is not breakable");
  if (fragments.empty()) throw ConfigError("no fragments to insert");
  const Vec3 pos = body->position;
  const auto orient = body->orientation;
  world.remove_body(body_id);
  for (const auto& f : fragments) {
    RigidBody rb;
    rb.shape = ShapeKind::Mesh;
    rb.mesh = f.mesh;
    rb.mass = f.mass;
    rb.velocity = f.velocity;
    rb.position = pos;
    rb.orientation = orient;
    rb.breakable = false;
    world.add_body(std::move(rb));
  }
}

voxel::LabelGrid synthetic_fracture_oracle(const voxel::OccupancyGrid& occ,
                                           const impulse::ImpulseRaw& imp, double i_max,
                                           uint64_t seed) {
  if (!(i_max > 0.0)) throw ConfigError("i_max must be positive");
  if (!std::isfinite(imp.I) || imp.I < 0.0) throw ConfigError("impulse magnitude must be >= 0");
  const auto& meta = occ.meta;
  const int r = meta.resolution;

  std::vector<size_t> material;
  for (size_t i = 0; i < occ.bits.size(); ++i)
    if (occ.bits[i]) material.push_back(i);
  if (material.empty()) throw ConfigError("fracture oracle needs a non-empty shape");

  int n_seeds = std::clamp(2 + static_cast<int>(std::floor(8.0 * imp.I / i_max)), 2, 24);
  n_seeds = std::min<int>(n_seeds, static_cast<int>(material.size()));

  const auto center_of = [&](size_t idx) {
    const int ix = static_cast<int>(idx % r);
    const int iy = static_cast<int>((idx / r) % r);
    const int iz = static_cast<int>(idx / (static_cast<size_t>(r) * r));
    return meta.cell_center(ix, iy, iz);
  };

  // rejection sampling against the Gaussian density around the impact point
  Rng rng(seed);
  const double sigma2 = 0.35 * 0.35;
  std::vector<uint8_t> used(occ.bits.size(), 0);
  std::vector<size_t> seeds;
  const size_t cap = 20000 * static_cast<size_t>(n_seeds);
  for (size_t tries = 0; static_cast<int>(seeds.size()) < n_seeds && tries < cap; ++tries) {
    const size_t idx = material[rng.uniform_index(material.size())];
    if (used[idx]) continue;
    const double d2 = (center_of(idx) - imp.p).norm2();
    if (rng.uniform01() < std::exp(-d2 / sigma2)) {
      used[idx] = 1;
      seeds.push_back(idx);
    }
  }
  for (size_t i = 0; static_cast<int>(seeds.size()) < n_seeds && i < material.size(); ++i) {
    if (used[material[i]]) continue;
    used[material[i]] = 1;
    seeds.push_back(material[i]);
  }

  voxel::LabelGrid out(meta);
  out.num_regions = static_cast<uint32_t>(seeds.size());
  std::vector<Vec3> centers(seeds.size());
  for (size_t s = 0; s < seeds.size(); ++s) centers[s] = center_of(seeds[s]);
  for (const size_t idx : material) {
    const Vec3 c = center_of(idx);
    uint32_t best = 0;
    double best_d2 = 1e300;
    for (size_t s = 0; s < centers.size(); ++s) {
      const double d2 = (c - centers[s]).norm2();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<uint32_t>(s + 1);
      }
    }
    out.labels[idx] = best;
  }
  return out;
}

train::Dataset generate_dataset(const voxel::TriMesh& target, int n_samples,
                                const SceneConfig& cfg) {
  cfg.validate();
  if (n_samples <= 0) throw ConfigError("n_samples must be positive");

  RigidBody proto = make_breakable(target, 1.0, cfg.resolution);
  proto.dynamic = false;

  train::Dataset ds;
  ds.meta.resolution = cfg.resolution;
  ds.i_max = cfg.i_max;

  const Rng root(cfg.seed);
  for (int s = 0; s < n_samples; ++s) {
    Rng srng = root.derive(3 * static_cast<uint64_t>(s) + 1);

    World w;
    const uint64_t target_id = w.add_body(proto);
    w.add_body(sample_ball(srng, cfg));

    std::vector<impulse::ImpulseRaw> contacts;
    for (int f = 0; f < cfg.max_contact_frames && contacts.empty(); ++f) {
      for (const auto& e : advance_frame(w, cfg))
        if (e.body == target_id) contacts.push_back(e.raw);
    }
    if (contacts.empty()) {
      std::fprintf(stderr, "warning: sample %d never reached the target, skipping\n", s);
      continue;
    }
    const auto raw = impulse::accumulate_impulses(contacts, 0.0, cfg.frame_dt);

    train::DatasetPair pair;
    pair.vnorm = impulse::normalize_impulse(*raw, cfg.i_max);
    const uint64_t oracle_seed = root.derive(3 * static_cast<uint64_t>(s) + 2).next();
    const auto labels = synthetic_fracture_oracle(proto.occ, *raw, cfg.i_max, oracle_seed);
    pair.field = gssdf::encode_gssdf(labels);
    const uint64_t code_seed = root.derive(3 * static_cast<uint64_t>(s) + 3).next();
    const auto code = impulse::sample_normal_code(code_seed, cfg.dz);
    pair.zcode.assign(code.z.begin(), code.z.end());
    ds.pairs.push_back(std::move(pair));
  }
  if (ds.pairs.empty()) throw ConfigError("no sample ever reached the target");
  return ds;
}

}  // namespace fracgen::harness
