#include "fracgen/cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fracgen/core/error.hpp"
#include "fracgen/gssdf/gssdf.hpp"
#include "fracgen/harness/harness.hpp"
#include "fracgen/nn/model.hpp"
#include "fracgen/recon/reconstruct.hpp"
#include "fracgen/seg/watershed.hpp"
#include "fracgen/train/trainer.hpp"
#include "fracgen/voxel/gsf_io.hpp"
#include "fracgen/voxel/mesh.hpp"

namespace fracgen::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<uint64_t> seed;
  std::optional<int> resolution;
  std::optional<int> dz;
  std::optional<int> stages;
};

/// FRACTURE_OUT is the output root; --out resolves under it unless absolute.
fs::path resolve_out(const std::string& out_flag) {
  const char* env = std::getenv("FRACTURE_OUT");
  const fs::path root = env && *env ? fs::path(env) : fs::path(".");
  if (out_flag.empty()) return root;
  const fs::path o(out_flag);
  return o.is_absolute() ? o : root / o;
}

json load_json(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw MissingInputError(std::string("no such ") + what + ": " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed ") + what + " " + path + ": " + e.what());
  }
}

Vec3 vec3_of(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError(std::string(what) + " must be an array of 3 numbers");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

fs::path resolve_near(const std::string& rel, const std::string& config_path) {
  const fs::path p(rel);
  return p.is_absolute() ? p : fs::path(config_path).parent_path() / p;
}

struct ImpulseRecord {
  impulse::ImpulseRaw raw;
  double i_max = 100.0;
};

ImpulseRecord load_impulse_record(const std::string& path) {
  const json j = load_json(path, "impulse record");
  ImpulseRecord rec;
  try {
    rec.raw.p = vec3_of(j.at("p"), "p");
    rec.raw.d = vec3_of(j.at("d"), "d");
    rec.raw.I = j.at("I").get<double>();
    rec.i_max = j.value("i_max", 100.0);
  } catch (const json::exception& e) {
    throw ConfigError("malformed impulse record " + path + ": " + e.what());
  }
  if (!std::isfinite(rec.raw.I) || rec.raw.I < 0.0)
    throw ConfigError("impulse magnitude must be a finite non-negative number: " + path);
  if (!(rec.i_max > 0.0)) throw ConfigError("i_max must be positive: " + path);
  return rec;
}

void require_finite_field(const voxel::ScalarField& f) {
  for (const float v : f.values)
    if (!std::isfinite(v)) throw NumericError("prediction contains non-finite values");
}

int stages_for_resolution(int res) {
  for (const int s : {2, 3, 5})
    if (4 * (1 << s) == res) return s;
  throw ConfigError("no stage preset matches resolution " + std::to_string(res));
}

void write_run_manifest(const fs::path& dir, const std::string& command,
                        const std::string& config_path, uint64_t seed,
                        const std::vector<std::string>& outputs, double pred_s, double recon_s,
                        double total_s) {
  ordered_json j;
  j["command"] = command;
  j["config"] = config_path;
  j["seed"] = seed;
  j["git"] = FRACGEN_GIT_DESCRIBE;
  j["outputs"] = outputs;
  ordered_json t;
  t["pred_seconds"] = pred_s;
  t["recon_seconds"] = recon_s;
  t["others_seconds"] = std::max(0.0, total_s - pred_s - recon_s);
  t["runtime_seconds"] = total_s;
  j["timings"] = std::move(t);

  const fs::path final_path = dir / "run_manifest.json";
  const fs::path tmp_path = dir / "run_manifest.json.tmp";
  {
    std::ofstream out(tmp_path);
    if (!out) throw MissingInputError("cannot open for write: " + tmp_path.string());
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp_path, final_path);
}

int cmd_gen_data(const CommonFlags& f, std::ostream& out) {
  const auto t0 = clock_type::now();
  harness::SceneConfig scene = harness::load_scene_config(f.config);
  const json j = load_json(f.config, "config");
  if (f.seed) scene.seed = *f.seed;
  if (f.resolution) scene.resolution = *f.resolution;
  if (f.dz) scene.dz = *f.dz;
  scene.validate();

  const std::string target_rel = j.value("target", "");
  if (target_rel.empty()) throw ConfigError("config needs a 'target' mesh path: " + f.config);
  const int samples = j.value("samples", 8);
  if (samples < 1) throw ConfigError("samples must be positive: " + f.config);

  const auto mesh = recon::import_obj(resolve_near(target_rel, f.config).string());
  const auto [normalized, xform] = voxel::normalize_shape(mesh);
  const auto ds = harness::generate_dataset(normalized, samples, scene);

  const fs::path dir = resolve_out(f.out);
  fs::create_directories(dir);
  train::save_dataset((dir / "dataset.json").string(), ds);

  std::vector<std::string> outputs{"dataset.json"};
  for (size_t i = 0; i < ds.pairs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "pair_%04zu.gsf", i);
    outputs.emplace_back(name);
  }
  write_run_manifest(dir, "gen-data", f.config, scene.seed, outputs, 0.0, 0.0,
                     seconds_since(t0));
  out << "wrote " << ds.pairs.size() << " training pairs to " << dir.string() << "\n";
  return 0;
}

int cmd_train(const CommonFlags& f, std::ostream& out) {
  const auto t0 = clock_type::now();
  const json j = load_json(f.config, "config");

  std::string dataset_rel;
  train::TrainConfig tc;
  int c0 = 64;
  try {
    dataset_rel = j.value("dataset", "dataset.json");
    tc.epochs = j.value("epochs", tc.epochs);
    tc.batch_size = j.value("batch_size", tc.batch_size);
    tc.lr_model = j.value("lr_model", tc.lr_model);
    tc.lr_z = j.value("lr_z", tc.lr_z);
    tc.clip_c = j.value("clip_c", tc.clip_c);
    tc.n_critic = j.value("n_critic", tc.n_critic);
    tc.seed = j.value("seed", tc.seed);
    c0 = j.value("c0", c0);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + f.config + ": " + e.what());
  }
  if (f.seed) tc.seed = *f.seed;

  auto ds = train::load_dataset(resolve_near(dataset_rel, f.config).string());
  if (f.resolution && *f.resolution != ds.meta.resolution)
    throw ConfigError("--resolution does not match the dataset resolution");

  nn::ModelConfig mc;
  mc.resolution = ds.meta.resolution;
  mc.stages = stages_for_resolution(mc.resolution);
  if (f.stages && *f.stages != mc.stages)
    throw ConfigError("--stages does not match the dataset resolution");
  mc.dz = static_cast<int>(ds.pairs.front().zcode.size());
  if (f.dz && *f.dz != mc.dz) throw ConfigError("--dz does not match the dataset codes");
  mc.c0 = c0;
  mc.validate();
  tc.validate();

  const fs::path dir = resolve_out(f.out);
  fs::create_directories(dir);
  tc.metrics_path = (dir / "metrics.csv").string();

  Rng rng(tc.seed);
  train::Trainer trainer(nn::FractureModel(mc, rng), std::move(ds), tc);
  const auto metrics = trainer.train();
  trainer.save((dir / "model.gck").string());

  write_run_manifest(dir, "train", f.config, tc.seed,
                     {"model.gck", "model.gck.json", "metrics.csv"}, 0.0, 0.0,
                     seconds_since(t0));
  out << "trained " << metrics.size() << " epochs, checkpoint at "
      << (dir / "model.gck").string() << "\n";
  return 0;
}

struct PredictInputs {
  nn::FractureModel model;
  ImpulseRecord record;
  uint64_t seed = 0;
};

PredictInputs load_predict_inputs(const CommonFlags& f, const json& j) {
  const std::string ckpt_rel = j.value("checkpoint", "");
  if (ckpt_rel.empty()) throw ConfigError("config needs a 'checkpoint' path: " + f.config);
  const std::string imp_rel = j.value("impulse", "");
  if (imp_rel.empty()) throw ConfigError("config needs an 'impulse' record path: " + f.config);

  PredictInputs in{nn::load_checkpoint(resolve_near(ckpt_rel, f.config).string()),
                   load_impulse_record(resolve_near(imp_rel, f.config).string()),
                   j.value("seed", uint64_t{0})};
  if (f.seed) in.seed = *f.seed;
  if (f.resolution && *f.resolution != in.model.config().resolution)
    throw ConfigError("--resolution does not match the checkpoint");
  if (f.dz && *f.dz != in.model.config().dz) throw ConfigError("--dz does not match the checkpoint");
  if (f.stages && *f.stages != in.model.config().stages)
    throw ConfigError("--stages does not match the checkpoint");
  return in;
}

int cmd_predict(const CommonFlags& f, std::ostream& out) {
  const auto t0 = clock_type::now();
  const json j = load_json(f.config, "config");
  auto in = load_predict_inputs(f, j);

  const auto vnorm = impulse::normalize_impulse(in.record.raw, in.record.i_max);
  const auto t_pred = clock_type::now();
  const auto field = train::predict(in.model, vnorm, in.seed);
  const double pred_s = seconds_since(t_pred);
  require_finite_field(field.field);

  const fs::path dir = resolve_out(f.out);
  fs::create_directories(dir);
  voxel::write_gsf((dir / "predicted.gsf").string(), field.field);

  write_run_manifest(dir, "predict", f.config, in.seed, {"predicted.gsf"}, pred_s, 0.0,
                     seconds_since(t0));
  out << "predicted.gsf at resolution " << field.field.meta.resolution << "\n";
  return 0;
}

int cmd_fracture(const CommonFlags& f, std::ostream& out) {
  const auto t0 = clock_type::now();
  const json j = load_json(f.config, "config");
  auto in = load_predict_inputs(f, j);

  recon::SourceState src;
  src.m_origin = j.value("mass", 1.0);
  if (j.contains("velocity")) src.v_origin = vec3_of(j.at("velocity"), "velocity");
  src.validate();

  const auto vnorm = impulse::normalize_impulse(in.record.raw, in.record.i_max);
  const auto t_pred = clock_type::now();
  const auto field = train::predict(in.model, vnorm, in.seed);
  const double pred_s = seconds_since(t_pred);
  require_finite_field(field.field);

  const auto t_recon = clock_type::now();
  const auto mask = gssdf::extract_mask(field);
  const auto usdf = gssdf::extract_usdf(field);
  const auto basins = seg::watershed_segment(usdf, {});
  const auto kept = seg::filter_labels(basins, mask);
  std::vector<recon::FragmentBody> fragments;
  if (kept.num_regions > 0) fragments = recon::reconstruct_fragments(kept, src);
  const double recon_s = seconds_since(t_recon);

  const fs::path dir = resolve_out(f.out);
  fs::create_directories(dir);
  voxel::write_gsf((dir / "field.gsf").string(), field.field);
  voxel::write_gsf((dir / "labels.gsf").string(), kept);

  std::vector<std::string> outputs{"field.gsf", "labels.gsf", "bodies.json"};
  ordered_json bodies;
  bodies["mass_origin"] = src.m_origin;
  bodies["velocity_origin"] = {src.v_origin.x, src.v_origin.y, src.v_origin.z};
  bodies["fragments"] = ordered_json::array();
  for (size_t i = 0; i < fragments.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "fragment_%02zu.obj", i);
    recon::export_obj(fragments[i].mesh, (dir / name).string());
    outputs.emplace_back(name);
    ordered_json entry;
    entry["file"] = name;
    entry["mass"] = fragments[i].mass;
    entry["velocity"] = {fragments[i].velocity.x, fragments[i].velocity.y,
                         fragments[i].velocity.z};
    entry["voxel_count"] = fragments[i].voxel_count;
    entry["label"] = fragments[i].label;
    bodies["fragments"].push_back(std::move(entry));
  }
  {
    std::ofstream bj(dir / "bodies.json");
    if (!bj) throw MissingInputError("cannot open for write: " + (dir / "bodies.json").string());
    bj << bodies.dump(2) << "\n";
  }

  write_run_manifest(dir, "fracture", f.config, in.seed, outputs, pred_s, recon_s,
                     seconds_since(t0));
  out << fragments.size() << " fragments\n";
  return 0;
}

int cmd_run(const CommonFlags& f, std::ostream& out) {
  const auto t0 = clock_type::now();
  harness::SceneConfig scene = harness::load_scene_config(f.config);
  const json j = load_json(f.config, "config");
  if (f.seed) scene.seed = *f.seed;
  if (f.resolution) scene.resolution = *f.resolution;
  if (f.dz) scene.dz = *f.dz;
  scene.validate();

  const std::string target_rel = j.value("target", "");
  if (target_rel.empty()) throw ConfigError("config needs a 'target' mesh path: " + f.config);
  const std::string ckpt_rel = j.value("checkpoint", "");
  if (ckpt_rel.empty()) throw ConfigError("config needs a 'checkpoint' path: " + f.config);
  const int frames = j.value("frames", 100);
  if (frames < 1) throw ConfigError("frames must be positive: " + f.config);
  const double target_mass = j.value("target_mass", 1.0);

  const auto model = nn::load_checkpoint(resolve_near(ckpt_rel, f.config).string());
  const auto mesh = recon::import_obj(resolve_near(target_rel, f.config).string());
  const auto [normalized, xform] = voxel::normalize_shape(mesh);

  harness::World world;
  harness::RigidBody target = harness::make_breakable(normalized, target_mass, scene.resolution);
  target.dynamic = false;
  world.add_body(target);
  Rng rng(scene.seed);
  world.add_body(harness::sample_ball(rng, scene));

  const fs::path dir = resolve_out(f.out);
  fs::create_directories(dir);
  std::ofstream log(dir / "run_log.jsonl");
  if (!log) throw MissingInputError("cannot open for write: " + (dir / "run_log.jsonl").string());

  double pred_s = 0.0;
  double recon_s = 0.0;
  int fractures = 0;
  std::vector<harness::FractureArtifacts> artifacts;
  for (int fidx = 0; fidx < frames; ++fidx) {
    const auto rep = harness::runtime_step(world, model, scene, &artifacts);
    pred_s += rep.predict_seconds;
    recon_s += rep.recon_seconds;
    fractures += rep.fractures;
    const char* event = rep.fractures            ? "fracture"
                        : rep.fractures_skipped  ? "fracture_skipped"
                        : rep.contacts           ? "contact"
                                                 : "step";
    ordered_json line;
    line["frame"] = rep.frame;
    line["event"] = event;
    line["bodies"] = world.bodies.size();
    log << line.dump() << "\n";
  }
  log.close();

  std::vector<std::string> outputs{"run_log.jsonl", "fracture_events.json"};
  ordered_json events = ordered_json::array();
  for (const auto& a : artifacts) {
    char prefix[48];
    std::snprintf(prefix, sizeof(prefix), "fracture_f%04ld_b%llu", a.frame,
                  static_cast<unsigned long long>(a.body));
    const std::string field_name = std::string(prefix) + ".gsf";
    const std::string labels_name = std::string(prefix) + "_labels.gsf";
    voxel::write_gsf((dir / field_name).string(), a.field.field);
    voxel::write_gsf((dir / labels_name).string(), a.labels);
    outputs.push_back(field_name);
    outputs.push_back(labels_name);

    ordered_json ev;
    ev["frame"] = a.frame;
    ev["body"] = a.body;
    ev["field"] = field_name;
    ev["labels"] = labels_name;
    ev["fragments"] = ordered_json::array();
    for (size_t i = 0; i < a.fragments.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_frag%02zu.obj", prefix, i);
      recon::export_obj(a.fragments[i].mesh, (dir / name).string());
      outputs.emplace_back(name);
      ordered_json entry;
      entry["file"] = name;
      entry["mass"] = a.fragments[i].mass;
      entry["velocity"] = {a.fragments[i].velocity.x, a.fragments[i].velocity.y,
                           a.fragments[i].velocity.z};
      entry["voxel_count"] = a.fragments[i].voxel_count;
      entry["label"] = a.fragments[i].label;
      ev["fragments"].push_back(std::move(entry));
    }
    events.push_back(std::move(ev));
  }
  {
    std::ofstream ej(dir / "fracture_events.json");
    if (!ej)
      throw MissingInputError("cannot open for write: " + (dir / "fracture_events.json").string());
    ej << events.dump(2) << "\n";
  }

  write_run_manifest(dir, "run", f.config, scene.seed, outputs, pred_s, recon_s,
                     seconds_since(t0));
  out << frames << " frames, " << fractures << " fractures, "
      << world.bodies.size() << " bodies\n";
  return 0;
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  const auto kind = voxel::peek_gsf_kind(path);
  switch (kind) {
    case voxel::GsfKind::Scalar: {
      const auto f = voxel::read_gsf_scalar(path);
      float lo = f.values.empty() ? 0.0f : f.values.front();
      float hi = lo;
      size_t neg = 0, zero = 0, pos = 0;
      for (const float v : f.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        if (v < 0.0f)
          ++neg;
        else if (v > 0.0f)
          ++pos;
        else
          ++zero;
      }
      out << "kind: scalar\n"
          << "resolution: " << f.meta.resolution << "\n"
          << "min: " << lo << "\n"
          << "max: " << hi << "\n"
          << "sign histogram: neg " << neg << " zero " << zero << " pos " << pos << "\n";
      break;
    }
    case voxel::GsfKind::Labels: {
      const auto g = voxel::read_gsf_labels(path);
      uint32_t lo = g.labels.empty() ? 0 : g.labels.front();
      uint32_t hi = lo;
      size_t zero = 0, pos = 0;
      std::set<uint32_t> distinct;
      for (const uint32_t l : g.labels) {
        lo = std::min(lo, l);
        hi = std::max(hi, l);
        if (l) {
          ++pos;
          distinct.insert(l);
        } else {
          ++zero;
        }
      }
      out << "kind: labels\n"
          << "resolution: " << g.meta.resolution << "\n"
          << "min: " << lo << "\n"
          << "max: " << hi << "\n"
          << "sign histogram: neg 0 zero " << zero << " pos " << pos << "\n"
          << "regions: " << distinct.size() << "\n";
      break;
    }
    case voxel::GsfKind::Occupancy: {
      const auto o = voxel::read_gsf_occupancy(path);
      size_t zero = 0, pos = 0;
      for (const uint8_t b : o.bits) (b ? pos : zero)++;
      out << "kind: occupancy\n"
          << "resolution: " << o.meta.resolution << "\n"
          << "min: " << (zero ? 0 : 1) << "\n"
          << "max: " << (pos ? 1 : 0) << "\n"
          << "sign histogram: neg 0 zero " << zero << " pos " << pos << "\n";
      break;
    }
  }
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"brittle fracture pipeline: impulse-conditioned fields, segmentation, fragments"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string inspect_path;

  const auto add_common = [&flags](CLI::App* cmd) {
    cmd->add_option("--config", flags.config, "JSON config for this run")->required();
    cmd->add_option("--seed", flags.seed, "RNG seed, overrides the config");
    cmd->add_option("--out", flags.out, "output directory, under FRACTURE_OUT if that is set");
    cmd->add_option("--resolution", flags.resolution, "voxel grid resolution");
    cmd->add_option("--dz", flags.dz, "normal code width")->check(CLI::IsMember({4, 8, 32}));
    cmd->add_option("--stages", flags.stages, "stride-2 generator stages")
        ->check(CLI::IsMember({3, 5}));
  };

  auto* gen = app.add_subcommand("gen-data", "shoot balls at a mesh and write training pairs");
  add_common(gen);
  auto* tr = app.add_subcommand("train", "fit the generator on a dataset");
  add_common(tr);
  auto* pr = app.add_subcommand("predict", "decode a fracture field from an impulse record");
  add_common(pr);
  auto* fx = app.add_subcommand("fracture", "predict, segment, and mesh the fragments");
  add_common(fx);
  auto* rn = app.add_subcommand("run", "simulate a scene end to end with fracture replacement");
  add_common(rn);
  auto* insp = app.add_subcommand("inspect", "describe a .gsf field file");
  insp->add_option("file", inspect_path, "GSF1 file to describe")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(flags, out);
    if (tr->parsed()) return cmd_train(flags, out);
    if (pr->parsed()) return cmd_predict(flags, out);
    if (fx->parsed()) return cmd_fracture(flags, out);
    if (rn->parsed()) return cmd_run(flags, out);
    if (insp->parsed()) return cmd_inspect(inspect_path, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const MissingInputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  err << "error: no command selected\n";
  return 1;
}

}  // namespace fracgen::cli
