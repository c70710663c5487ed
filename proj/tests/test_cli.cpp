#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracgen/cli/cli.hpp"
#include "fracgen/gssdf/gssdf.hpp"
#include "fracgen/recon/reconstruct.hpp"
#include "fracgen/voxel/gsf_io.hpp"
#include "fracgen/voxel/mesh.hpp"
#include "fracgen/voxel/voxelize.hpp"

using namespace fracgen;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int code = 0;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"fracgen"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  RunResult r;
  r.code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p);
  REQUIRE(out.good());
  out << text;
}

// workspace with a target mesh, a generated dataset, and a trained checkpoint
struct Workspace {
  fs::path root;
  fs::path target_obj;
  fs::path gen_config;
  fs::path dataset_dir;
  fs::path train_config;
  fs::path model_dir;
  fs::path impulse_record;
  fs::path predict_config;
};

const Workspace& workspace() {
  static const Workspace ws = [] {
    Workspace w;
    w.root = fs::temp_directory_path() / "fracgen_cli_test";
    fs::remove_all(w.root);
    fs::create_directories(w.root);

    w.target_obj = w.root / "target.obj";
    recon::export_obj(voxel::make_icosphere(0.8, 2), w.target_obj.string());

    w.gen_config = w.root / "gen.json";
    write_text(w.gen_config,
               R"({"target": "target.obj", "samples": 2, "resolution": 16, "dz": 4, "seed": 9})");
    w.dataset_dir = w.root / "ds";
    REQUIRE(run_cli({"gen-data", "--config", w.gen_config.string(), "--out",
                     w.dataset_dir.string()})
                .code == 0);

    // a loose clip keeps the adversarial sweep from flattening the tiny model
    w.train_config = w.root / "train.json";
    write_text(w.train_config, R"({"dataset": "ds/dataset.json", "epochs": 100, "c0": 16,
                                   "lr_model": 2e-3, "lr_z": 1e-2, "clip_c": 0.05, "seed": 5})");
    w.model_dir = w.root / "model";
    REQUIRE(run_cli({"train", "--config", w.train_config.string(), "--out",
                     w.model_dir.string()})
                .code == 0);

    w.impulse_record = w.root / "impulse.json";
    write_text(w.impulse_record, R"({"p": [0.8, 0, 0], "d": [-1, 0, 0], "I": 60.0, "i_max": 100.0})");
    w.predict_config = w.root / "predict.json";
    write_text(w.predict_config,
               R"({"checkpoint": "model/model.gck", "impulse": "impulse.json", "seed": 7})");
    return w;
  }();
  return ws;
}

void check_timing_sum(const fs::path& manifest_path) {
  const json m = json::parse(read_bytes(manifest_path));
  const auto& t = m.at("timings");
  const double total = t.at("runtime_seconds").get<double>();
  const double parts = t.at("pred_seconds").get<double>() + t.at("recon_seconds").get<double>() +
                       t.at("others_seconds").get<double>();
  CHECK(std::abs(parts - total) <= 0.05 * total + 1e-12);
}

}  // namespace

TEST_CASE("help documents every flag and command") {
  const auto r = run_cli({"--help"});
  CHECK(r.code == 0);
  for (const char* needle : {"--config", "--seed", "--out", "--resolution", "--dz", "--stages",
                             "gen-data", "train", "predict", "fracture", "run", "inspect"})
    CHECK(r.out.find(needle) != std::string::npos);
}

TEST_CASE("bad invocations are usage errors") {
  CHECK(run_cli({"explode"}).code == 1);
  CHECK(run_cli({"predict"}).code == 1);                                  // --config required
  CHECK(run_cli({"predict", "--config", "x.json", "--dz", "5"}).code == 1);
  CHECK(run_cli({"train", "--config", "x.json", "--stages", "2"}).code == 1);
}

TEST_CASE("gen-data writes the dataset plus a run manifest") {
  const auto& ws = workspace();
  CHECK(fs::exists(ws.dataset_dir / "dataset.json"));
  CHECK(fs::exists(ws.dataset_dir / "pair_0000.gsf"));
  CHECK(fs::exists(ws.dataset_dir / "pair_0001.gsf"));

  const json m = json::parse(read_bytes(ws.dataset_dir / "run_manifest.json"));
  CHECK(m.at("command") == "gen-data");
  CHECK(m.at("seed") == 9);
  for (const auto& name : m.at("outputs")) CHECK(fs::exists(ws.dataset_dir / name.get<std::string>()));
  check_timing_sum(ws.dataset_dir / "run_manifest.json");
}

TEST_CASE("gen-data is byte-deterministic for a fixed seed") {
  const auto& ws = workspace();
  const fs::path again = ws.root / "ds_again";
  REQUIRE(run_cli({"gen-data", "--config", ws.gen_config.string(), "--out", again.string()})
              .code == 0);
  for (const char* name : {"dataset.json", "pair_0000.gsf", "pair_0001.gsf"})
    CHECK(read_bytes(ws.dataset_dir / name) == read_bytes(again / name));
}

TEST_CASE("train writes a checkpoint and metrics") {
  const auto& ws = workspace();
  CHECK(fs::exists(ws.model_dir / "model.gck"));
  CHECK(fs::exists(ws.model_dir / "model.gck.json"));
  CHECK(!read_bytes(ws.model_dir / "metrics.csv").empty());
  const json m = json::parse(read_bytes(ws.model_dir / "run_manifest.json"));
  CHECK(m.at("command") == "train");
}

TEST_CASE("train rejects flags that contradict the dataset") {
  const auto& ws = workspace();
  const fs::path scratch = ws.root / "train_mismatch";
  CHECK(run_cli({"train", "--config", ws.train_config.string(), "--out", scratch.string(),
                 "--stages", "3"})
            .code == 1);
  CHECK(run_cli({"train", "--config", ws.train_config.string(), "--out", scratch.string(),
                 "--dz", "8"})
            .code == 1);
  CHECK(run_cli({"train", "--config", ws.train_config.string(), "--out", scratch.string(),
                 "--resolution", "32"})
            .code == 1);
}

TEST_CASE("predict decodes a deterministic field") {
  const auto& ws = workspace();
  const fs::path a = ws.root / "pred_a";
  const fs::path b = ws.root / "pred_b";
  REQUIRE(run_cli({"predict", "--config", ws.predict_config.string(), "--out", a.string()})
              .code == 0);
  REQUIRE(run_cli({"predict", "--config", ws.predict_config.string(), "--out", b.string()})
              .code == 0);
  CHECK(voxel::peek_gsf_kind((a / "predicted.gsf").string()) == voxel::GsfKind::Scalar);
  CHECK(voxel::read_gsf_scalar((a / "predicted.gsf").string()).meta.resolution == 16);
  CHECK(read_bytes(a / "predicted.gsf") == read_bytes(b / "predicted.gsf"));
  check_timing_sum(a / "run_manifest.json");

  // a different seed flag changes the code draw, hence the bytes
  const fs::path c = ws.root / "pred_c";
  REQUIRE(run_cli({"predict", "--config", ws.predict_config.string(), "--out", c.string(),
                   "--seed", "8"})
              .code == 0);
  const json m = json::parse(read_bytes(c / "run_manifest.json"));
  CHECK(m.at("seed") == 8);
}

TEST_CASE("missing inputs exit 2 and write nothing") {
  const auto& ws = workspace();
  const fs::path cfg = ws.root / "missing_ckpt.json";
  write_text(cfg, R"({"checkpoint": "nowhere/model.gck", "impulse": "impulse.json"})");
  const fs::path out_dir = ws.root / "missing_out";
  const auto r = run_cli({"predict", "--config", cfg.string(), "--out", out_dir.string()});
  CHECK(r.code == 2);
  CHECK(!r.err.empty());
  CHECK(!fs::exists(out_dir / "predicted.gsf"));
  CHECK(!fs::exists(out_dir / "run_manifest.json"));

  CHECK(run_cli({"train", "--config", (ws.root / "absent.json").string()}).code == 2);
}

TEST_CASE("malformed configs exit 1 with a message") {
  const auto& ws = workspace();
  const fs::path bad = ws.root / "bad.json";
  write_text(bad, "{nope");
  const auto r = run_cli({"predict", "--config", bad.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("malformed") != std::string::npos);
}

TEST_CASE("fracture emits fragment meshes and a body manifest") {
  const auto& ws = workspace();
  const fs::path cfg = ws.root / "fracture.json";
  write_text(cfg, R"({"checkpoint": "model/model.gck", "impulse": "impulse.json",
                      "seed": 7, "mass": 4.0, "velocity": [1, 0, 0]})");
  const fs::path a = ws.root / "frac_a";
  REQUIRE(run_cli({"fracture", "--config", cfg.string(), "--out", a.string()}).code == 0);
  CHECK(fs::exists(a / "field.gsf"));
  CHECK(fs::exists(a / "labels.gsf"));

  const json bodies = json::parse(read_bytes(a / "bodies.json"));
  CHECK(bodies.at("mass_origin") == 4.0);
  REQUIRE(bodies.at("fragments").size() >= 1);
  double mass = 0.0;
  for (const auto& frag : bodies.at("fragments")) {
    CHECK(fs::exists(a / frag.at("file").get<std::string>()));
    mass += frag.at("mass").get<double>();
    const auto mesh = recon::import_obj((a / frag.at("file").get<std::string>()).string());
    CHECK(voxel::is_watertight(mesh));
  }
  CHECK(mass == doctest::Approx(4.0).epsilon(1e-9));
  check_timing_sum(a / "run_manifest.json");

  const fs::path b = ws.root / "frac_b";
  REQUIRE(run_cli({"fracture", "--config", cfg.string(), "--out", b.string()}).code == 0);
  CHECK(read_bytes(a / "field.gsf") == read_bytes(b / "field.gsf"));
  CHECK(read_bytes(a / "labels.gsf") == read_bytes(b / "labels.gsf"));
  CHECK(read_bytes(a / "bodies.json") == read_bytes(b / "bodies.json"));
}

TEST_CASE("run archives a deterministic simulation") {
  const auto& ws = workspace();
  const fs::path cfg = ws.root / "run.json";
  write_text(cfg, R"({"target": "target.obj", "checkpoint": "model/model.gck",
                      "frames": 150, "resolution": 16, "dz": 4, "seed": 42,
                      "target_mass": 4.0})");
  const fs::path a = ws.root / "run_a";
  const fs::path b = ws.root / "run_b";
  REQUIRE(run_cli({"run", "--config", cfg.string(), "--out", a.string()}).code == 0);
  REQUIRE(run_cli({"run", "--config", cfg.string(), "--out", b.string()}).code == 0);

  // the log is one record per frame
  std::istringstream log(read_bytes(a / "run_log.jsonl"));
  std::string line;
  int frames = 0;
  int fracture_lines = 0;
  while (std::getline(log, line)) {
    const json rec = json::parse(line);
    CHECK(rec.at("frame") == frames);
    CHECK(rec.at("bodies").get<int>() >= 1);
    if (rec.at("event") == "fracture") ++fracture_lines;
    ++frames;
  }
  CHECK(frames == 150);

  // the impact speed is far above the trigger, so the target must react
  const json events = json::parse(read_bytes(a / "fracture_events.json"));
  REQUIRE(events.size() >= 1);
  for (const auto& ev : events) {
    CHECK(fs::exists(a / ev.at("field").get<std::string>()));
    CHECK(fs::exists(a / ev.at("labels").get<std::string>()));
    if (ev.at("fragments").empty()) continue;
    double mass = 0.0;
    for (const auto& frag : ev.at("fragments")) {
      CHECK(fs::exists(a / frag.at("file").get<std::string>()));
      mass += frag.at("mass").get<double>();
      // the run target is frozen, fragments inherit its rest state
      CHECK(frag.at("velocity") == json::array({0.0, 0.0, 0.0}));
    }
    CHECK(mass == doctest::Approx(4.0).epsilon(1e-9));
  }
  CHECK(fracture_lines == static_cast<int>(events.size()) -
                              [&] {
                                int skips = 0;
                                for (const auto& ev : events)
                                  if (ev.at("fragments").empty()) ++skips;
                                return skips;
                              }());

  // byte-identical data outputs; manifests identical once timings are dropped
  for (const auto& entry : fs::directory_iterator(a)) {
    const std::string name = entry.path().filename().string();
    if (name == "run_manifest.json") continue;
    CHECK(read_bytes(a / name) == read_bytes(b / name));
  }
  json ma = json::parse(read_bytes(a / "run_manifest.json"));
  json mb = json::parse(read_bytes(b / "run_manifest.json"));
  ma.erase("timings");
  mb.erase("timings");
  CHECK(ma == mb);
  check_timing_sum(a / "run_manifest.json");
}

TEST_CASE("inspect reports field structure") {
  const auto& ws = workspace();
  voxel::GridMeta meta;
  meta.resolution = 16;
  const auto occ = voxel::voxelize(voxel::make_icosphere(0.8, 2), meta);
  voxel::LabelGrid labels(meta);
  labels.num_regions = 3;
  for (int z = 0; z < 16; ++z)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        if (occ.at(x, y, z)) labels.at(x, y, z) = x < 6 ? 1 : (x < 10 ? 2 : 3);
  const auto field = gssdf::encode_gssdf(labels);

  const fs::path fpath = ws.root / "inspect_field.gsf";
  voxel::write_gsf(fpath.string(), field.field);
  auto r = run_cli({"inspect", fpath.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("kind: scalar") != std::string::npos);
  CHECK(r.out.find("resolution: 16") != std::string::npos);
  CHECK(r.out.find("min: -") != std::string::npos);  // negative outside, positive inside
  CHECK(r.out.find("regions") == std::string::npos);

  const fs::path lpath = ws.root / "inspect_labels.gsf";
  voxel::write_gsf(lpath.string(), labels);
  r = run_cli({"inspect", lpath.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("kind: labels") != std::string::npos);
  CHECK(r.out.find("regions: 3") != std::string::npos);

  const fs::path opath = ws.root / "inspect_occ.gsf";
  voxel::write_gsf(opath.string(), occ);
  r = run_cli({"inspect", opath.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("kind: occupancy") != std::string::npos);
}

TEST_CASE("inspect rejects corrupt files") {
  const auto& ws = workspace();
  const fs::path junk = ws.root / "junk.gsf";
  write_text(junk, "XXXXnot a field at all");
  auto r = run_cli({"inspect", junk.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("bad magic") != std::string::npos);

  const fs::path cut = ws.root / "cut.gsf";
  {
    voxel::GridMeta meta;
    meta.resolution = 16;
    voxel::write_gsf(cut.string(), voxel::ScalarField(meta, 1.0f));
    const auto bytes = read_bytes(cut);
    std::ofstream out(cut, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  r = run_cli({"inspect", cut.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("corrupt payload") != std::string::npos);

  CHECK(run_cli({"inspect", (ws.root / "absent.gsf").string()}).code == 2);
}

TEST_CASE("non-finite checkpoints abort with the numeric exit code") {
  const auto& ws = workspace();
  const fs::path bad_ckpt = ws.root / "nan_model.gck";
  fs::copy_file(ws.model_dir / "model.gck", bad_ckpt, fs::copy_options::overwrite_existing);
  fs::copy_file(ws.model_dir / "model.gck.json", ws.root / "nan_model.gck.json",
                fs::copy_options::overwrite_existing);
  {
    // poison the final generator bias; every voxel passes through it right
    // before the tanh head, so one NaN floods the whole predicted field
    std::fstream f(bad_ckpt, std::ios::binary | std::ios::in | std::ios::out);
    REQUIRE(f.good());
    f.seekg(4);
    uint32_t count = 0;
    f.read(reinterpret_cast<char*>(&count), sizeof(count));
    std::streamoff target_off = -1;
    for (uint32_t t = 0; t < count; ++t) {
      uint16_t name_len = 0;
      f.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
      std::string name(name_len, '\0');
      f.read(name.data(), name_len);
      uint8_t rank = 0;
      f.read(reinterpret_cast<char*>(&rank), sizeof(rank));
      size_t elems = 1;
      for (uint8_t d = 0; d < rank; ++d) {
        uint32_t dim = 0;
        f.read(reinterpret_cast<char*>(&dim), sizeof(dim));
        elems *= dim;
      }
      if (name.rfind("gen.s", 0) == 0 && name.size() > 2 &&
          name.compare(name.size() - 2, 2, ".b") == 0)
        target_off = f.tellg();  // keep the deepest stage bias
      f.seekg(static_cast<std::streamoff>(elems * sizeof(float)), std::ios::cur);
    }
    REQUIRE(target_off >= 0);
    f.clear();
    f.seekp(target_off);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    f.write(reinterpret_cast<const char*>(&nan), sizeof(nan));
  }
  const fs::path cfg = ws.root / "nan_predict.json";
  write_text(cfg, R"({"checkpoint": "nan_model.gck", "impulse": "impulse.json"})");
  const auto r = run_cli({"predict", "--config", cfg.string(), "--out",
                          (ws.root / "nan_out").string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("non-finite") != std::string::npos);
}

TEST_CASE("FRACTURE_OUT provides the output root") {
  const auto& ws = workspace();
  const fs::path env_root = ws.root / "env_root";
  setenv("FRACTURE_OUT", env_root.string().c_str(), 1);
  const auto r = run_cli({"predict", "--config", ws.predict_config.string(), "--out", "sub"});
  unsetenv("FRACTURE_OUT");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(env_root / "sub" / "predicted.gsf"));
  CHECK(fs::exists(env_root / "sub" / "run_manifest.json"));
}
