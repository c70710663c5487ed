#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fracgen/core/error.hpp"
#include "fracgen/train/trainer.hpp"
#include "fracgen/voxel/gsf_io.hpp"

namespace fracgen::train {

namespace fs = std::filesystem;

Dataset load_dataset(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw MissingInputError("no such dataset manifest: " + manifest_path);

  Dataset ds;
  try {
    nlohmann::json j;
    in >> j;
    ds.meta.resolution = j.at("meta").at("resolution").get<int>();
    ds.i_max = j.at("i_max").get<double>();
    const fs::path dir = fs::path(manifest_path).parent_path();
    for (const auto& p : j.at("pairs")) {
      DatasetPair pair;
      const auto& imp = p.at("impulse");
      if (imp.size() != 7) throw ConfigError("impulse entry must have 7 components");
      for (size_t i = 0; i < 7; ++i) pair.vnorm.v[i] = imp.at(i).get<double>();

      fs::path field_path = p.at("field").get<std::string>();
      if (field_path.is_relative()) field_path = dir / field_path;
      pair.field.field = voxel::read_gsf_scalar(field_path.string());
      if (pair.field.field.meta.resolution != ds.meta.resolution)
        throw ConfigError("field resolution differs from manifest meta: " + field_path.string());

      for (const auto& z : p.at("zcode")) pair.zcode.push_back(z.get<float>());
      if (pair.zcode.empty()) throw ConfigError("zcode must be non-empty");
      if (!ds.pairs.empty() && pair.zcode.size() != ds.pairs.front().zcode.size())
        throw ConfigError("zcode sizes differ between pairs");
      ds.pairs.push_back(std::move(pair));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed dataset manifest " + manifest_path + ": " + e.what());
  }
  if (ds.pairs.empty()) throw ConfigError("dataset has no pairs: " + manifest_path);
  return ds;
}

void save_dataset(const std::string& manifest_path, const Dataset& dataset) {
  const fs::path dir = fs::path(manifest_path).parent_path();
  if (!dir.empty()) fs::create_directories(dir);

  nlohmann::ordered_json j;
  j["meta"] = {{"resolution", dataset.meta.resolution}};
  j["i_max"] = dataset.i_max;
  j["pairs"] = nlohmann::ordered_json::array();
  for (size_t i = 0; i < dataset.pairs.size(); ++i) {
    const DatasetPair& pair = dataset.pairs[i];
    char name[32];
    std::snprintf(name, sizeof(name), "pair_%04zu.gsf", i);
    voxel::write_gsf((dir / name).string(), pair.field.field);

    nlohmann::ordered_json entry;
    entry["impulse"] = pair.vnorm.v;
    entry["field"] = name;
    entry["zcode"] = pair.zcode;
    j["pairs"].push_back(std::move(entry));
  }

  std::ofstream out(manifest_path);
  if (!out) throw MissingInputError("cannot open for write: " + manifest_path);
  out << j.dump(2) << "\n";
}

}  // namespace fracgen::train
