#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fracgen/core/rng.hpp"
#include "fracgen/nn/tensor.hpp"

namespace fracgen::nn {

/// Network geometry. `stages` counts the stride-2 levels, so the output grid
/// is 4 * 2^stages; the remaining of the five stages run at stride 1.
struct ModelConfig {
  int resolution = 32;
  int stages = 3;
  int c0 = 64;
  int dz = 8;
  double omega0 = 30.0;

  int cond_dim() const { return 128 + dz; }
  void validate() const;
};

/// The three networks of the pipeline: a sine position encoder for the
/// 7-dim impulse, a condition-to-voxel generator, and a field critic.
class FractureModel {
 public:
  /// Random init: encoder uniform in [-1/7, 1/7], conv and dense weights
  /// fan-in scaled normals, biases zero.
  FractureModel(const ModelConfig& cfg, Rng& rng);
  /// Zero init, for checkpoint loading.
  explicit FractureModel(const ModelConfig& cfg);

  Tensor<float> encode(const Tensor<float>& vnorm) const;     // [1,7] -> [1,128]
  Tensor<float> generate(const Tensor<float>& cond) const;    // [1,128+dz] -> [1,1,R,R,R]
  Tensor<float> criticize(const Tensor<float>& field) const;  // [1,1,R,R,R] -> [1,1]

  std::vector<Tensor<float>> encoder_params() const;
  std::vector<Tensor<float>> generator_params() const;  // projection + stages
  std::vector<Tensor<float>> critic_params() const;
  std::vector<std::pair<std::string, Tensor<float>>> named_params() const;

  const ModelConfig& config() const { return cfg_; }

 private:
  struct Stage {
    Tensor<float> w, b;
    int stride = 2;
    int pad = 1;
  };

  void build();

  ModelConfig cfg_;
  Tensor<float> enc_w_, enc_b_;
  Tensor<float> proj_w_, proj_b_;
  std::vector<Stage> gen_stages_;
  std::vector<Stage> crit_stages_;
  Tensor<float> crit_out_w_, crit_out_b_;
};

/// Extra tensors (e.g. trained per-sample codes) ride along in the same
/// container under their own names.
using ExtraTensors = std::vector<std::pair<std::string, std::vector<float>>>;

void save_checkpoint(const std::string& path, const FractureModel& model,
                     const ExtraTensors& extras = {});
FractureModel load_checkpoint(const std::string& path);
FractureModel load_checkpoint(const std::string& path, ExtraTensors& extras_out);

}  // namespace fracgen::nn
