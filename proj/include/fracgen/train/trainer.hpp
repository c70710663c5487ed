#pragma once

#include <string>
#include <vector>

#include "fracgen/gssdf/gssdf.hpp"
#include "fracgen/impulse/impulse.hpp"
#include "fracgen/nn/model.hpp"
#include "fracgen/nn/optim.hpp"

namespace fracgen::train {

/// One training sample: normalized impulse condition, its fracture field,
/// and the per-sample latent code refined during the L2 phase.
struct DatasetPair {
  impulse::ImpulseNorm vnorm;
  gssdf::GssdfField field;
  std::vector<float> zcode;
};

struct Dataset {
  voxel::GridMeta meta;
  double i_max = 100.0;
  std::vector<DatasetPair> pairs;
};

/// Manifest JSON next to the .gsf field files; relative paths resolve
/// against the manifest's directory.
Dataset load_dataset(const std::string& manifest_path);
void save_dataset(const std::string& manifest_path, const Dataset& dataset);

struct TrainConfig {
  int epochs = 1000;
  int batch_size = 1;
  float lr_model = 1e-4f;
  float lr_z = 1e-3f;
  float clip_c = 0.01f;
  int n_critic = 5;
  uint64_t seed = 0;
  std::string metrics_path;  // per-epoch CSV when non-empty

  void validate() const;
};

struct EpochMetrics {
  double l2_loss = 0.0;
  double critic_loss = 0.0;
  double gen_loss = 0.0;
};

/// Two-phase training: an L2 conditional-autodecoder sweep refining the
/// generator, the sine encoder, and the per-sample codes; then an
/// adversarial sweep with weight clipping and closest-sample conditioning.
class Trainer {
 public:
  Trainer(nn::FractureModel model, Dataset dataset, TrainConfig cfg);

  /// One reconstruction step on sample i; returns the mean squared voxel
  /// loss. Updates generator, encoder, and that sample's code.
  float l2_step(size_t index);

  /// Reconstruction loss of sample i with the current weights; no updates.
  float l2_eval(size_t index) const;

  /// Index of the stored pair whose (latent, code) concatenation is nearest
  /// to the query; ties take the lowest index.
  size_t closest_sample(const std::vector<float>& query_latent,
                        const std::vector<float>& query_z) const;

  /// One adversarial iteration: n_critic critic updates with clipping on a
  /// (fake, closest real) pair, then one generator update. The condition's
  /// latent is locked, so the encoder never moves here. Returns
  /// (critic_loss, gen_loss).
  std::pair<float, float> wgan_step(Rng& rng);

  /// Full schedule: per epoch one L2 sweep then one adversarial sweep.
  std::vector<EpochMetrics> train();

  void save(const std::string& checkpoint_path) const;

  const nn::FractureModel& model() const { return model_; }
  const Dataset& dataset() const { return dataset_; }
  /// Current value of a sample's trained code.
  std::vector<float> zcode(size_t index) const;

 private:
  nn::Tensor<float> target_tensor(size_t index) const;
  std::vector<float> latent_of(size_t index) const;

  nn::FractureModel model_;
  Dataset dataset_;
  TrainConfig cfg_;
  std::vector<nn::Tensor<float>> zcodes_;
  nn::Adam<float> opt_gen_;
  nn::Adam<float> opt_enc_;
  nn::Adam<float> opt_critic_;
  std::vector<nn::Adam<float>> opt_z_;
  Rng rng_;
  size_t l2_steps_done_ = 0;
};

/// Inference: encode the impulse, draw a fresh normal code from the seed,
/// and decode. Field values are the generator's, in [-1,1].
gssdf::GssdfField predict(const nn::FractureModel& model, const impulse::ImpulseNorm& vnorm,
                          uint64_t seed);

/// Same, but with a caller-supplied code (e.g. a trained per-sample code).
gssdf::GssdfField predict_with_code(const nn::FractureModel& model,
                                    const impulse::ImpulseNorm& vnorm,
                                    const std::vector<float>& zcode);

}  // namespace fracgen::train
