#include "fracgen/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fracgen/core/error.hpp"
#include "fracgen/nn/ops.hpp"

namespace fracgen::train {

using nn::Tensor;

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size != 1) throw ConfigError("only batch size 1 is supported");
  if (lr_model <= 0 || lr_z <= 0) throw ConfigError("learning rates must be positive");
  if (clip_c <= 0) throw ConfigError("clip bound must be positive");
  if (n_critic < 1) throw ConfigError("n_critic must be at least 1");
}

namespace {

Tensor<float> vnorm_tensor(const impulse::ImpulseNorm& v) {
  return Tensor<float>::from({1, 7}, std::vector<float>(v.v.begin(), v.v.end()));
}

void require_finite(float x, const char* what) {
  if (!std::isfinite(x)) throw NumericError(std::string(what) + " became non-finite");
}

}  // namespace

Trainer::Trainer(nn::FractureModel model, Dataset dataset, TrainConfig cfg)
    : model_(std::move(model)),
      dataset_(std::move(dataset)),
      cfg_(cfg),
      opt_gen_(model_.generator_params(), cfg.lr_model),
      opt_enc_(model_.encoder_params(), cfg.lr_model),
      opt_critic_(model_.critic_params(), cfg.lr_model),
      rng_(cfg.seed) {
  cfg_.validate();
  if (dataset_.pairs.empty()) throw ConfigError("dataset has no pairs");
  const int r = model_.config().resolution;
  if (dataset_.meta.resolution != r)
    throw ConfigError("dataset resolution does not match model config");
  const size_t dz = static_cast<size_t>(model_.config().dz);
  for (size_t i = 0; i < dataset_.pairs.size(); ++i) {
    const auto& code = dataset_.pairs[i].zcode;
    if (code.size() != dz) throw ConfigError("zcode size does not match model dz");
    zcodes_.push_back(Tensor<float>::from({1, static_cast<int>(dz)}, code, true));
    opt_z_.emplace_back(std::vector<Tensor<float>>{zcodes_.back()}, cfg_.lr_z);
  }
}

Tensor<float> Trainer::target_tensor(size_t index) const {
  const auto& field = dataset_.pairs[index].field.field;
  const int r = field.meta.resolution;
  std::vector<float> v(field.values.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(field.values[i], -1.0f, 1.0f);
  return Tensor<float>::from({1, 1, r, r, r}, std::move(v));
}

float Trainer::l2_step(size_t index) {
  if (index >= dataset_.pairs.size()) throw ConfigError("sample index out of range");

  opt_gen_.zero_grad();
  opt_enc_.zero_grad();
  opt_z_[index].zero_grad();

  Tensor<float> enc = model_.encode(vnorm_tensor(dataset_.pairs[index].vnorm));
  Tensor<float> cond = nn::concat(enc, zcodes_[index]);
  Tensor<float> out = model_.generate(cond);
  Tensor<float> loss = nn::mse(out, target_tensor(index));
  const float value = loss.item();
  require_finite(value, "reconstruction loss");

  nn::backward(loss);
  opt_gen_.step();
  opt_enc_.step();
  opt_z_[index].step();
  ++l2_steps_done_;
  return value;
}

float Trainer::l2_eval(size_t index) const {
  if (index >= dataset_.pairs.size()) throw ConfigError("sample index out of range");
  Tensor<float> enc = model_.encode(vnorm_tensor(dataset_.pairs[index].vnorm));
  Tensor<float> out = model_.generate(nn::concat(enc, zcodes_[index]));
  const float value = nn::mse(out, target_tensor(index)).item();
  require_finite(value, "reconstruction loss");
  return value;
}

std::vector<float> Trainer::latent_of(size_t index) const {
  Tensor<float> enc = model_.encode(vnorm_tensor(dataset_.pairs[index].vnorm));
  return enc.values();
}

size_t Trainer::closest_sample(const std::vector<float>& query_latent,
                               const std::vector<float>& query_z) const {
  if (dataset_.pairs.empty()) throw ConfigError("dataset has no pairs");
  size_t best = 0;
  double best_d2 = 1e300;
  for (size_t i = 0; i < dataset_.pairs.size(); ++i) {
    const auto latent = latent_of(i);
    const auto& code = zcodes_[i].values();
    double d2 = 0.0;
    for (size_t k = 0; k < latent.size(); ++k) {
      const double d = latent[k] - query_latent[k];
      d2 += d * d;
    }
    for (size_t k = 0; k < code.size(); ++k) {
      const double d = code[k] - query_z[k];
      d2 += d * d;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

std::pair<float, float> Trainer::wgan_step(Rng& rng) {
  if (l2_steps_done_ == 0)
    throw ConfigError("adversarial steps require at least one completed reconstruction step");

  const size_t idx = rng.uniform_index(dataset_.pairs.size());
  Tensor<float> latent =
      model_.encode(vnorm_tensor(dataset_.pairs[idx].vnorm)).detach();  // locked

  const int dz = model_.config().dz;
  std::vector<float> zr(dz);
  for (auto& z : zr) z = static_cast<float>(rng.normal());
  Tensor<float> z_random = Tensor<float>::from({1, dz}, zr);

  Tensor<float> cond = nn::concat(latent, z_random);
  Tensor<float> fake_frozen = model_.generate(cond).detach();

  const size_t real_idx = closest_sample(latent.values(), zr);
  Tensor<float> real = target_tensor(real_idx);

  auto critic_params = model_.critic_params();
  float critic_loss = 0.0f;
  for (int t = 0; t < cfg_.n_critic; ++t) {
    opt_critic_.zero_grad();
    Tensor<float> loss =
        nn::mean(nn::sub(model_.criticize(fake_frozen), model_.criticize(real)));
    critic_loss = loss.item();
    require_finite(critic_loss, "critic loss");
    nn::backward(loss);
    opt_critic_.step();
    nn::clip_weights(critic_params, cfg_.clip_c);
  }

  opt_gen_.zero_grad();
  opt_critic_.zero_grad();  // generator loss also reaches the critic graph
  Tensor<float> gen_loss_t = nn::scale(nn::mean(model_.criticize(model_.generate(cond))), -1.0f);
  const float gen_loss = gen_loss_t.item();
  require_finite(gen_loss, "generator loss");
  nn::backward(gen_loss_t);
  opt_gen_.step();

  return {critic_loss, gen_loss};
}

std::vector<EpochMetrics> Trainer::train() {
  std::ofstream metrics;
  if (!cfg_.metrics_path.empty()) {
    metrics.open(cfg_.metrics_path);
    if (!metrics) throw MissingInputError("cannot open for write: " + cfg_.metrics_path);
    metrics << "epoch,l2_loss,critic_loss,gen_loss\n";
  }

  std::vector<EpochMetrics> history;
  const size_t n = dataset_.pairs.size();
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    EpochMetrics m;
    for (size_t i = 0; i < n; ++i) m.l2_loss += l2_step(i);
    m.l2_loss /= static_cast<double>(n);

    for (size_t i = 0; i < n; ++i) {
      const auto [c, g] = wgan_step(rng_);
      m.critic_loss += c;
      m.gen_loss += g;
    }
    m.critic_loss /= static_cast<double>(n);
    m.gen_loss /= static_cast<double>(n);

    if (metrics.is_open())
      metrics << epoch << ',' << m.l2_loss << ',' << m.critic_loss << ',' << m.gen_loss << '\n';
    history.push_back(m);
  }
  return history;
}

void Trainer::save(const std::string& checkpoint_path) const {
  nn::ExtraTensors extras;
  for (size_t i = 0; i < zcodes_.size(); ++i)
    extras.emplace_back("zcode." + std::to_string(i), zcodes_[i].values());
  nn::save_checkpoint(checkpoint_path, model_, extras);
}

std::vector<float> Trainer::zcode(size_t index) const {
  if (index >= zcodes_.size()) throw ConfigError("sample index out of range");
  return zcodes_[index].values();
}

gssdf::GssdfField predict_with_code(const nn::FractureModel& model,
                                    const impulse::ImpulseNorm& vnorm,
                                    const std::vector<float>& zcode) {
  if (zcode.size() != static_cast<size_t>(model.config().dz))
    throw ConfigError("code size does not match model dz");
  Tensor<float> latent = model.encode(vnorm_tensor(vnorm)).detach();
  Tensor<float> z = Tensor<float>::from({1, model.config().dz}, zcode);
  Tensor<float> out = model.generate(nn::concat(latent, z));

  gssdf::GssdfField field;
  field.field.meta.resolution = model.config().resolution;
  field.field.values = out.values();
  return field;
}

gssdf::GssdfField predict(const nn::FractureModel& model, const impulse::ImpulseNorm& vnorm,
                          uint64_t seed) {
  const impulse::NormalCode code = impulse::sample_normal_code(seed, model.config().dz);
  return predict_with_code(model, vnorm,
                           std::vector<float>(code.z.begin(), code.z.end()));
}

}  // namespace fracgen::train
