#include "fracgen/nn/model.hpp"

#include <cmath>

#include "fracgen/core/error.hpp"
#include "fracgen/nn/ops.hpp"

namespace fracgen::nn {

void ModelConfig::validate() const {
  // 3 and 5 are the supported presets (32 and 128); 2 exists for 16-cube
  // test fixtures only and is not reachable from the CLI.
  if (stages != 2 && stages != 3 && stages != 5) throw ConfigError("stages must be 3 or 5");
  if (resolution != 4 * (1 << stages))
    throw ConfigError("resolution must be 4 * 2^stages (32 or 128)");
  if (dz != 4 && dz != 8 && dz != 32) throw ConfigError("dz must be 4, 8, or 32");
  if (c0 < 16 || c0 % 16 != 0) throw ConfigError("c0 must be a positive multiple of 16");
  if (omega0 <= 0.0) throw ConfigError("omega0 must be positive");
}

namespace {

constexpr int kTotalStages = 5;

Tensor<float> param(std::vector<int> shape) { return Tensor<float>::zeros(std::move(shape), true); }

void fill_normal(Tensor<float>& t, Rng& rng, float stddev) {
  for (auto& v : t.values()) v = static_cast<float>(rng.normal()) * stddev;
}

void fill_uniform(Tensor<float>& t, Rng& rng, float bound) {
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
}

}  // namespace

void FractureModel::build() {
  cfg_.validate();
  const int c0 = cfg_.c0;
  auto ch = [c0](int i) { return c0 >> i; };  // c0, c0/2, ..., c0/16

  enc_w_ = param({128, 7});
  enc_b_ = param({128});
  proj_w_ = param({c0 * 64, cfg_.cond_dim()});
  proj_b_ = param({c0 * 64});

  const int slow = kTotalStages - cfg_.stages;  // leading stride-1 stages
  gen_stages_.clear();
  for (int s = 0; s < kTotalStages; ++s) {
    Stage st;
    st.stride = s < slow ? 1 : 2;
    const int k = st.stride == 1 ? 3 : 4;
    const int in = ch(s);
    const int out = s + 1 < kTotalStages ? ch(s + 1) : 1;
    st.w = param({in, out, k, k, k});
    st.b = param({out});
    gen_stages_.push_back(st);
  }

  crit_stages_.clear();
  for (int s = 0; s < kTotalStages; ++s) {
    Stage st;
    st.stride = s < cfg_.stages ? 2 : 1;
    const int k = st.stride == 1 ? 3 : 4;
    const int in = s == 0 ? 1 : ch(kTotalStages - s);
    const int out = ch(kTotalStages - 1 - s);
    st.w = param({out, in, k, k, k});
    st.b = param({out});
    crit_stages_.push_back(st);
  }
  crit_out_w_ = param({1, c0 * 64});
  crit_out_b_ = param({1});
}

FractureModel::FractureModel(const ModelConfig& cfg) : cfg_(cfg) { build(); }

FractureModel::FractureModel(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  build();
  fill_uniform(enc_w_, rng, 1.0f / 7.0f);
  fill_uniform(enc_b_, rng, 1.0f / 7.0f);
  // fan-in scaled normals; a flat small stddev starves the deep stages until
  // one bias step can silence a whole rectifier stage for good
  fill_normal(proj_w_, rng, std::sqrt(2.0f / static_cast<float>(cfg_.cond_dim())));
  for (size_t s = 0; s < gen_stages_.size(); ++s) {
    Stage& st = gen_stages_[s];
    const auto& sh = st.w.shape();  // {in, out, k, k, k}
    const float fan = static_cast<float>(sh[0] * sh[2] * sh[3] * sh[4]) /
                      static_cast<float>(st.stride * st.stride * st.stride);
    const float gain2 = s + 1 < gen_stages_.size() ? 2.0f : 1.0f;
    fill_normal(st.w, rng, std::sqrt(gain2 / fan));
  }
  for (auto& st : crit_stages_) {
    const auto& sh = st.w.shape();  // {out, in, k, k, k}
    const float fan = static_cast<float>(sh[1] * sh[2] * sh[3] * sh[4]);
    fill_normal(st.w, rng, std::sqrt(2.0f / fan));
  }
  fill_normal(crit_out_w_, rng, std::sqrt(1.0f / static_cast<float>(cfg_.c0 * 64)));
}

Tensor<float> FractureModel::encode(const Tensor<float>& vnorm) const {
  if (vnorm.size() != 7) throw ConfigError("encoder input must have 7 entries");
  return sine(dense(vnorm, enc_w_, enc_b_), static_cast<float>(cfg_.omega0));
}

Tensor<float> FractureModel::generate(const Tensor<float>& cond) const {
  if (cond.size() != static_cast<size_t>(cfg_.cond_dim()))
    throw ConfigError("condition vector size does not match model config");
  Tensor<float> x = dense(cond, proj_w_, proj_b_);
  x = relu(x);
  x = reshape(x, {1, cfg_.c0, 4, 4, 4});
  for (size_t s = 0; s < gen_stages_.size(); ++s) {
    const Stage& st = gen_stages_[s];
    x = conv_transpose3d(x, st.w, st.b, st.stride, st.pad);
    x = s + 1 < gen_stages_.size() ? relu(x) : tanh_act(x);
  }
  return x;
}

Tensor<float> FractureModel::criticize(const Tensor<float>& field) const {
  const std::vector<int> want = {1, 1, cfg_.resolution, cfg_.resolution, cfg_.resolution};
  if (field.shape() != want) throw ConfigError("critic input shape does not match model config");
  Tensor<float> x = field;
  for (const Stage& st : crit_stages_) {
    x = conv3d(x, st.w, st.b, st.stride, st.pad);
    x = leaky_relu(x, 0.2f);
  }
  x = reshape(x, {1, cfg_.c0 * 64});
  return dense(x, crit_out_w_, crit_out_b_);
}

std::vector<Tensor<float>> FractureModel::encoder_params() const { return {enc_w_, enc_b_}; }

std::vector<Tensor<float>> FractureModel::generator_params() const {
  std::vector<Tensor<float>> out = {proj_w_, proj_b_};
  for (const auto& st : gen_stages_) {
    out.push_back(st.w);
    out.push_back(st.b);
  }
  return out;
}

std::vector<Tensor<float>> FractureModel::critic_params() const {
  std::vector<Tensor<float>> out;
  for (const auto& st : crit_stages_) {
    out.push_back(st.w);
    out.push_back(st.b);
  }
  out.push_back(crit_out_w_);
  out.push_back(crit_out_b_);
  return out;
}

std::vector<std::pair<std::string, Tensor<float>>> FractureModel::named_params() const {
  std::vector<std::pair<std::string, Tensor<float>>> out;
  out.emplace_back("enc.w", enc_w_);
  out.emplace_back("enc.b", enc_b_);
  out.emplace_back("gen.proj.w", proj_w_);
  out.emplace_back("gen.proj.b", proj_b_);
  for (size_t s = 0; s < gen_stages_.size(); ++s) {
    out.emplace_back("gen.s" + std::to_string(s) + ".w", gen_stages_[s].w);
    out.emplace_back("gen.s" + std::to_string(s) + ".b", gen_stages_[s].b);
  }
  for (size_t s = 0; s < crit_stages_.size(); ++s) {
    out.emplace_back("crit.s" + std::to_string(s) + ".w", crit_stages_[s].w);
    out.emplace_back("crit.s" + std::to_string(s) + ".b", crit_stages_[s].b);
  }
  out.emplace_back("crit.out.w", crit_out_w_);
  out.emplace_back("crit.out.b", crit_out_b_);
  return out;
}

}  // namespace fracgen::nn
