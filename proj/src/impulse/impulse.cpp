#include "fracgen/impulse/impulse.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "fracgen/core/error.hpp"

namespace fracgen::impulse {

namespace {

constexpr double kReferenceDt = 0.004;

std::tuple<double, double, double, double, double, double> contact_key(const ImpulseRaw& c) {
  return {c.p.x, c.p.y, c.p.z, c.d.x, c.d.y, c.d.z};
}

void validate_contact(const ImpulseRaw& c) {
  if (c.I < 0.0) throw ConfigError("impulse magnitude must be non-negative");
  if (std::abs(c.d.norm() - 1.0) > 1e-5)
    throw ConfigError("impulse direction must be a unit vector");
}

}  // namespace

std::optional<ImpulseRaw> accumulate_impulses(const std::vector<ImpulseRaw>& contacts,
                                              double threshold, double frame_dt) {
  if (frame_dt <= 0.0) throw ConfigError("frame_dt must be positive");
  if (contacts.empty()) return std::nullopt;

  double total = 0.0;
  const ImpulseRaw* strongest = &contacts.front();
  for (const ImpulseRaw& c : contacts) {
    validate_contact(c);
    total += c.I;
    if (c.I > strongest->I ||
        (c.I == strongest->I && contact_key(c) < contact_key(*strongest)))
      strongest = &c;
  }

  if (total * (kReferenceDt / frame_dt) < threshold) return std::nullopt;
  ImpulseRaw out = *strongest;
  out.I = total;
  return out;
}

ImpulseNorm normalize_impulse(const ImpulseRaw& raw, double i_max) {
  if (i_max <= 0.0) throw ConfigError("i_max must be positive");
  validate_contact(raw);
  ImpulseNorm n;
  n.v[0] = std::clamp(raw.p.x, -1.0, 1.0);
  n.v[1] = std::clamp(raw.p.y, -1.0, 1.0);
  n.v[2] = std::clamp(raw.p.z, -1.0, 1.0);
  n.v[3] = raw.d.x;
  n.v[4] = raw.d.y;
  n.v[5] = raw.d.z;
  n.v[6] = std::clamp(2.0 * raw.I / i_max - 1.0, -1.0, 1.0);
  return n;
}

std::vector<double> siren_encode(const ImpulseNorm& v, const SirenParams& params) {
  std::vector<double> out(kLatentDim);
  for (int k = 0; k < kLatentDim; ++k) {
    double acc = params.b[k];
    for (int j = 0; j < kImpulseDim; ++j) acc += params.W[k * kImpulseDim + j] * v.v[j];
    out[k] = std::sin(params.omega0 * acc);
  }
  return out;
}

std::vector<double> siren_encode_jacobian(const ImpulseNorm& v, const SirenParams& params) {
  std::vector<double> jac(kLatentDim * kImpulseDim);
  for (int k = 0; k < kLatentDim; ++k) {
    double acc = params.b[k];
    for (int j = 0; j < kImpulseDim; ++j) acc += params.W[k * kImpulseDim + j] * v.v[j];
    const double c = params.omega0 * std::cos(params.omega0 * acc);
    for (int j = 0; j < kImpulseDim; ++j)
      jac[k * kImpulseDim + j] = c * params.W[k * kImpulseDim + j];
  }
  return jac;
}

SirenParams init_siren_params(Rng& rng, double omega0) {
  SirenParams p;
  p.omega0 = omega0;
  const double bound = 1.0 / kImpulseDim;
  p.W.resize(kLatentDim * kImpulseDim);
  p.b.resize(kLatentDim);
  for (auto& w : p.W) w = rng.uniform(-bound, bound);
  for (auto& b : p.b) b = rng.uniform(-bound, bound);
  return p;
}

NormalCode sample_normal_code(uint64_t rng_seed, int dz) {
  if (dz < 1) throw ConfigError("dz must be at least 1");
  Rng rng(rng_seed);
  NormalCode code;
  code.z.resize(dz);
  for (auto& z : code.z) z = rng.normal();
  return code;
}

std::vector<double> assemble_latent(const std::vector<double>& v_latent, const NormalCode& z) {
  if (v_latent.size() != kLatentDim) throw ConfigError("latent vector must have 128 entries");
  if (z.z.empty()) throw ConfigError("normal code must be non-empty");
  std::vector<double> out;
  out.reserve(v_latent.size() + z.z.size());
  out.insert(out.end(), v_latent.begin(), v_latent.end());
  out.insert(out.end(), z.z.begin(), z.z.end());
  return out;
}

}  // namespace fracgen::impulse
