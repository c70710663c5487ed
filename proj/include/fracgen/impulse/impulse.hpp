#pragma once

#include <array>
#include <optional>
#include <vector>

#include "fracgen/core/rng.hpp"
#include "fracgen/core/vec.hpp"

namespace fracgen::impulse {

inline constexpr int kImpulseDim = 7;
inline constexpr int kLatentDim = 128;

/// One contact event: position and unit direction in the normalized shape
/// frame, magnitude in N*s.
struct ImpulseRaw {
  Vec3 p;
  Vec3 d;
  double I = 0.0;
};

/// [p, d, I] squashed into [-1,1]^7.
struct ImpulseNorm {
  std::array<double, kImpulseDim> v{};
};

/// First-layer sine encoding: out_k = sin(omega0 * (W v + b)_k).
struct SirenParams {
  std::vector<double> W;  // row-major, kLatentDim x kImpulseDim
  std::vector<double> b;  // kLatentDim
  double omega0 = 30.0;
};

struct NormalCode {
  std::vector<double> z;
};

/// Sum the frame's impulses, rescaled to a 4 ms reference window. At or above
/// `threshold` the strongest contact is returned carrying the cumulative
/// magnitude; otherwise nothing. Ties on magnitude break by contact content
/// so the result does not depend on list order.
std::optional<ImpulseRaw> accumulate_impulses(const std::vector<ImpulseRaw>& contacts,
                                              double threshold, double frame_dt);

/// Map position (clamped), direction, and magnitude (affine via i_max) into
/// [-1,1]^7.
ImpulseNorm normalize_impulse(const ImpulseRaw& raw, double i_max);

std::vector<double> siren_encode(const ImpulseNorm& v, const SirenParams& params);

/// d out_k / d v_j, row-major kLatentDim x kImpulseDim.
std::vector<double> siren_encode_jacobian(const ImpulseNorm& v, const SirenParams& params);

/// Standard SIREN first-layer init: W, b uniform in [-1/in, 1/in].
SirenParams init_siren_params(Rng& rng, double omega0 = 30.0);

NormalCode sample_normal_code(uint64_t rng_seed, int dz);

/// Concatenate the 128-dim latent with the dz-dim code, latent first.
std::vector<double> assemble_latent(const std::vector<double>& v_latent, const NormalCode& z);

}  // namespace fracgen::impulse
