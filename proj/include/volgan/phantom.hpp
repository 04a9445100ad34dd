#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "volgan/common.hpp"
#include "volgan/volume.hpp"

namespace volgan {

// Synthetic stand-in volume: a centered ellipsoid "brain" with a smooth
// low-frequency texture, plus -- for the bipolar class -- a localized
// intensity bump at a fixed anatomical position that acts as a learnable
// class signature. The base field depends only on the seed, so normal and
// bipolar phantoms of the same seed are voxel-identical outside the bump's
// support.
struct PhantomParams {
  float inside_base = 0.45f;
  float dome_gain = 0.20f;       // brightening toward the ellipsoid center
  float background = 0.03f;
  float noise_amplitude = 0.04f;
  int noise_waves = 6;
  float signature_amplitude = 0.40f;
  float signature_radius_frac = 0.12f;  // sigma as a fraction of the front dim
};

inline Volume make_phantom(std::uint64_t seed, Label label,
                           std::array<std::size_t, 3> dims = {256, 256, 176},
                           const PhantomParams& params = {}) {
  if (label != Label::bipolar && label != Label::normal) {
    throw ContractError("make_phantom: label must be bipolar or normal");
  }
  for (std::size_t d : dims) {
    if (d < 32) {
      throw ShapeError("make_phantom: every dim must be >= 32, got " +
                       std::to_string(dims[0]) + "x" + std::to_string(dims[1]) +
                       "x" + std::to_string(dims[2]));
    }
  }

  // Per-seed texture and mild shape jitter, shared by both classes.
  Rng rng(hash_str(seed, "phantom-base"));
  struct Wave {
    float kx, ky, kz, phase, amp;
  };
  std::vector<Wave> waves(std::size_t(params.noise_waves));
  for (auto& wv : waves) {
    wv.kx = float(2.0 + 5.0 * rng.next_double());
    wv.ky = float(2.0 + 5.0 * rng.next_double());
    wv.kz = float(2.0 + 5.0 * rng.next_double());
    wv.phase = float(2.0 * 3.14159265358979 * rng.next_double());
    wv.amp = params.noise_amplitude * float(0.5 + rng.next_double());
  }
  const float ax = float(0.40 + 0.04 * rng.next_double());
  const float ay = float(0.40 + 0.04 * rng.next_double());
  const float az = float(0.38 + 0.04 * rng.next_double());

  Volume v;
  v.dims = dims;
  v.voxels.resize(v.voxel_count());
  v.label = label;
  v.provenance = Provenance::synthetic;

  const float cx = float(dims[0]) / 2.0f;
  const float cy = float(dims[1]) / 2.0f;
  const float cz = float(dims[2]) / 2.0f;
  const float sigma = params.signature_radius_frac * float(dims[0]);
  const float sig_x = cx + 0.18f * float(dims[0]);
  const float sig_y = cy - 0.12f * float(dims[1]);
  const float sig_z = cz + 0.08f * float(dims[2]);
  const bool add_signature = label == Label::bipolar;

  float raw_min = 1e30f, raw_max = -1e30f;
  for (std::size_t z = 0; z < dims[2]; ++z) {
    const float w = (float(z) - cz) / (az * float(dims[2]));
    for (std::size_t y = 0; y < dims[1]; ++y) {
      const float u1 = (float(y) - cy) / (ay * float(dims[1]));
      for (std::size_t x = 0; x < dims[0]; ++x) {
        const float u0 = (float(x) - cx) / (ax * float(dims[0]));
        const float rho2 = u0 * u0 + u1 * u1 + w * w;
        float value = params.background;
        if (rho2 <= 1.0f) {
          float texture = 0.0f;
          for (const auto& wv : waves) {
            texture += wv.amp * std::cos(wv.kx * u0 + wv.ky * u1 +
                                         wv.kz * w + wv.phase);
          }
          value = params.inside_base + params.dome_gain * (1.0f - rho2) +
                  texture;
        }
        if (add_signature) {
          const float dx = float(x) - sig_x;
          const float dy = float(y) - sig_y;
          const float dz = float(z) - sig_z;
          const float d2 = dx * dx + dy * dy + dz * dz;
          // hard 3-sigma support so the base field is untouched elsewhere
          if (d2 < 9.0f * sigma * sigma) {
            value += params.signature_amplitude *
                     std::exp(-d2 / (2.0f * sigma * sigma));
          }
        }
        raw_min = std::min(raw_min, value);
        raw_max = std::max(raw_max, value);
        // fixed affine map [0,1] -> [-1,1] with clamping, not per-volume
        // min-max, so the two classes stay comparable voxel for voxel
        v.at(x, y, z) = std::min(1.0f, std::max(-1.0f, value * 2.0f - 1.0f));
      }
    }
  }
  v.intensity_range = {raw_min, raw_max};
  return v;
}

}  // namespace volgan
