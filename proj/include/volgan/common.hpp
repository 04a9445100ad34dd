#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace volgan {

inline constexpr std::string_view kVersion = "0.1.0";

// Shape/dimension violations (mismatched ranks, indivisible sizes, ...).
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller broke an operation's contract (empty input, consumed tape, ...).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed configuration (unknown key, out-of-range value).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem failures; message carries the offending path.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NIfTI parsing failure; `field` names the offending header field.
struct NiftiError : std::runtime_error {
  NiftiError(std::string field_name, const std::string& what)
      : std::runtime_error("nifti field '" + field_name + "': " + what),
        field(std::move(field_name)) {}
  std::string field;
};

// Training produced a non-finite loss.
struct DivergenceError : std::runtime_error {
  DivergenceError(int at_epoch, const std::string& what)
      : std::runtime_error("diverged at epoch " + std::to_string(at_epoch) +
                           ": " + what),
        epoch(at_epoch) {}
  int epoch;
};

// ---------------------------------------------------------------------------
// Seeding. All randomness flows through this generator so that results are
// reproducible across runs and independent of scheduling. Derived seeds are
// produced with a fixed 64-bit mix, never std::hash.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) +
                            (seed >> 2)));
}

inline std::uint64_t hash_str(std::uint64_t seed, std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hash_combine(seed, h);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the spare is cached, so draw order is
  // part of the deterministic sequence.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793238462643 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  std::size_t next_below(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % n);
  }

  template <typename Seq>
  void shuffle(Seq& seq) {
    if (seq.size() < 2) return;
    for (std::size_t i = seq.size() - 1; i > 0; --i) {
      std::size_t j = next_below(i + 1);
      std::swap(seq[i], seq[j]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace volgan
