#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace zrp {

// SplitMix64 step. Used to whiten seeds before they reach the main engine so
// that nearby (seed, index) pairs give unrelated streams.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic stream id for (seed, index); index is typically a replica number.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64_next(s);
  s = a ^ (0xd1342543de82ef95ULL * (index + 1));
  return splitmix64_next(s);
}

// Random source with explicit, platform-independent conversions.  All floating
// draws are derived from raw 64-bit engine output; no std::*_distribution is
// used anywhere, so a fixed seed reproduces trajectories byte for byte.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(derive_stream(seed, index));
  }

  std::uint64_t raw() { return eng_(); }

  // uniform in [0,1), 53-bit resolution
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // strictly positive waiting time; 1-uniform() lies in (0,1]
  double exponential(double rate) {
    return -std::log(1.0 - uniform()) / rate;
  }

  // standard normal via the polar method (pair cached)
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // uniform integer in [0, n); n must be small compared to 2^53
  int uniform_int(int n) { return static_cast<int>(uniform() * n); }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace zrp
