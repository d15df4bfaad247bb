#pragma once

#include <cstdint>
#include <random>

namespace omtsim {

// Mixes (seed, stream) into an independent engine seed so that parallel
// trajectories draw from disjoint, order-independent streams.
inline uint64_t derive_stream(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// mt19937_64 with a hand-rolled Box-Muller transform. std::normal_distribution
// is implementation-defined, which would break bit-exact replay across
// standard libraries; this keeps the draw sequence part of the contract.
class NormalRng {
 public:
  explicit NormalRng(uint64_t engine_seed) : engine_(engine_seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0;
};

}  // namespace omtsim
