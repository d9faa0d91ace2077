#pragma once

#include <cstdint>
#include <random>

namespace lgc {

// Seeded random source. `split` derives an independent, reproducible
// substream so parallel or staged work never shares draw order.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), eng_(mix(seed)) {}

  double gauss() { return gauss_(eng_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  bool bernoulli(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_) < p; }
  uint64_t next_u64() { return eng_(); }

  uint64_t seed() const { return seed_; }

  Rng split(uint64_t stream) const { return Rng(mix(seed_ + 0x9E3779B97F4A7C15ULL * (stream + 1))); }

  // splitmix64 finalizer; decorrelates nearby seeds.
  static uint64_t mix(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

 private:
  uint64_t seed_;
  std::mt19937_64 eng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

// Named substreams so stage draw orders stay decoupled.
enum Stream : uint64_t {
  kStreamGen = 1,
  kStreamInit = 2,
  kStreamTrain = 3,
  kStreamStats = 4,
};

}  // namespace lgc
