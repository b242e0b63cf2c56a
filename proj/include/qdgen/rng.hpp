#pragma once

// Seeded substreams. Every random decision is keyed by a root seed plus a
// path of integers (round, slot, purpose, ...), so results never depend on
// which worker ran first.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace qdgen {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) {
  return splitmix64(seed ^ splitmix64(key + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  for (std::uint64_t key : path) seed = derive_seed(seed, key);
  return seed;
}

// Purpose tags for substream derivation.
enum class Purpose : std::uint64_t {
  select = 1,
  mutate = 2,
  classify = 3,
  verify = 4,
  oracle = 5,
  filter = 6,
  sample = 7,
  seed_init = 8,
};

inline std::uint64_t purpose_key(Purpose p) { return static_cast<std::uint64_t>(p); }

// mt19937_64 with distribution code written out here, so that draws are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n), n > 0, without modulo bias.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; each call consumes exactly two uniforms.
  double gaussian(double mean, double sd) {
    double u1 = uniform();
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
    return mean + sd * radius * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qdgen
