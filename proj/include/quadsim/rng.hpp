#pragma once

#include <cstdint>
#include <random>

namespace quadsim {

// Stateless 64-bit mixer (splitmix64 finalizer).
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Counter-based seed derivation: one master seed fans out into independent
// streams so that parallel scheduling cannot reorder randomness.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                 std::uint64_t stream = 0) {
  return mix64(mix64(master ^ mix64(index + 1)) ^ mix64(stream + 0x632BE59BD9B4E019ull));
}

// mt19937_64 with hand-rolled uniform helpers. The engine itself is fully
// specified by the standard; std::uniform_real_distribution is not, so we
// avoid it to keep streams reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double canonical() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * canonical(); }

  // Uniform integer in [0, n), n > 0.
  std::uint64_t integer(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace quadsim
