#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "extrap/errors.hpp"

namespace extrap {

// Deterministic random stream. The engine (std::mt19937_64) is fully
// specified by the standard and all conversions to doubles/ints are done
// here by hand, so the draw sequence is bit-identical across platforms.
//
// Parallel workers never share a stream: derive(child_index) gives an
// independent stream via a splitmix64 hash of (seed, index).
class RngStream {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64+sm64";

  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::string algorithm() const { return kAlgorithm; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Rejection keeps it unbiased.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw ContractError("uniform_int: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform01();  // avoid log(0)
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Index draw from unnormalized non-negative weights.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) throw ContractError("categorical: weights sum to zero");
    double r = uniform01() * total;
    double c = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      c += weights[i];
      if (r < c) return i;
    }
    return weights.size() - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_int(i)]);
    }
  }

  // Independent child stream for worker `index`.
  RngStream derive(std::uint64_t index) const {
    return RngStream(mix(seed_, index));
  }

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 finalizer over the combined word
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace extrap
