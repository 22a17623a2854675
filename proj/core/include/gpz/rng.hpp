#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace gpz {

/// Deterministic random source. The engine is std::mt19937_64 (fully
/// specified by the standard); the uniform and normal transforms are
/// implemented here so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Derives an independent stream seed from a parent seed and a tag.
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag);
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal();

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace gpz
