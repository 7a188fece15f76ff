#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace mmf {

// 64-bit FNV-1a. Stable across platforms and releases; used for content keys and splits.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::span<const double> values, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t x);

// Portable random stream. std::mt19937_64 is fully specified by the standard; the
// distributions below are implemented here (the std:: ones are implementation-defined),
// so every draw is bit-reproducible across toolchains.
//   uniform(): top 53 bits of one engine output, in [0, 1)
//   normal():  Box-Muller on two uniforms, second value cached
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mmf
