#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace proje {

// A mt19937_64 engine with hand-rolled distribution transforms. The standard
// distributions are implementation-defined, so going through raw 64-bit draws
// keeps sequences identical across standard libraries.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32), stream};
    engine_.seed(seq);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Distance to the next id kept by an independent keep-each-with-probability-p
  /// scan, for 0 < p < 1. Drawing gaps instead of one Bernoulli per id yields
  /// exactly the same distribution in O(kept) draws.
  std::int64_t keep_gap(double p) {
    const double u = 1.0 - uniform01();  // (0, 1]
    return 1 + static_cast<std::int64_t>(std::floor(std::log(u) / std::log1p(-p)));
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Independent substreams so that e.g. adding dropout draws does not shift the
/// candidate-sampling sequence. Same seed, same inputs => same draws.
struct RngStream {
  std::uint64_t seed;
  Rng direction;   // head-vs-tail corruption choice
  Rng sampling;    // negative candidate sampling
  Rng dropout;     // per-instance dropout masks
  Rng shuffling;   // epoch shuffles
  Rng init;        // parameter initialization

  explicit RngStream(std::uint64_t s)
      : seed(s), direction(s, 1), sampling(s, 2), dropout(s, 3), shuffling(s, 4), init(s, 5) {}
};

}  // namespace proje
