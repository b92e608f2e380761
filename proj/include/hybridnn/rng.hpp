#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>

namespace hybridnn {

/// Seeded random source with a fully specified output sequence.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the standard.
/// The standard distributions are implementation-defined, so the uniform and
/// normal transforms are done here to keep data and trajectories identical
/// across toolchains.
///
/// Streams: a (seed, purpose) pair is expanded through std::seed_seq, so
/// "centroids", "noise", "shuffle", ... draw from independent sequences.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::string_view stream = {});

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename It>
  void shuffle(It first, It last) {
    // Fisher-Yates, back to front.
    for (auto n = static_cast<std::uint64_t>(last - first); n > 1; --n) {
      auto j = below(n);
      std::iter_swap(first + (n - 1), first + j);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a 64-bit; used for stream names and config hashes.
std::uint64_t fnv1a(std::string_view text, std::uint64_t basis = 14695981039346656037ull);

}  // namespace hybridnn
