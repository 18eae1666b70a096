#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace setfeat {

/// xoshiro256** generator with reproducible, named sub-streams.
///
/// State initialisation: x = seed ^ mix64(stream + 1), then the four state
/// words are successive splitmix64 outputs starting from x. `mix64` is the
/// splitmix64 finaliser. The same (seed, stream) pair yields the same sequence
/// in any implementation of this scheme.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  result_type operator()() { return next_u64(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, n) (Lemire's multiply-and-reject). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (one draw per call, no cached pair).
  double normal();

  /// Independent generator for sub-stream `stream` of this generator's seed.
  Rng split(std::uint64_t stream) const { return Rng(seed_, stream); }
  std::uint64_t seed() const { return seed_; }

  /// `count` distinct values from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count);

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_;
};

std::uint64_t splitmix64(std::uint64_t& x);
std::uint64_t mix64(std::uint64_t z);

}  // namespace setfeat
