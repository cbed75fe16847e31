#pragma once

#include <cstdint>
#include <limits>

namespace drf {

// xoshiro256++ seeded through SplitMix64. Satisfies UniformRandomBitGenerator,
// so the <random> distributions work on it.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()();

  // Uniform on [0, 1) with 53 random bits.
  double Uniform();

 private:
  std::uint64_t s_[4];
};

// Independent substreams. A stream is keyed by (seed, iteration, purpose,
// index) so that changing how many draws one purpose makes never shifts
// another purpose's draws.
enum class Stream : std::uint64_t {
  kIndexEstimate = 1,  // samples behind the approximate max index
  kDescent = 2,        // the scenario used for the x subgradient
  kDistribution = 3,   // the scenario used for the p update
  kAux = 4,
};

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t t = 0;

  Rng For(Stream purpose, std::uint64_t index) const;
};

// One round of SplitMix64 finalization; also used to mix keys.
std::uint64_t Mix64(std::uint64_t x);

}  // namespace drf
