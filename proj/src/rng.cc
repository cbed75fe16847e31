#include "drf/rng.h"

namespace drf {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t Rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t Mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t z = seed;
  for (auto& word : s_) {
    z += kGolden;
    word = Mix64(z);
  }
}

Rng::result_type Rng::operator()() {
  const std::uint64_t result = Rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = Rotl(s_[3], 45);
  return result;
}

double Rng::Uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

Rng StreamKey::For(Stream purpose, std::uint64_t index) const {
  std::uint64_t key = Mix64(seed + kGolden);
  key = Mix64(key ^ (t + 0x632be59bd9b4e019ULL));
  key = Mix64(key ^ (static_cast<std::uint64_t>(purpose) * 0x8cb92ba72f3d8dd7ULL));
  key = Mix64(key ^ (index + 0x5851f42d4c957f2dULL));
  return Rng(key);
}

}  // namespace drf
