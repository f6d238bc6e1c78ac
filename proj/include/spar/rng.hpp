#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace spar {

// Bit-mixing finalizer with full avalanche; period-free, stateless.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d9a823ae672e51ull;
  return x ^ (x >> 31);
}

// Key for an independent substream addressed by up to three indices
// (path, step, noise component).  Chained mixing keeps distinct index
// triples on distinct keys for any fixed seed.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
  std::uint64_t k = mix64(seed ^ 0x51ed270b4d2f1c9aull);
  k = mix64(k ^ mix64(a ^ 0xabcdef0123456789ull));
  k = mix64(k ^ mix64(b ^ 0x0f0f0f0f0f0f0f0full));
  k = mix64(k ^ mix64(c ^ 0x5a5a5a5a5a5a5a5aull));
  return k;
}

// Counter-mode generator: the n-th output is a pure function of (key, n), so
// any substream can be regenerated from its key alone and streams keyed by
// different ids never share state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key), ctr_(0) {}

  std::uint64_t next_bits() { return mix64(key_ + 0x2545f4914f6cdd1dull * ++ctr_); }

  // Uniform on (0,1), strictly interior.
  double u01() { return (static_cast<double>(next_bits() >> 11) + 0.5) * 0x1.0p-53; }

  // One standard normal draw per call; pairs are generated and the spare
  // is cached.  Box-Muller rather than std::normal_distribution, whose
  // stream is not reproducible across standard library implementations.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u = u01();
    const double v = u01();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_;
  double spare_ = 0;
  bool have_spare_ = false;
};

// Single normal draw addressed by absolute ids; the canonical way to fill
// Wiener increments so that path p, step s, component k always sees the
// same number regardless of thread layout or batching.
inline double normal_at(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                        std::uint64_t k) {
  CounterRng rng(stream_key(seed, path, step, k));
  return rng.normal();
}

}  // namespace spar
