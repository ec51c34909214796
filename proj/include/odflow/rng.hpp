#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace odflow {

// splitmix64: cheap, well-mixed 64-bit hash used both to stretch seeds and to
// combine structural indices (od, day, interval, tree, ...) into independent
// stream seeds. Deterministic across platforms by construction.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Hash-combine a salt with any number of structural indices. Order-sensitive.
inline std::uint64_t mix_seed(std::uint64_t salt,
                              std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = splitmix64(salt);
  for (std::uint64_t p : parts) h = splitmix64(h ^ (p + 0x9e3779b97f4a7c15ULL));
  return h;
}

// Deterministic random stream. The engine (mt19937_64) is fully specified by
// the standard; the uniform/normal transforms are hand-rolled because the
// std::*_distribution classes are implementation-defined and would break the
// byte-identical-rerun contract across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling keeps the distribution exact
  // and the call sequence deterministic.
  int uniform_int(int n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return static_cast<int>(x % bound);
  }

  // Standard normal via Box-Muller; the spare variate is cached so a run of
  // normal() calls consumes one uniform pair per two results.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace odflow
