/**
 * @file rng.hpp
 * @brief Counter-based deterministic random numbers.
 *
 * Every draw is a pure function of (seed, stream key, counter), so simulator
 * outputs are reproducible and independent of evaluation order across ticks,
 * robots, and objects. Distributions are hand-rolled (Box-Muller for
 * gaussians) to keep sequences identical across standard libraries.
 */

#ifndef TCAFF_RNG_HPP
#define TCAFF_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace tcaff {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

class CounterRng {
 public:
  /// Key the stream with the seed plus any identifying indices
  /// (robot, tick, object id, ...).
  CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {})
  {
    key_ = detail::splitmix64(seed);
    for (std::uint64_t s : stream) {
      key_ = detail::splitmix64(key_ ^ (s + 0x2545f4914f6cdd1dULL));
    }
  }

  std::uint64_t next_u64() { return detail::splitmix64(key_ ^ counter_++); }

  /// Uniform in [0, 1).
  double uniform()
  {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + uniform() * (b - a); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller.
  double normal()
  {
    double u1 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n)
  {
    return n == 0 ? 0 : next_u64() % n;
  }

 private:
  std::uint64_t key_{0};
  std::uint64_t counter_{0};
};

}  // namespace tcaff

#endif  // TCAFF_RNG_HPP
