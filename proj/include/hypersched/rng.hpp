#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hypersched {

// Deterministic random stream. The engine is the standard-mandated
// mt19937_64, and every distribution below is derived from raw 64-bit draws
// with fixed arithmetic, so a seed reproduces the same sequence on any
// platform. Each call consumes a fixed number of engine steps.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  // exp of a uniform draw on [ln lo, ln hi]; requires lo > 0.
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  // Uniform integer on [lo, hi], both ends inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t width = static_cast<std::uint64_t>(hi) -
                                static_cast<std::uint64_t>(lo);  // wraps safely
    const auto span = static_cast<unsigned __int128>(width) + 1;
    const auto x = static_cast<unsigned __int128>(engine_());
    const auto offset = static_cast<std::uint64_t>((x * span) >> 64);
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + offset);
  }

  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(
        uniform_int(0, static_cast<std::int64_t>(n) - 1));
  }

  // Box-Muller; consumes exactly two engine steps per call.
  double normal(double mu, double sigma) {
    const double u1 =
        static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    return mu + sigma * r * std::cos(two_pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hypersched
