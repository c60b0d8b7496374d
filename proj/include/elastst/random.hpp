// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

// Distribution helpers with a fixed algorithm, so seeded streams are
// reproducible across standard library implementations (std:: distributions
// are not).
namespace elastst::rng {

using Engine = std::mt19937_64;

inline Engine make_engine(std::initializer_list<std::uint64_t> keys) {
  std::seed_seq seq(keys.begin(), keys.end());
  return Engine(seq);
}

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Engine& e) {
  return static_cast<double>(e() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& e, double lo, double hi) { return lo + (hi - lo) * uniform01(e); }

// Uniform integer in [0, n), rejection sampled.
inline std::uint64_t uniform_index(Engine& e, std::uint64_t n) {
  const std::uint64_t limit = Engine::max() - Engine::max() % n;
  std::uint64_t v;
  do {
    v = e();
  } while (v >= limit);
  return v % n;
}

// Standard normal via Box-Muller (one draw per call).
inline double normal(Engine& e) {
  double u1;
  do {
    u1 = uniform01(e);
  } while (u1 <= 0.0);
  const double u2 = uniform01(e);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace elastst::rng
