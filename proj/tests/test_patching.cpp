// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <numeric>
#include <random>

#include "elastst/errors.hpp"
#include "elastst/patching.hpp"

using namespace elastst;

namespace {

Window make_window(std::size_t L, std::size_t T, double start = 1.0) {
  Window w;
  w.context.resize(L);
  std::iota(w.context.begin(), w.context.end(), start);
  w.horizon_len = T;
  return w;
}

}  // namespace

TEST_CASE("segment with exact divisibility") {
  const PatchGrid g = segment(make_window(96, 96), 8);
  CHECK(g.context_patches == 12);
  CHECK(g.horizon_patches == 12);
  CHECK(g.num_patches() == 24);
  CHECK(g.left_pad == 0);
  CHECK(g.right_pad == 0);
  CHECK(g.patches.size() == 24 * 8);
}

TEST_CASE("segment pads context on the left and horizon on the right") {
  const PatchGrid g = segment(make_window(90, 100), 8);
  CHECK(g.context_patches == 12);
  CHECK(g.left_pad == 6);
  CHECK(g.horizon_patches == 13);
  CHECK(g.right_pad == 4);
  CHECK(g.num_patches() == 25);
  // First patch: six pad zeros, then the first two observations.
  const auto p0 = g.patch(0);
  for (std::size_t i = 0; i < 6; ++i) CHECK(p0[i] == 0.0);
  CHECK(p0[6] == 1.0);
  CHECK(p0[7] == 2.0);
  CHECK(g.patch(11)[7] == 90.0);
}

TEST_CASE("single patch case") {
  const PatchGrid g = segment(make_window(8, 8), 8);
  REQUIRE(g.num_patches() == 2);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(g.patch(0)[i] == static_cast<double>(i + 1));
    CHECK(g.patch(1)[i] == 0.0);
  }
  CHECK(g.is_placeholder == std::vector<bool>{false, true});
}

TEST_CASE("segment rejects bad arguments") {
  CHECK_THROWS_AS(segment(make_window(8, 8), 0), ParameterError);
  CHECK_THROWS_AS(segment(make_window(8, 0), 4), ParameterError);
  CHECK_THROWS_AS(segment(make_window(0, 8), 4), ParameterError);
}

TEST_CASE("grid invariants hold over random shapes") {
  std::mt19937_64 e(1);
  std::uniform_int_distribution<std::size_t> len(1, 200), ps(1, 40);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t L = len(e), T = len(e), P = ps(e);
    const Window w = make_window(L, T);
    const PatchGrid g = segment(w, P);
    CHECK(g.context_patches == (L + P - 1) / P);
    CHECK(g.horizon_patches == (T + P - 1) / P);
    CHECK(g.left_pad == g.context_patches * P - L);
    CHECK(g.right_pad == g.horizon_patches * P - T);
    for (std::size_t n = 0; n < g.num_patches(); ++n)
      CHECK(g.is_placeholder[n] == (n >= g.context_patches));
    // Context positions map back to the source; horizon positions are zero.
    for (std::size_t n = 0; n < g.context_patches; ++n) {
      for (std::size_t i = 0; i < P; ++i) {
        const std::size_t flat = n * P + i;
        const double expected = flat < g.left_pad ? 0.0 : w.context[flat - g.left_pad];
        CHECK(g.patch(n)[i] == expected);
      }
    }
    for (std::size_t n = g.context_patches; n < g.num_patches(); ++n)
      for (double v : g.patch(n)) CHECK(v == 0.0);
  }
}

TEST_CASE("attention key mask") {
  const std::vector<bool> m96 = attention_key_mask(segment(make_window(96, 96), 8));
  REQUIRE(m96.size() == 24);
  for (std::size_t n = 0; n < 24; ++n) CHECK(m96[n] == (n < 12));

  const std::vector<bool> m90 = attention_key_mask(segment(make_window(90, 100), 8));
  CHECK(std::count(m90.begin(), m90.end(), true) == 12);
  CHECK(std::count(m90.begin(), m90.end(), false) == 13);

  PatchGrid context_only = segment(make_window(16, 1), 4);
  context_only.horizon_patches = 0;
  context_only.is_placeholder.resize(context_only.context_patches);
  const std::vector<bool> all = attention_key_mask(context_only);
  CHECK(std::all_of(all.begin(), all.end(), [](bool b) { return b; }));
}

TEST_CASE("unpatch examples") {
  const std::vector<double> rows{1, 2, 3, 4, 5, 6};
  const PatchGrid g6 = segment(make_window(3, 6), 3);
  CHECK(unpatch(rows, 2, 3, g6) == std::vector<double>{1, 2, 3, 4, 5, 6});
  const PatchGrid g5 = segment(make_window(3, 5), 3);
  CHECK(unpatch(rows, 2, 3, g5) == std::vector<double>{1, 2, 3, 4, 5});
  CHECK_THROWS_AS(unpatch(rows, 3, 2, g5), DimensionError);
  CHECK_THROWS_AS(unpatch(rows, 1, 3, g5), DimensionError);
}

TEST_CASE("unpatch recovers a known horizon for any shape") {
  std::mt19937_64 e(2);
  std::uniform_int_distribution<std::size_t> len(1, 150), ps(1, 33);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t L = len(e), T = len(e), P = ps(e);
    std::vector<double> horizon(T);
    for (double& v : horizon) v = nd(e);
    const PatchGrid g = segment(make_window(L, T), P);
    // Synthetic fill: write the known horizon into the placeholder rows.
    std::vector<double> rows(g.horizon_patches * P, 0.0);
    std::copy(horizon.begin(), horizon.end(), rows.begin());
    CHECK(unpatch(rows, g.horizon_patches, P, g) == horizon);
  }
}

TEST_CASE("extending the horizon only appends placeholder rows") {
  std::mt19937_64 e(3);
  std::uniform_int_distribution<std::size_t> len(1, 120), ps(1, 32);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t L = len(e), P = ps(e);
    std::size_t T1 = len(e), T2 = len(e);
    if (T1 > T2) std::swap(T1, T2);
    const PatchGrid a = segment(make_window(L, T1), P);
    const PatchGrid b = segment(make_window(L, T2), P);
    REQUIRE(b.num_patches() >= a.num_patches());
    for (std::size_t n = 0; n < a.num_patches(); ++n) {
      CHECK(a.is_placeholder[n] == b.is_placeholder[n]);
      for (std::size_t i = 0; i < P; ++i) CHECK(a.patch(n)[i] == b.patch(n)[i]);
    }
  }
}
