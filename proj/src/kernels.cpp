// SPDX-License-Identifier: Apache-2.0
#include "elastst/kernels.hpp"

#include <cstring>
#include <vector>

namespace elastst::kernels {

namespace {

// GCC/Clang vector extension; lowers to whatever SIMD width the target has.
typedef double v8 __attribute__((vector_size(64)));

inline v8 load(const double* p) {
  v8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}
inline void store(double* p, v8 v) { std::memcpy(p, &v, sizeof v); }
inline v8 splat(double x) { return v8{x, x, x, x, x, x, x, x}; }

constexpr std::size_t kTileRows = 6;
constexpr std::size_t kTileCols = 16;

// c[MR x 16] = (c or 0) + sum_p a(r, p) * b[p, :], with a(r, p) = a[r*as + p*ps]
// so one kernel serves both a and a^T.
template <std::size_t MR>
inline void tile16(const double* a, std::size_t as, std::size_t ps, const double* b,
                   std::size_t bs, double* c, std::size_t cs, std::size_t k, bool acc_in) {
  v8 lo[MR], hi[MR];
  for (std::size_t r = 0; r < MR; ++r) {
    lo[r] = acc_in ? load(c + r * cs) : splat(0.0);
    hi[r] = acc_in ? load(c + r * cs + 8) : splat(0.0);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const v8 b0 = load(b + p * bs), b1 = load(b + p * bs + 8);
    for (std::size_t r = 0; r < MR; ++r) {
      const v8 av = splat(a[r * as + p * ps]);
      lo[r] += av * b0;
      hi[r] += av * b1;
    }
  }
  for (std::size_t r = 0; r < MR; ++r) {
    store(c + r * cs, lo[r]);
    store(c + r * cs + 8, hi[r]);
  }
}

// Column remainder; same per-element operation order as tile16.
void tile_scalar(const double* a, std::size_t as, std::size_t ps, const double* b,
                 std::size_t bs, double* c, std::size_t cs, std::size_t k, std::size_t rows,
                 std::size_t cols, bool acc_in) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      double s = acc_in ? c[r * cs + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[r * as + p * ps] * b[p * bs + j];
      c[r * cs + j] = s;
    }
  }
}

void gemm_strided(const double* a, std::size_t as, std::size_t ps, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n, bool acc_in) {
  std::size_t j0 = 0;
  for (; j0 + kTileCols <= n; j0 += kTileCols) {
    std::size_t i0 = 0;
    for (; i0 + kTileRows <= m; i0 += kTileRows)
      tile16<kTileRows>(a + i0 * as, as, ps, b + j0, n, c + i0 * n + j0, n, k, acc_in);
    for (; i0 < m; ++i0) tile16<1>(a + i0 * as, as, ps, b + j0, n, c + i0 * n + j0, n, k, acc_in);
  }
  if (j0 < n) tile_scalar(a, as, ps, b + j0, n, c + j0, n, k, m, n - j0, acc_in);
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  gemm_strided(a, k, 1, b, c, m, k, n, accumulate);
}

void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  gemm_strided(a, 1, k, b, c, k, m, n, true);
}

void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                 std::size_t k) {
  // Transpose b once so the inner loop streams contiguous rows.
  std::vector<double> bt(n * k);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + r] = b[r * n + j];
  gemm_strided(a, n, 1, bt.data(), c, m, n, k, true);
}

}  // namespace elastst::kernels
