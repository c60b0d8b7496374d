// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

// Row-major dense kernels. Every output element accumulates its inner
// dimension in ascending order, so a row's result never depends on how many
// other rows are in the batch.
namespace elastst::kernels {

// c[m x n] (+)= a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n);

// c[m x k] += a[m x n] * b[k x n]^T
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                 std::size_t k);

}  // namespace elastst::kernels
