// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "elastst/graph.hpp"
#include "elastst/tensor.hpp"

namespace elastst {

// Range of the rotary period coefficients, in patch-index units.
struct PeriodSpec {
  double p_min = 1.0;
  double p_max = 1000.0;
  std::size_t head_dim = 16;

  void validate() const;
};

// The d/2 learnable period coefficients of the tunable rotary embedding.
//
// The trainable tensor holds ln(P_j). Periods are evaluated as
// ref_j * exp(log_j - ln(ref_j)) with ref_j the initialization value, which
// is the same function of log_j but reproduces the initial periods exactly
// (including P_1 = p_min and P_{d/2} = p_max).
class TunablePeriods {
 public:
  TunablePeriods() = default;

  std::size_t head_dim() const { return 2 * reference_.size(); }
  std::size_t pairs() const { return reference_.size(); }

  double period(std::size_t j) const;
  std::vector<double> periods() const;
  // 2*pi / P_j, the per-pair rotation angle for unit position.
  std::vector<double> angles() const;

  Tensor& log_periods() { return log_; }
  const Tensor& log_periods() const { return log_; }

  friend TunablePeriods init_periods(const PeriodSpec& spec);

 private:
  std::vector<double> reference_;
  std::vector<double> reference_log_;
  Tensor log_;
};

// P_j = p_min * exp(2 alpha (j-1)), alpha = ln(p_max / p_min) / (d - 2).
TunablePeriods init_periods(const PeriodSpec& spec);

// Rotates every pair (x_{2j}, x_{2j+1}) by 2*pi*position / P_j.
std::vector<double> rotate(std::span<const double> x, double position,
                           const TunablePeriods& periods);

// <rotate(q, m), rotate(k, n)>, evaluated as <q, rotate(k, n - m)>; a function of
// m - n only, and exactly <q, k> (pairwise summed) when m == n.
double relative_score(std::span<const double> q, std::span<const double> k, double m, double n,
                      const TunablePeriods& periods);

// Differentiable rotation of x[rows x (heads*d)]: each d-wide chunk of row r
// is rotated to position positions[r]. Gradients flow to x and to the log
// periods.
Tensor apply_rope(Graph& g, const Tensor& x, std::span<const std::size_t> positions,
                  const TunablePeriods& periods);

}  // namespace elastst
