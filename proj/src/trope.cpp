// SPDX-License-Identifier: Apache-2.0
#include "elastst/trope.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "elastst/errors.hpp"

namespace elastst {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void PeriodSpec::validate() const {
  if (!(p_min > 0.0)) throw ParameterError("periods: p_min must be positive");
  if (!(p_min < p_max)) {
    throw ParameterError("periods: p_min (" + std::to_string(p_min) +
                         ") must be below p_max (" + std::to_string(p_max) + ")");
  }
  if (head_dim < 4 || head_dim % 2 != 0) {
    throw ParameterError("periods: head_dim must be even and >= 4, got " +
                         std::to_string(head_dim));
  }
}

TunablePeriods init_periods(const PeriodSpec& spec) {
  spec.validate();
  const std::size_t half = spec.head_dim / 2;
  const double alpha = std::log(spec.p_max / spec.p_min) / static_cast<double>(spec.head_dim - 2);
  TunablePeriods tp;
  tp.reference_.resize(half);
  tp.reference_log_.resize(half);
  std::vector<double> logs(half);
  for (std::size_t j = 0; j < half; ++j) {
    double p = spec.p_min * std::exp(2.0 * alpha * static_cast<double>(j));
    if (j == 0) p = spec.p_min;
    if (j + 1 == half) p = spec.p_max;
    tp.reference_[j] = p;
    tp.reference_log_[j] = std::log(p);
    logs[j] = tp.reference_log_[j];
  }
  tp.log_ = Tensor::from({1, half}, std::move(logs));
  tp.log_.set_requires_grad(true);
  return tp;
}

double TunablePeriods::period(std::size_t j) const {
  const double offset = log_.data()[j] - reference_log_[j];
  return offset == 0.0 ? reference_[j] : reference_[j] * std::exp(offset);
}

std::vector<double> TunablePeriods::periods() const {
  std::vector<double> out(pairs());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = period(j);
  return out;
}

std::vector<double> TunablePeriods::angles() const {
  std::vector<double> out(pairs());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = kTwoPi / period(j);
  return out;
}

std::vector<double> rotate(std::span<const double> x, double position,
                           const TunablePeriods& periods) {
  if (x.size() != periods.head_dim()) {
    throw DimensionError("rotate: vector of length " + std::to_string(x.size()) +
                         " vs head_dim " + std::to_string(periods.head_dim()));
  }
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < periods.pairs(); ++j) {
    const double phi = kTwoPi * position / periods.period(j);
    const double c = std::cos(phi), s = std::sin(phi);
    const double a = x[2 * j], b = x[2 * j + 1];
    out[2 * j] = a * c - b * s;
    out[2 * j + 1] = a * s + b * c;
  }
  return out;
}

double relative_score(std::span<const double> q, std::span<const double> k, double m, double n,
                      const TunablePeriods& periods) {
  if (q.size() != periods.head_dim() || k.size() != periods.head_dim()) {
    throw DimensionError("relative_score: q has length " + std::to_string(q.size()) +
                         ", k has length " + std::to_string(k.size()) + ", head_dim is " +
                         std::to_string(periods.head_dim()));
  }
  // <R(m) q, R(n) k> = <q, R(n - m) k>; at m == n the rotation is exactly the identity.
  const double delta = n - m;
  double acc = 0.0;
  for (std::size_t j = 0; j < periods.pairs(); ++j) {
    const double phi = kTwoPi * delta / periods.period(j);
    const double c = std::cos(phi), s = std::sin(phi);
    const double a = k[2 * j], b = k[2 * j + 1];
    acc += q[2 * j] * (a * c - b * s) + q[2 * j + 1] * (a * s + b * c);
  }
  return acc;
}

Tensor apply_rope(Graph& g, const Tensor& x, std::span<const std::size_t> positions,
                  const TunablePeriods& periods) {
  const std::size_t d = periods.head_dim();
  const std::size_t half = periods.pairs();
  const std::size_t rows = x.rows();
  const std::size_t width = x.cols();
  if (width % d != 0) {
    throw DimensionError("apply_rope: row width " + std::to_string(width) +
                         " is not a multiple of head_dim " + std::to_string(d));
  }
  if (positions.size() != rows) {
    throw DimensionError("apply_rope: " + std::to_string(positions.size()) + " positions for " +
                         std::to_string(rows) + " rows");
  }
  std::size_t max_pos = 0;
  for (std::size_t p : positions) max_pos = std::max(max_pos, p);

  // cos/sin table indexed by [position][pair].
  auto table = std::make_shared<std::vector<double>>(2 * (max_pos + 1) * half);
  const std::vector<double> period_values = periods.periods();
  for (std::size_t t = 0; t <= max_pos; ++t) {
    for (std::size_t j = 0; j < half; ++j) {
      const double phi = kTwoPi * static_cast<double>(t) / period_values[j];
      (*table)[2 * (t * half + j)] = std::cos(phi);
      (*table)[2 * (t * half + j) + 1] = std::sin(phi);
    }
  }

  Tensor out = Tensor::zeros(x.shape());
  const double* xv = x.ptr();
  double* o = out.ptr();
  const std::size_t heads = width / d;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* cs = table->data() + 2 * positions[r] * half;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t base = r * width + h * d;
      for (std::size_t j = 0; j < half; ++j) {
        const double c = cs[2 * j], s = cs[2 * j + 1];
        const double a = xv[base + 2 * j], b = xv[base + 2 * j + 1];
        o[base + 2 * j] = a * c - b * s;
        o[base + 2 * j + 1] = a * s + b * c;
      }
    }
  }

  Tensor log_periods = periods.log_periods();
  std::vector<std::size_t> pos(positions.begin(), positions.end());
  g.record(out, {x, log_periods},
           [x, log_periods, out, table, pos = std::move(pos), period_values, rows, width, heads,
            d, half]() mutable {
             const double* gy = out.grad().data();
             const double* y = out.ptr();
             if (x.requires_grad()) {
               double* gx = x.grad().data();
               for (std::size_t r = 0; r < rows; ++r) {
                 const double* cs = table->data() + 2 * pos[r] * half;
                 for (std::size_t h = 0; h < heads; ++h) {
                   const std::size_t base = r * width + h * d;
                   for (std::size_t j = 0; j < half; ++j) {
                     const double c = cs[2 * j], s = cs[2 * j + 1];
                     const double g1 = gy[base + 2 * j], g2 = gy[base + 2 * j + 1];
                     gx[base + 2 * j] += g1 * c + g2 * s;
                     gx[base + 2 * j + 1] += -g1 * s + g2 * c;
                   }
                 }
               }
             }
             if (log_periods.requires_grad()) {
               // d(phi)/d(log P_j) = -phi, and d(y)/d(phi) = (-y2, y1).
               double* gl = log_periods.grad().data();
               for (std::size_t r = 0; r < rows; ++r) {
                 const double t = static_cast<double>(pos[r]);
                 for (std::size_t h = 0; h < heads; ++h) {
                   const std::size_t base = r * width + h * d;
                   for (std::size_t j = 0; j < half; ++j) {
                     const double phi = kTwoPi * t / period_values[j];
                     const double y1 = y[base + 2 * j], y2 = y[base + 2 * j + 1];
                     const double g1 = gy[base + 2 * j], g2 = gy[base + 2 * j + 1];
                     gl[j] -= phi * (g2 * y1 - g1 * y2);
                   }
                 }
               }
             }
           });
  return out;
}

}  // namespace elastst
