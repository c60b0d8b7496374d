// SPDX-License-Identifier: Apache-2.0
#include "elastst/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "elastst/errors.hpp"

namespace elastst {

GradCheckReport finite_diff_check(const LossFn& f, std::vector<Tensor> params, double step,
                                  std::vector<std::string> names) {
  if (!(step > 0.0)) throw ParameterError("finite_diff_check: step must be positive");
  for (Tensor& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  {
    Graph g;
    Tensor loss = f(g);
    if (loss.requires_grad()) g.backward(loss);
  }
  auto evaluate = [&f]() {
    Graph g(false);
    return f(g).item();
  };

  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    GradCheckEntry entry;
    entry.name = i < names.size() ? names[i] : "param" + std::to_string(i);
    auto values = p.data();
    auto analytic = p.grad();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + step;
      const double up = evaluate();
      values[j] = saved - step;
      const double down = evaluate();
      values[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double denom = std::max(1e-8, std::abs(analytic[j]) + std::abs(numeric));
      entry.max_rel_error = std::max(entry.max_rel_error, std::abs(analytic[j] - numeric) / denom);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace elastst
