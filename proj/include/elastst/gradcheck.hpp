// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "elastst/graph.hpp"
#include "elastst/tensor.hpp"

namespace elastst {

// Builds a scalar loss from the current parameter values.
using LossFn = std::function<Tensor(Graph&)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> entries;  // one per parameter tensor
};

// Compares analytic gradients against central differences
// (f(p+h) - f(p-h)) / 2h, element by element. The relative error of one
// element is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// Parameter values are restored on return; their grads hold the analytic
// gradient.
GradCheckReport finite_diff_check(const LossFn& f, std::vector<Tensor> params, double step,
                                  std::vector<std::string> names = {});

}  // namespace elastst
