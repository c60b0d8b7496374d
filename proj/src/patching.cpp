// SPDX-License-Identifier: Apache-2.0
#include "elastst/patching.hpp"

#include <algorithm>
#include <string>

#include "elastst/errors.hpp"

namespace elastst {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

PatchGrid segment(const Window& w, std::size_t patch_size) {
  if (patch_size == 0) throw ParameterError("segment: patch size must be positive");
  if (w.context.empty()) throw ParameterError("segment: context must hold at least one value");
  if (w.horizon_len == 0) throw ParameterError("segment: horizon must be at least one step");

  const std::size_t L = w.context.size();
  const std::size_t T = w.horizon_len;
  PatchGrid g;
  g.patch_size = patch_size;
  g.context_patches = ceil_div(L, patch_size);
  g.horizon_patches = ceil_div(T, patch_size);
  g.left_pad = g.context_patches * patch_size - L;
  g.right_pad = g.horizon_patches * patch_size - T;
  g.patches.assign(g.num_patches() * patch_size, 0.0);
  std::copy(w.context.begin(), w.context.end(), g.patches.begin() + static_cast<long>(g.left_pad));
  g.is_placeholder.assign(g.num_patches(), false);
  std::fill(g.is_placeholder.begin() + static_cast<long>(g.context_patches),
            g.is_placeholder.end(), true);
  return g;
}

std::vector<bool> attention_key_mask(const PatchGrid& g) {
  std::vector<bool> mask(g.num_patches());
  for (std::size_t n = 0; n < mask.size(); ++n) mask[n] = !g.is_placeholder[n];
  return mask;
}

std::vector<double> unpatch(std::span<const double> horizon_rows, std::size_t rows,
                            std::size_t width, const PatchGrid& g) {
  if (rows != g.horizon_patches || width != g.patch_size || horizon_rows.size() != rows * width) {
    throw DimensionError("unpatch: got " + std::to_string(rows) + "x" + std::to_string(width) +
                         " rows, grid expects " + std::to_string(g.horizon_patches) + "x" +
                         std::to_string(g.patch_size));
  }
  const std::size_t T = rows * width - g.right_pad;
  return std::vector<double>(horizon_rows.begin(), horizon_rows.begin() + static_cast<long>(T));
}

}  // namespace elastst
