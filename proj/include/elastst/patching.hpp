// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace elastst {

// A univariate lookback window and the number of future steps requested.
struct Window {
  std::vector<double> context;  // most recent value last
  std::size_t horizon_len = 0;
};

// Patched view of a context window followed by its placeholders.
//
// Context and horizon are padded and segmented separately: the context is
// left-padded with zeros to a multiple of the patch size and the horizon is
// materialized as zeros right-padded to a multiple of it. No patch ever
// mixes observed values with placeholder positions.
struct PatchGrid {
  std::size_t patch_size = 0;
  std::vector<double> patches;     // num_patches() x patch_size, row-major
  std::vector<bool> is_placeholder;
  std::size_t left_pad = 0;
  std::size_t right_pad = 0;
  std::size_t context_patches = 0;
  std::size_t horizon_patches = 0;

  std::size_t num_patches() const { return context_patches + horizon_patches; }
  std::span<const double> patch(std::size_t n) const {
    return std::span<const double>(patches).subspan(n * patch_size, patch_size);
  }
};

std::size_t ceil_div(std::size_t a, std::size_t b);

// Throws ParameterError for patch_size == 0, empty context or zero horizon.
PatchGrid segment(const Window& w, std::size_t patch_size);

// true = usable as an attention key. Placeholder patches are blocked.
std::vector<bool> attention_key_mask(const PatchGrid& g);

// Concatenates horizon patch rows and keeps the first T values.
std::vector<double> unpatch(std::span<const double> horizon_rows, std::size_t rows,
                            std::size_t width, const PatchGrid& g);

}  // namespace elastst
