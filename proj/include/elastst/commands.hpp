// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "elastst/gradcheck.hpp"
#include "elastst/model.hpp"

namespace elastst {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

// Small model used by the `gradcheck` subcommand: L=16, T=16, p={4,8},
// D=16, one layer, two heads of width 8.
ElasTSTConfig tiny_model_config();

// End-to-end central-difference check of the composite loss on a random
// batch drawn from `seed`, with every parameter jittered away from its
// initial value. One report entry per parameter tensor.
GradCheckReport model_gradcheck(const ElasTSTConfig& config, std::size_t horizon,
                                std::size_t batch, std::uint64_t seed, double step = 1e-5);

// Parses args (without the program name) and runs one subcommand.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace elastst
