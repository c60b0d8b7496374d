// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "elastst/model.hpp"

namespace elastst {

// On-disk layout:
//
//   ELASTST-CKPT v1
//   key=value            (config echo, one pair per line, sorted by key)
//   ...
//   <blank line>
//   name rows cols       (then rows*cols little-endian IEEE-754 doubles)
//   ...
struct CheckpointFile {
  std::map<std::string, std::string> entries;
  std::vector<NamedTensor> tensors;
};

inline constexpr const char* kCheckpointMagic = "ELASTST-CKPT v1";

void write_checkpoint(std::ostream& os, const CheckpointFile& file);
CheckpointFile read_checkpoint(std::istream& is);
void save_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file);
CheckpointFile load_checkpoint_file(const std::filesystem::path& path);

// Model parameters first, then nothing else; extra entries/tensors are kept.
CheckpointFile make_model_checkpoint(const ModelState& state);
// Rebuilds a ModelState from the config echo and the named tensors.
ModelState model_from_checkpoint(const CheckpointFile& file);

std::string format_double(double v);
double parse_double(const std::string& s, const std::string& what);

}  // namespace elastst
