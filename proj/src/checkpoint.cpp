// SPDX-License-Identifier: Apache-2.0
#include "elastst/checkpoint.hpp"

#include <bit>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "elastst/errors.hpp"

namespace elastst {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  if (s.empty()) throw ConfigError("empty number for " + what);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw ConfigError("bad number '" + s + "' for " + what);
  }
  return v;
}

namespace {

void put_le(std::ostream& os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes), 8);
}

double get_le(std::istream& is) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) {
    throw IngestionError("checkpoint: truncated tensor data");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_checkpoint(std::ostream& os, const CheckpointFile& file) {
  os << kCheckpointMagic << '\n';
  for (const auto& [k, v] : file.entries) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw ParameterError("checkpoint: entry '" + k + "' cannot be written");
    }
    os << k << '=' << v << '\n';
  }
  os << '\n';
  for (const NamedTensor& t : file.tensors) {
    os << t.name << ' ' << t.tensor.rows() << ' ' << t.tensor.cols() << '\n';
    for (double v : t.tensor.data()) put_le(os, v);
  }
  if (!os) throw IngestionError("checkpoint: write failed");
}

CheckpointFile read_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointMagic) {
    throw IngestionError("checkpoint: missing '" + std::string(kCheckpointMagic) + "' header");
  }
  CheckpointFile file;
  while (true) {
    if (!std::getline(is, line)) throw IngestionError("checkpoint: truncated config section");
    if (line.empty()) break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IngestionError("checkpoint: bad config line '" + line + "'");
    file.entries[line.substr(0, eq)] = line.substr(eq + 1);
  }
  while (std::getline(is, line)) {
    std::istringstream hs(line);
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(hs >> name >> rows >> cols)) {
      throw IngestionError("checkpoint: bad tensor header '" + line + "'");
    }
    std::vector<double> values(rows * cols);
    for (double& v : values) v = get_le(is);
    file.tensors.push_back({name, Tensor::from({rows, cols}, std::move(values))});
  }
  return file;
}

void save_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IngestionError("cannot write checkpoint " + path.string());
  write_checkpoint(os, file);
}

CheckpointFile load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestionError("cannot open checkpoint " + path.string());
  return read_checkpoint(is);
}

CheckpointFile make_model_checkpoint(const ModelState& state) {
  CheckpointFile file;
  file.entries = model_config_entries(state.config);
  file.tensors = state.parameters();
  return file;
}

ModelState model_from_checkpoint(const CheckpointFile& file) {
  ModelState state = ModelState::init(model_config_from_entries(file.entries), 0);
  std::map<std::string, const Tensor*> by_name;
  for (const NamedTensor& t : file.tensors) by_name[t.name] = &t.tensor;
  for (NamedTensor& p : state.parameters()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw IngestionError("checkpoint: missing parameter " + p.name);
    if (it->second->numel() != p.tensor.numel() || it->second->cols() != p.tensor.cols()) {
      throw IngestionError("checkpoint: parameter " + p.name + " has shape " +
                           shape_str(it->second->shape()) + ", model expects " +
                           shape_str(p.tensor.shape()));
    }
    std::copy(it->second->data().begin(), it->second->data().end(), p.tensor.data().begin());
  }
  return state;
}

}  // namespace elastst
