// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "elastst/data_io.hpp"
#include "elastst/model.hpp"
#include "elastst/training.hpp"

namespace elastst {

struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string help;
};

// Flat key=value run configuration. Lines are `key = value`, `#` starts a
// comment. Unknown keys are rejected; later values override earlier ones.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<ConfigKey>& known_keys();
  // One line per key with its default, for --help.
  static std::string describe_keys();

  void set(const std::string& key, const std::string& value);
  // Accepts "key=value".
  void set_assignment(const std::string& assignment);
  void merge_text(std::istream& is, const std::string& source);
  void merge_file(const std::filesystem::path& path);

  const std::string& get(const std::string& key) const;
  // Like get(), but an empty value is a ConfigError naming the key.
  const std::string& require(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  ElasTSTConfig model_config() const;
  TrainConfig train_config() const;
  SplitSpec split_spec() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace elastst
