// SPDX-License-Identifier: Apache-2.0
#include "elastst/config.hpp"

#include <fstream>
#include <sstream>

#include "elastst/checkpoint.hpp"
#include "elastst/errors.hpp"

namespace elastst {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<ConfigKey>& RunConfig::known_keys() {
  static const std::vector<ConfigKey> keys = {
      {"data.path", "", "input CSV (timestamp column + one column per variate)"},
      {"data.split", "0.7,0.1,0.2", "train,val,test fractions along time"},
      {"model.patch_sizes", "8,16,32", "ascending patch sizes"},
      {"model.d_model", "64", "latent width D"},
      {"model.n_heads", "4", "attention heads"},
      {"model.head_dim", "16", "per-head width d (even)"},
      {"model.d_ff", "128", "feed-forward width"},
      {"model.n_layers", "2", "encoder blocks"},
      {"model.lookback", "96", "context length L"},
      {"model.instance_norm", "true", "per-window context normalization"},
      {"trope.p_min", "1", "minimum rotary period coefficient"},
      {"trope.p_max", "1000", "maximum rotary period coefficient"},
      {"train.t_max", "720", "maximum training horizon"},
      {"train.reweight_mode", "log-approx", "log-approx | exact-harmonic | fixed-uniform | sampled"},
      {"train.lr", "0.001", "Adam learning rate"},
      {"train.epochs", "50", "epochs"},
      {"train.batches_per_epoch", "100", "batches per epoch"},
      {"train.batch_size", "32", "windows per batch"},
      {"train.seed", "0", "seed for initialization and sampling"},
      {"out.checkpoint", "elastst.ckpt", "checkpoint path (best validation NMAE)"},
      {"out.log", "train_log.csv", "training log CSV path (empty: none)"},
  };
  return keys;
}

std::string RunConfig::describe_keys() {
  std::ostringstream os;
  os << "Configuration keys (file lines `key = value`, or --set key=value):\n";
  for (const ConfigKey& k : known_keys()) {
    os << "  " << k.key << " (default: " << (k.default_value.empty() ? "<required>" : k.default_value)
       << ")\n      " << k.help << '\n';
  }
  return os.str();
}

RunConfig::RunConfig() {
  for (const ConfigKey& k : known_keys()) values_[k.key] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("expected key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::merge_text(std::istream& is, const std::string& source) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.find('=') == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(n) + ": expected key = value");
    }
    try {
      set_assignment(line);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  merge_text(is, path.string());
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

const std::string& RunConfig::require(const std::string& key) const {
  const std::string& v = get(key);
  if (v.empty()) throw ConfigError("missing required config key '" + key + "'");
  return v;
}

std::size_t RunConfig::get_size(const std::string& key) const {
  const std::string& v = require(key);
  std::size_t pos = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size() || v.front() == '-') {
    throw ConfigError("config key '" + key + "' needs a nonnegative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(out);
}

double RunConfig::get_double(const std::string& key) const {
  return parse_double(require(key), "config key '" + key + "'");
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = require(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "' needs true/false, got '" + v + "'");
}

std::vector<std::size_t> RunConfig::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  std::stringstream ss(require(key));
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (item.empty() || pos != item.size() || item.front() == '-') {
      throw ConfigError("config key '" + key + "' has a bad list entry '" + item + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(require(key));
  for (std::string item; std::getline(ss, item, ',');)
    out.push_back(parse_double(trim(item), "config key '" + key + "'"));
  return out;
}

ElasTSTConfig RunConfig::model_config() const {
  ElasTSTConfig c;
  c.patch_sizes = get_size_list("model.patch_sizes");
  c.attention.d_model = get_size("model.d_model");
  c.attention.n_heads = get_size("model.n_heads");
  c.attention.head_dim = get_size("model.head_dim");
  c.attention.d_ff = get_size("model.d_ff");
  c.attention.n_layers = get_size("model.n_layers");
  c.lookback = get_size("model.lookback");
  c.instance_norm = get_bool("model.instance_norm");
  c.period_spec.p_min = get_double("trope.p_min");
  c.period_spec.p_max = get_double("trope.p_max");
  c.period_spec.head_dim = c.attention.head_dim;
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.t_max = get_size("train.t_max");
  try {
    t.reweight_mode = parse_reweight_mode(require("train.reweight_mode"));
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  t.learning_rate = get_double("train.lr");
  t.epochs = get_size("train.epochs");
  t.batches_per_epoch = get_size("train.batches_per_epoch");
  t.batch_size = get_size("train.batch_size");
  t.seed = get_size("train.seed");
  try {
    t.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return t;
}

SplitSpec RunConfig::split_spec() const {
  const std::vector<double> f = get_double_list("data.split");
  if (f.size() != 3) throw ConfigError("config key 'data.split' needs three fractions");
  SplitSpec s{f[0], f[1], f[2]};
  try {
    s.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("config key 'data.split': ") + e.what());
  }
  return s;
}

}  // namespace elastst
