// SPDX-License-Identifier: Apache-2.0
#include "elastst/commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "elastst/checkpoint.hpp"
#include "elastst/config.hpp"
#include "elastst/data_io.hpp"
#include "elastst/errors.hpp"
#include "elastst/eval.hpp"
#include "elastst/random.hpp"
#include "elastst/training.hpp"

namespace elastst {

ElasTSTConfig tiny_model_config() {
  ElasTSTConfig c;
  c.patch_sizes = {4, 8};
  c.lookback = 16;
  c.attention.d_model = 16;
  c.attention.n_heads = 2;
  c.attention.head_dim = 8;
  c.attention.d_ff = 32;
  c.attention.n_layers = 1;
  c.period_spec.head_dim = 8;
  return c;
}

GradCheckReport model_gradcheck(const ElasTSTConfig& config, std::size_t horizon,
                                std::size_t batch, std::uint64_t seed, double step) {
  ModelState model = ModelState::init(config, seed);
  rng::Engine e = rng::make_engine({seed, 0x67726164});
  // Fresh biases are zero, which makes placeholder queries vanish and hides
  // the q/k/period gradients. Check at a generic point instead.
  for (const NamedTensor& p : model.parameters()) {
    Tensor t = p.tensor;
    for (double& v : t.data()) v += 0.1 * rng::normal(e);
  }
  std::vector<Window> windows(batch);
  std::vector<std::vector<double>> targets(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    windows[b].horizon_len = horizon;
    for (std::size_t i = 0; i < config.lookback; ++i)
      windows[b].context.push_back(rng::normal(e));
    for (std::size_t t = 0; t < horizon; ++t) targets[b].push_back(rng::normal(e));
  }
  std::vector<double> weights(horizon);
  for (std::size_t t = 0; t < horizon; ++t)
    weights[t] = reweight(t + 1, horizon, ReweightMode::kExactHarmonic);

  std::vector<Tensor> params;
  std::vector<std::string> names;
  for (const NamedTensor& p : model.parameters()) {
    params.push_back(p.tensor);
    names.push_back(p.name);
  }
  LossFn loss = [&](Graph& g) {
    const Forecast f = forward(model, g, windows);
    return composite_loss(g, f, targets, weights);
  };
  return finite_diff_check(loss, params, step, names);
}

namespace {

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::size_t threads = 1;
};

RunConfig build_config(const GlobalOptions& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) cfg.merge_file(g.config_path);
  for (const std::string& s : g.overrides) cfg.set_assignment(s);
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  os << text;
  if (!os) throw ConfigError("write failed for " + path);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::size_t> parse_horizons(const std::string& s) {
  RunConfig tmp;
  tmp.set("model.patch_sizes", s);  // reuse the list parser
  std::vector<std::size_t> h = tmp.get_size_list("model.patch_sizes");
  for (std::size_t v : h)
    if (v == 0) throw ConfigError("horizons must be positive");
  if (h.empty()) throw ConfigError("no horizons given");
  return h;
}

int cmd_train(const GlobalOptions& g, const std::string& resume_path, std::ostream& out,
              std::ostream& err) {
  const RunConfig cfg = build_config(g);
  const ElasTSTConfig mc = cfg.model_config();
  const TrainConfig tc = cfg.train_config();
  const SplitSpec spec = cfg.split_spec();
  const std::string ckpt_path = cfg.require("out.checkpoint");
  const Dataset ds = load_csv(cfg.require("data.path"));
  const SplitData data = split_and_scale(ds, spec, mc.lookback + tc.t_max);

  std::optional<Checkpoint> resume;
  if (!resume_path.empty()) resume = load_checkpoint(resume_path);
  const ModelState init = resume ? resume->model.clone() : ModelState::init(mc, tc.seed);

  err << "training on " << ds.name << ": " << ds.length() << " rows x " << ds.variates()
      << " variates, " << init.parameter_count() << " parameters\n";
  auto on_epoch = [&](const EpochLog& row) {
    err << "epoch " << row.epoch << "  loss " << fmt("%.6f", row.train_loss) << "  val_nmae "
        << fmt("%.6f", row.val_nmae) << "  val_nrmse " << fmt("%.6f", row.val_nrmse) << "  ("
        << fmt("%.1f", row.wall_seconds) << "s)\n";
  };
  const TrainResult result = train(init, data, tc, resume ? &*resume : nullptr, on_epoch);

  save_checkpoint(ckpt_path, result.best, tc);
  save_checkpoint(ckpt_path + ".last", result.last, tc);
  if (const std::string& log = cfg.get("out.log"); !log.empty())
    write_text(log, training_log_csv(result.log));
  out << "best validation NMAE: " << fmt("%.6f", result.best.best_val_nmae) << " (epoch "
      << result.best.epoch << ")\n";
  out << "checkpoint: " << ckpt_path << '\n';
  return kExitOk;
}

int cmd_evaluate(const GlobalOptions& g, const std::string& ckpt_path, const std::string& horizons,
                 const std::string& out_path, std::size_t stride, bool baseline, std::ostream& out,
                 std::ostream& err) {
  const RunConfig cfg = build_config(g);
  const std::vector<std::size_t> hs = parse_horizons(horizons);
  const SplitSpec spec = cfg.split_spec();
  const Dataset ds = load_csv(cfg.require("data.path"));
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const std::size_t L = ckpt.model.config.lookback;
  const SplitData data = split_and_scale(ds, spec, 1);

  EvalOptions opts;
  opts.stride = stride;
  opts.threads = g.threads;
  MetricReport report = varied_horizon_eval(ckpt.model, data.test, L, hs, data.scaler, opts);
  report.dataset = ds.name;
  report.checkpoint = ckpt_path;

  std::ostream& table_os = out_path.empty() ? err : out;
  if (out_path.empty()) {
    out << report.to_csv();
  } else {
    write_text(out_path, report.to_csv());
  }
  table_os << report.to_table();
  if (baseline) {
    MetricReport p = persistence_eval(data.test, L, hs, data.scaler, stride);
    table_os << "persistence baseline:\n" << p.to_table();
  }
  return kExitOk;
}

std::size_t resolve_row(const Dataset& ds, const std::string& at) {
  for (std::size_t r = 0; r < ds.length(); ++r)
    if (ds.timestamps[r] == at) return r;
  std::size_t pos = 0;
  unsigned long long idx = 0;
  try {
    idx = std::stoull(at, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != at.size() || at.front() == '-' || idx >= ds.length()) {
    throw ConfigError("--at '" + at + "' is neither a timestamp nor a row index of the dataset");
  }
  return static_cast<std::size_t>(idx);
}

int cmd_forecast(const GlobalOptions& g, const std::string& ckpt_path, std::size_t horizon,
                 const std::string& at, std::size_t variate, const std::string& out_path,
                 std::ostream& out) {
  if (horizon == 0) throw ConfigError("--horizon must be positive");
  const RunConfig cfg = build_config(g);
  const SplitSpec spec = cfg.split_spec();
  const Dataset ds = load_csv(cfg.require("data.path"));
  if (variate >= ds.variates()) {
    throw ConfigError("--variate " + std::to_string(variate) + " out of range, dataset has " +
                      std::to_string(ds.variates()));
  }
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const std::size_t L = ckpt.model.config.lookback;
  const Scaler scaler = split_and_scale(ds, spec, 1).scaler;
  const std::size_t row = at.empty() ? ds.length() - 1 : resolve_row(ds, at);
  if (row + 1 < L) {
    throw SizingError("forecast at row " + std::to_string(row) + " needs " + std::to_string(L) +
                      " rows of context");
  }
  Window w;
  w.horizon_len = horizon;
  for (std::size_t r = row + 1 - L; r <= row; ++r)
    w.context.push_back(scaler.transform(ds.at(r, variate), variate));
  const std::vector<double> pred = forward(ckpt.model, w).values(0);

  std::ostringstream os;
  os << "step,value\n";
  char buf[64];
  for (std::size_t t = 0; t < horizon; ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g\n", t + 1, scaler.inverse(pred[t], variate));
    os << buf;
  }
  if (out_path.empty()) {
    out << os.str();
  } else {
    write_text(out_path, os.str());
  }
  return kExitOk;
}

int cmd_gradcheck(const GlobalOptions& g, std::ostream& out) {
  const RunConfig cfg = build_config(g);
  const std::uint64_t seed = cfg.get_size("train.seed");
  const ElasTSTConfig tiny = tiny_model_config();
  const GradCheckReport r = model_gradcheck(tiny, 16, 2, seed);
  const double tol = 1e-4;
  char buf[128];
  for (const GradCheckEntry& e : r.entries) {
    std::snprintf(buf, sizeof buf, "%-24s %.3e %s\n", e.name.c_str(), e.max_rel_error,
                  e.max_rel_error < tol ? "ok" : "FAIL");
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "max relative error %.3e (tolerance %.0e)\n", r.max_rel_error, tol);
  out << buf;
  return r.max_rel_error < tol ? kExitOk : kExitNumeric;
}

int cmd_inspect_periods(const std::string& ckpt_path, const std::string& out_path,
                        std::ostream& out) {
  const ModelState model = model_from_checkpoint(load_checkpoint_file(ckpt_path));
  std::ostringstream os;
  os << "j,period\n";
  const std::vector<double> p = model.periods.periods();
  for (std::size_t j = 0; j < p.size(); ++j) os << (j + 1) << ',' << format_double(p[j]) << '\n';
  if (out_path.empty()) {
    out << os.str();
  } else {
    write_text(out_path, os.str());
  }
  return kExitOk;
}

int cmd_make_synthetic(const std::string& out_path, std::size_t length, std::size_t variates,
                       std::uint64_t seed, double noise, std::ostream& out) {
  if (length == 0 || variates == 0) throw ConfigError("--length and --variates must be positive");
  write_csv(out_path, make_sine_dataset(length, variates, seed, noise));
  out << "wrote " << length << " rows x " << variates << " variates to " << out_path << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"elastst: patch transformer forecaster, train once and forecast any horizon"};
  app.footer(RunConfig::describe_keys());
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "key=value configuration file");
  app.add_option("--set", g.overrides, "override one key, e.g. --set train.epochs=5")
      ->allow_extra_args(false);
  app.add_option("--threads", g.threads, "worker threads for evaluation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  std::string resume_path;
  CLI::App* train = app.add_subcommand("train", "train a model and write the best checkpoint");
  train->add_option("--resume", resume_path, "continue from a checkpoint (e.g. <ckpt>.last)");

  std::string ckpt_path, out_path, horizons = "96,192,336,720,1024", at;
  std::size_t stride = 0, horizon = 0, variate = 0;
  bool baseline = false;
  CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  evaluate->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  evaluate->add_option("--horizons", horizons, "comma-separated horizons")->capture_default_str();
  evaluate->add_option("--out", out_path, "metrics CSV path (default: stdout)");
  evaluate->add_option("--stride", stride, "window stride (0: horizon)")->capture_default_str();
  evaluate->add_flag("--baseline", baseline, "also report the persistence baseline");

  CLI::App* forecast = app.add_subcommand("forecast", "forecast one variate from a point in time");
  forecast->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  forecast->add_option("--horizon", horizon, "forecast length")->required();
  forecast->add_option("--at", at, "timestamp or row index ending the context (default: last)");
  forecast->add_option("--variate", variate, "variate column, 0-based")->capture_default_str();
  forecast->add_option("--out", out_path, "CSV path (default: stdout)");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check on a tiny model");

  CLI::App* inspect = app.add_subcommand("inspect-periods", "print the learned rotary periods");
  inspect->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  inspect->add_option("--out", out_path, "CSV path (default: stdout)");

  std::size_t length = 6000, variates = 4;
  std::uint64_t seed = 0;
  double noise = 0.1;
  CLI::App* synth = app.add_subcommand("make-synthetic", "write a noisy multi-sine dataset");
  synth->add_option("--out", out_path, "CSV path")->required();
  synth->add_option("--length", length, "rows")->capture_default_str();
  synth->add_option("--variates", variates, "columns")->capture_default_str();
  synth->add_option("--seed", seed, "seed")->capture_default_str();
  synth->add_option("--noise", noise, "noise standard deviation")->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(g, resume_path, out, err);
    if (evaluate->parsed())
      return cmd_evaluate(g, ckpt_path, horizons, out_path, stride, baseline, out, err);
    if (forecast->parsed()) return cmd_forecast(g, ckpt_path, horizon, at, variate, out_path, out);
    if (gradcheck->parsed()) return cmd_gradcheck(g, out);
    if (inspect->parsed()) return cmd_inspect_periods(ckpt_path, out_path, out);
    if (synth->parsed()) return cmd_make_synthetic(out_path, length, variates, seed, noise, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IngestionError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const MetricError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::runtime_error& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ContractError& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
  return kExitConfig;
}

}  // namespace elastst
