#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "holomem/config.hpp"
#include "holomem/engine.hpp"
#include "holomem/ensemble.hpp"
#include "holomem/experiments.hpp"
#include "holomem/report.hpp"
#include "holomem/sequence.hpp"

namespace holomem::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int parse = 1;
inline constexpr int config = 2;
inline constexpr int runtime = 3;
inline constexpr int unknown_experiment = 4;
inline constexpr int comparison_failed = 5;
}  // namespace exit_code

/// Options shared by every subcommand.
struct Common {
  std::vector<std::string> sets;  // key=value
  std::optional<unsigned> threads;
  std::string command;            // recorded in the manifest
};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

// Carries an exit code up to the subcommand boundary.
struct Failure {
  int code;
  std::string message;
};

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Failure{exit_code::runtime, "cannot read " + path};
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline ConfigMap load_config_or_fail(const std::string& path) {
  if (path.empty()) return {};
  if (!std::filesystem::exists(path)) throw Failure{exit_code::config, "config file not found: " + path};
  try {
    return load_config(path);
  } catch (const std::exception& ex) {
    throw Failure{exit_code::config, path + ": " + ex.what()};
  }
}

inline std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Failure{exit_code::config, "expected key=value, got '" + s + "'"};
  return {std::string(holomem::detail::trim(s.substr(0, eq))), std::string(holomem::detail::trim(s.substr(eq + 1)))};
}

inline seq::SequenceAst parse_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return seq::parse_sequence(text);
  } catch (const seq::SequenceError& ex) {
    throw Failure{exit_code::parse, path + ":" + ex.what()};
  }
}

inline bool declares(const seq::SequenceAst& ast, const std::string& name) {
  const auto names = seq::declared_parameters(ast);
  return std::find(names.begin(), names.end(), name) != names.end();
}

/// One sequence execution: config keys and sequence bindings already split.
struct RunInputs {
  ConfigMap config;
  seq::ParamMap params;
  unsigned threads = 1;
};

inline RunInputs resolve_run_inputs(const ConfigMap& file_cfg, const Common& common,
                                    const seq::SequenceAst& ast) {
  RunInputs in;
  for (const auto& [k, v] : file_cfg) {
    if (k == "threads") continue;
    if (!ensemble_keys().count(k)) throw Failure{exit_code::config, "unknown config key '" + k + "'"};
    in.config[k] = v;
  }
  in.threads = static_cast<unsigned>(config_integer(file_cfg, "threads", 1));
  for (const auto& s : common.sets) {
    const auto [k, v] = split_assignment(s);
    if (k == "threads")
      in.threads = static_cast<unsigned>(config_integer({{k, v}}, k, 1));
    else if (ensemble_keys().count(k))
      in.config[k] = v;
    else if (declares(ast, k))
      in.params[k] = v;
    else
      throw Failure{exit_code::config, "unknown config key or sequence parameter '" + k + "'"};
  }
  if (common.threads) in.threads = *common.threads;
  return in;
}

inline EnsembleConfig ensemble_or_fail(const ConfigMap& cfg) {
  try {
    return ensemble_config(cfg);
  } catch (const std::exception& ex) {
    throw Failure{exit_code::config, ex.what()};
  }
}

inline ConfigMap resolved_config(const EnsembleConfig& ec, const seq::ParamMap& params) {
  ConfigMap out = describe(ec);
  for (const auto& [k, v] : params) out["param." + k] = v;
  return out;
}

inline std::vector<Signal> execute(const seq::SequenceAst& ast, const seq::ParamMap& params,
                                   const EnsembleConfig& ec, unsigned threads,
                                   const std::string& seq_path) {
  std::vector<SequenceEvent> events;
  try {
    events = seq::compile(ast, params);
  } catch (const seq::SequenceError& ex) {
    throw Failure{exit_code::parse, seq_path + ":" + ex.what()};
  }
  try {
    Ensemble e = build_ensemble(ec);
    Engine engine(threads);
    return engine.run(e, events).signals;
  } catch (const std::exception& ex) {
    throw Failure{exit_code::runtime, ex.what()};
  }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Window-mean echo over a whole acquisition.
inline EchoReport acquisition_echo(const Signal& s) {
  if (s.size() == 1) {
    EchoReport r;
    r.t_center = s.t[0];
    r.amplitude = s.m_plus[0];
    r.intensity = std::norm(r.amplitude);
    return r;
  }
  const double lo = s.t.front(), hi = s.t.back();
  return integrate_echo(s, 0.5 * (lo + hi), 0.5 * (hi - lo));
}

template <class F>
int guarded(Streams io, F&& body) {
  try {
    return body();
  } catch (const Failure& f) {
    io.err << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& ex) {
    io.err << "error: " << ex.what() << "\n";
    return exit_code::runtime;
  }
}

}  // namespace detail

/// Runs one sequence file and writes its Signal CSV plus `<out>.manifest.json`.
inline int cmd_run(const std::string& seq_path, const std::string& config_path,
                   std::optional<std::uint64_t> seed, const std::string& out_path,
                   const Common& common, Streams io) {
  return detail::guarded(io, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto ast = detail::parse_file(seq_path);
    auto in = detail::resolve_run_inputs(detail::load_config_or_fail(config_path), common, ast);
    if (seed) in.config["seed"] = std::to_string(*seed);
    const EnsembleConfig ec = detail::ensemble_or_fail(in.config);
    const auto signals = detail::execute(ast, in.params, ec, in.threads, seq_path);

    write_atomic(out_path, signal_csv(signals));
    RunManifest m;
    m.command = common.command;
    m.config = detail::resolved_config(ec, in.params);
    m.config_digest = config_digest(m.config);
    m.seed = ec.seed;
    m.outputs = {out_path};
    m.wall_time = detail::seconds_since(t0);
    write_atomic(out_path + ".manifest.json", manifest_json(m).dump(2) + "\n");
    std::size_t samples = 0;
    for (const auto& s : signals) samples += s.size();
    io.out << "wrote " << out_path << " (" << signals.size() << " acquisitions, " << samples
           << " samples)\n";
    return exit_code::ok;
  });
}

/// Runs a canned experiment and writes `<name>.json`, curve CSVs, signal
/// CSVs and `<name>.manifest.json` into `out_dir`.
inline int cmd_experiment(const std::string& name, const std::string& config_path,
                          const std::string& out_dir, const Common& common, Streams io) {
  return detail::guarded(io, [&] {
    if (!is_experiment(name)) {
      std::string known;
      for (const auto& n : experiment_names()) known += " " + n;
      throw detail::Failure{exit_code::unknown_experiment,
                            "unknown experiment '" + name + "' (known:" + known + ")"};
    }
    const auto t0 = std::chrono::steady_clock::now();
    ConfigMap overrides = detail::load_config_or_fail(config_path);
    for (const auto& s : common.sets) {
      const auto [k, v] = detail::split_assignment(s);
      overrides[k] = v;
    }
    if (common.threads) overrides["threads"] = std::to_string(*common.threads);

    ExperimentResult r;
    try {
      r = run_experiment(name, overrides);
    } catch (const ConfigError& ex) {
      throw detail::Failure{exit_code::config, ex.what()};
    }

    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    std::vector<std::string> outputs;
    auto emit = [&](const std::string& file, const std::string& content) {
      const fs::path p = dir / file;
      write_atomic(p, content);
      outputs.push_back(p.string());
    };
    emit(name + ".json", experiment_json(r).dump(2) + "\n");
    for (const auto& [curve, rows] : r.curves) emit(curve + ".csv", curve_csv(rows));
    for (std::size_t i = 0; i < r.signals.size(); ++i)
      emit(name + "_signal_" + std::to_string(i) + ".csv", signal_csv({r.signals[i]}));

    RunManifest m;
    m.command = common.command;
    m.config = r.config;
    m.config_digest = r.config_digest;
    m.seed = r.seed;
    m.outputs = outputs;
    m.wall_time = detail::seconds_since(t0);
    write_atomic(dir / (name + ".manifest.json"), manifest_json(m).dump(2) + "\n");

    for (const auto& c : r.comparisons)
      io.out << (c.pass ? "PASS " : "FAIL ") << name << "." << c.name << " value=" << csv_number(c.value)
             << " theory=" << csv_number(c.theory) << " tol=" << csv_number(c.tolerance) << "\n";
    return r.passed() ? exit_code::ok : exit_code::comparison_failed;
  });
}

/// Splits a comma-separated value list, dropping surrounding blanks.
inline std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, ',')) {
    const auto t = std::string(holomem::detail::trim(item));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

/// Runs the sequence once per value of `param` (a config key or a `let`
/// parameter of the sequence). Writes `point_<k>.csv` per value, an
/// aggregated `sweep.csv` in value order and `manifest.json`.
inline int cmd_sweep(const std::string& config_path, const std::string& param,
                     const std::string& values_text, const std::string& seq_path,
                     const std::string& out_dir, const Common& common, Streams io) {
  return detail::guarded(io, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto values = split_values(values_text);
    if (values.empty()) throw detail::Failure{exit_code::config, "empty value list for --values"};
    const auto ast = detail::parse_file(seq_path);
    const bool is_config = ensemble_keys().count(param) > 0;
    if (!is_config && !detail::declares(ast, param))
      throw detail::Failure{exit_code::config,
                            "'" + param + "' is neither a config key nor a parameter of " + seq_path};
    const auto base = detail::resolve_run_inputs(detail::load_config_or_fail(config_path), common, ast);

    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    std::vector<std::string> outputs;
    std::vector<std::vector<EchoReport>> echoes(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
      auto in = base;
      if (is_config)
        in.config[param] = values[k];
      else
        in.params[param] = values[k];
      const EnsembleConfig ec = detail::ensemble_or_fail(in.config);
      const auto signals = detail::execute(ast, in.params, ec, in.threads, seq_path);
      for (const auto& s : signals) echoes[k].push_back(detail::acquisition_echo(s));
      const fs::path p = dir / ("point_" + std::to_string(k) + ".csv");
      write_atomic(p, signal_csv(signals));
      outputs.push_back(p.string());
    }

    std::size_t columns = 0;
    for (const auto& e : echoes) columns = std::max(columns, e.size());
    std::string csv = param;
    for (std::size_t j = 0; j < columns; ++j) {
      const std::string p = "echo" + std::to_string(j) + "_";
      csv += "," + p + "t_us," + p + "re," + p + "im," + p + "intensity";
    }
    csv += "\n";
    for (std::size_t k = 0; k < values.size(); ++k) {
      csv += values[k];
      for (std::size_t j = 0; j < columns; ++j) {
        if (j < echoes[k].size()) {
          const auto& e = echoes[k][j];
          csv += "," + csv_number(e.t_center * 1e6) + "," + csv_number(e.amplitude.real()) + "," +
                 csv_number(e.amplitude.imag()) + "," + csv_number(e.intensity);
        } else {
          csv += ",,,,";
        }
      }
      csv += "\n";
    }
    const fs::path agg = dir / "sweep.csv";
    write_atomic(agg, csv);
    outputs.insert(outputs.begin(), agg.string());

    RunManifest m;
    m.command = common.command;
    m.config = detail::resolved_config(detail::ensemble_or_fail(base.config), base.params);
    m.config["sweep.param"] = param;
    m.config["sweep.values"] = values_text;
    m.config_digest = config_digest(m.config);
    m.seed = config_integer(m.config, "seed", 1);
    m.outputs = outputs;
    m.wall_time = detail::seconds_since(t0);
    write_atomic(dir / "manifest.json", manifest_json(m).dump(2) + "\n");
    io.out << "wrote " << agg.string() << " (" << values.size() << " points)\n";
    return exit_code::ok;
  });
}

/// Full command-line entry point.
inline int main(int argc, const char* const* argv, Streams io) {
  CLI::App app{"Spin-ensemble echo memory simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  unsigned threads = 0;
  app.add_option("--set", common.sets, "Override a config key or sequence parameter (key=value)")
      ->take_all()
      ->allow_extra_args(false);
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string seq_path, config_path, out_path, out_dir = ".", name, param, values;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "Run a sequence file");
  run->add_option("--seq", seq_path, "Sequence file")->required();
  run->add_option("--config", config_path, "Ensemble config file");
  auto* seed_opt = run->add_option("--seed", seed, "Ensemble seed");
  run->add_option("--out", out_path, "Signal CSV path")->required();

  auto* exp = app.add_subcommand("experiment", "Run a canned experiment");
  exp->add_option("name", name, "Experiment name")->required();
  exp->add_option("--config", config_path, "Config file");
  exp->add_option("--out-dir", out_dir, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter of a sequence run");
  sweep->add_option("--config", config_path, "Ensemble config file");
  sweep->add_option("--param", param, "Config key or sequence parameter")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--seq", seq_path, "Sequence file")->required();
  sweep->add_option("--out-dir", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return exit_code::ok;
  } catch (const CLI::CallForAllHelp&) {
    io.out << app.help("", CLI::AppFormatMode::All);
    return exit_code::ok;
  } catch (const CLI::ParseError& ex) {
    io.err << "error: " << ex.what() << "\n";
    return exit_code::config;
  }

  if (threads_opt->count()) common.threads = threads;
  for (int i = 0; i < argc; ++i) common.command += (i ? " " : "") + std::string(argv[i]);

  if (run->parsed())
    return cmd_run(seq_path, config_path,
                   seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, out_path,
                   common, io);
  if (exp->parsed()) return cmd_experiment(name, config_path, out_dir, common, io);
  return cmd_sweep(config_path, param, values, seq_path, out_dir, common, io);
}

}  // namespace holomem::cli
