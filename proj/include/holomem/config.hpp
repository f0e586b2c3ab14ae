#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "holomem/ensemble.hpp"

namespace holomem {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key = value settings. Later assignments override earlier ones.
using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Lines are `key = value`; `#` starts a comment.
inline ConfigMap parse_config(std::string_view text) {
  ConfigMap out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
    out[std::string(key)] = std::string(value);
  }
  return out;
}

inline ConfigMap load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// Applies a `key=value` override.
inline void apply_override(ConfigMap& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  const auto key = detail::trim(assignment.substr(0, eq));
  const auto value = detail::trim(assignment.substr(eq + 1));
  if (key.empty() || value.empty())
    throw ConfigError("override '" + std::string(assignment) + "' has an empty side");
  cfg[std::string(key)] = std::string(value);
}

inline double config_number(const ConfigMap& cfg, const std::string& key, double fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  const std::string& v = it->second;
  if (v == "inf" || v == "infinity") return infinity;
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("key '" + key + "': '" + v + "' is not a number");
  return out;
}

inline std::uint64_t config_integer(const ConfigMap& cfg, const std::string& key,
                                    std::uint64_t fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  const std::string& v = it->second;
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("key '" + key + "': '" + v + "' is not a non-negative integer");
  return out;
}

inline std::string config_string(const ConfigMap& cfg, const std::string& key,
                                 std::string fallback) {
  const auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

inline const std::set<std::string>& ensemble_keys() {
  static const std::set<std::string> keys = {
      "n_spins",   "profile", "d_mm",  "r0_mm",  "T2_us",
      "T2star_us", "T1_us",   "T2n_ms", "static_gradient_mT_m",
      "gamma_ratio_nuclear",  "b1_beta", "detuning_dist", "seed",
      "sampling",  "transfer_fidelity"};
  return keys;
}

/// Resolves the ensemble keys of a config map on top of `base`.
inline EnsembleConfig ensemble_config(const ConfigMap& cfg, EnsembleConfig base = {}) {
  EnsembleConfig c = base;
  try {
    c.n_spins = config_integer(cfg, "n_spins", c.n_spins);
    if (cfg.count("profile")) c.geometry.profile = profile_from_string(cfg.at("profile"));
    auto scaled = [&](const char* key, double& field, double scale) {
      if (cfg.count(key)) field = config_number(cfg, key, 0.0) * scale;
    };
    scaled("d_mm", c.geometry.d, 1e-3);
    scaled("r0_mm", c.geometry.r0, 1e-3);
    scaled("T2_us", c.relaxation.T2, 1e-6);
    scaled("T2star_us", c.relaxation.T2_star, 1e-6);
    scaled("T1_us", c.relaxation.T1, 1e-6);
    scaled("T2n_ms", c.relaxation.T2n, 1e-3);
    scaled("static_gradient_mT_m", c.static_gradient, 1e-3);
    c.gamma_ratio_nuclear = config_number(cfg, "gamma_ratio_nuclear", c.gamma_ratio_nuclear);
    c.b1_beta = config_number(cfg, "b1_beta", c.b1_beta);
    if (cfg.count("detuning_dist")) {
      const auto& d = cfg.at("detuning_dist");
      if (d == "lorentzian") c.detuning = DetuningDistribution::Lorentzian;
      else if (d == "gaussian") c.detuning = DetuningDistribution::Gaussian;
      else throw ConfigError("detuning_dist must be lorentzian or gaussian");
    }
    if (cfg.count("sampling")) {
      const auto& s = cfg.at("sampling");
      if (s == "montecarlo") c.sampling = SamplingMode::MonteCarlo;
      else if (s == "grid") c.sampling = SamplingMode::Grid;
      else throw ConfigError("sampling must be montecarlo or grid");
    }
    c.transfer_fidelity = config_number(cfg, "transfer_fidelity", c.transfer_fidelity);
    c.seed = config_integer(cfg, "seed", c.seed);
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what());
  }
  return c;
}

namespace detail {

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Every ensemble key with its resolved value, in key order.
inline ConfigMap describe(const EnsembleConfig& c) {
  using detail::format_number;
  return {
      {"n_spins", std::to_string(c.n_spins)},
      {"profile", std::string(to_string(c.geometry.profile))},
      {"d_mm", format_number(c.geometry.d * 1e3)},
      {"r0_mm", format_number(c.geometry.r0 * 1e3)},
      {"T2_us", format_number(c.relaxation.T2 * 1e6)},
      {"T2star_us", format_number(c.relaxation.T2_star * 1e6)},
      {"T1_us", format_number(c.relaxation.T1 * 1e6)},
      {"T2n_ms", format_number(c.relaxation.T2n * 1e3)},
      {"static_gradient_mT_m", format_number(c.static_gradient * 1e3)},
      {"gamma_ratio_nuclear", format_number(c.gamma_ratio_nuclear)},
      {"b1_beta", format_number(c.b1_beta)},
      {"detuning_dist", std::string(to_string(c.detuning))},
      {"sampling", std::string(to_string(c.sampling))},
      {"transfer_fidelity", format_number(c.transfer_fidelity)},
      {"seed", std::to_string(c.seed)},
  };
}

/// FNV-1a over the canonical `key=value` listing of a resolved config.
inline std::string config_digest(const ConfigMap& resolved) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::string_view s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : resolved) {
    feed(k);
    feed("=");
    feed(v);
    feed("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace holomem
