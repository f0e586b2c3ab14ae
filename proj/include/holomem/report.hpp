#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "holomem/analysis.hpp"
#include "holomem/engine.hpp"
#include "holomem/experiments.hpp"

namespace holomem {

using Json = nlohmann::ordered_json;

/// Fixed 12-significant-digit formatting for CSV cells.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Signal CSV with columns t_us, re, im. Several signals are concatenated.
inline std::string signal_csv(const std::vector<Signal>& signals) {
  std::string out = "t_us,re,im\n";
  for (const auto& s : signals)
    for (std::size_t i = 0; i < s.size(); ++i)
      out += csv_number(s.t[i] * 1e6) + "," + csv_number(s.m_plus[i].real()) + "," +
             csv_number(s.m_plus[i].imag()) + "\n";
  return out;
}

inline std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::string out = "x,measured,theory\n";
  for (const auto& r : rows)
    out += csv_number(r.x) + "," + csv_number(r.measured) + "," + csv_number(r.theory) + "\n";
  return out;
}

inline Json number_json(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json echo_json(const EchoReport& e) {
  return Json{{"t_us", number_json(e.t_center * 1e6)},
              {"re", number_json(e.amplitude.real())},
              {"im", number_json(e.amplitude.imag())},
              {"intensity", number_json(e.intensity)},
              {"symbol", to_string(e.symbol)}};
}

inline Json config_json(const ConfigMap& cfg) {
  Json j = Json::object();
  for (const auto& [k, v] : cfg) j[k] = v;
  return j;
}

inline Json experiment_json(const ExperimentResult& r) {
  Json j;
  j["experiment"] = r.experiment;
  j["config_digest"] = r.config_digest;
  j["seed"] = r.seed;
  j["passed"] = r.passed();
  j["echoes"] = Json::array();
  for (const auto& e : r.echoes) j["echoes"].push_back(echo_json(e));
  j["comparisons"] = Json::array();
  for (const auto& c : r.comparisons)
    j["comparisons"].push_back(Json{{"name", c.name},
                                    {"value", number_json(c.value)},
                                    {"theory", number_json(c.theory)},
                                    {"tolerance", number_json(c.tolerance)},
                                    {"pass", c.pass}});
  if (!r.crosstalk.empty()) {
    j["crosstalk"] = Json::array();
    for (const auto& x : r.crosstalk)
      j["crosstalk"].push_back(Json{{"theta1_pi", number_json(x.theta1 / pi)},
                                    {"theta2_pi", number_json(x.theta2 / pi)},
                                    {"D1", number_json(x.D1)},
                                    {"D1_theory", number_json(x.D1_theory)},
                                    {"D2", number_json(x.D2)},
                                    {"D2_theory", number_json(x.D2_theory)}});
  }
  j["config"] = config_json(r.config);
  return j;
}

/// Writes via a sibling temporary file and rename, so readers never see a
/// partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    if (!f.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  double wall_time = 0.0;  // s
  ConfigMap config;
};

inline Json manifest_json(const RunManifest& m) {
  return Json{{"command", m.command},         {"config_digest", m.config_digest},
              {"seed", m.seed},               {"outputs", m.outputs},
              {"wall_time", m.wall_time},     {"config", config_json(m.config)}};
}

}  // namespace holomem
