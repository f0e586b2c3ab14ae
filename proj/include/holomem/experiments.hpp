#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "holomem/analysis.hpp"
#include "holomem/config.hpp"
#include "holomem/engine.hpp"
#include "holomem/ensemble.hpp"
#include "holomem/events.hpp"

namespace holomem {

/// Emits events while tracking absolute time.
class ProgramBuilder {
 public:
  double now() const { return now_; }
  const std::vector<SequenceEvent>& events() const { return events_; }
  std::vector<SequenceEvent> take() { return std::move(events_); }

  ProgramBuilder& pulse(double theta, double phase) {
    events_.push_back(MicrowavePulse{theta, phase});
    return *this;
  }
  ProgramBuilder& rf_pulse(double theta, double phase) {
    events_.push_back(RfPulse{theta, phase});
    return *this;
  }
  ProgramBuilder& transfer(TransferDirection d) {
    events_.push_back(Transfer{d});
    return *this;
  }
  ProgramBuilder& grad(double G, double tau) {
    events_.push_back(GradientPulse{G, tau});
    now_ += tau;
    return *this;
  }
  ProgramBuilder& wait(double t) {
    events_.push_back(Delay{t});
    now_ += t;
    return *this;
  }
  ProgramBuilder& wait_until(double t) {
    if (t < now_ - 1e-15) throw std::logic_error("program timing runs backwards");
    if (t > now_) wait(t - now_);
    return *this;
  }
  ProgramBuilder& acquire(double duration, double dt) {
    events_.push_back(Acquire{duration, dt});
    now_ += duration;
    return *this;
  }
  // Samples land on center - half_width, ..., center + half_width.
  ProgramBuilder& acquire_window(double center, double half_width, double dt) {
    const double steps = std::round(2.0 * half_width / dt);
    wait_until(center - half_width - dt);
    return acquire((steps + 1.0) * dt, dt);
  }

 private:
  double now_ = 0.0;
  std::vector<SequenceEvent> events_;
};

struct Comparison {
  std::string name;
  double value = 0.0;
  double theory = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline Comparison compare(std::string name, double value, double theory, double tolerance) {
  return {std::move(name), value, theory, tolerance,
          std::isfinite(value) && std::abs(value - theory) <= tolerance};
}

struct CurveRow {
  double x = 0.0;
  double measured = 0.0;
  double theory = 0.0;
};

struct ExperimentResult {
  std::string experiment;
  std::string config_digest;
  std::uint64_t seed = 0;
  ConfigMap config;
  std::vector<EchoReport> echoes;
  std::vector<Comparison> comparisons;
  std::map<std::string, std::vector<CurveRow>> curves;
  std::vector<CrosstalkReport> crosstalk;
  std::vector<Signal> signals;

  bool passed() const {
    return std::all_of(comparisons.begin(), comparisons.end(),
                       [](const Comparison& c) { return c.pass; });
  }
  const Comparison& comparison(std::string_view name) const {
    for (const auto& c : comparisons)
      if (c.name == name) return c;
    throw std::out_of_range("no comparison named " + std::string(name));
  }
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"fig1a", "fig1b", "fig2a", "fig2b",
                                                 "fig3a", "fig3b", "crosstalk"};
  return names;
}

inline bool is_experiment(std::string_view name) {
  const auto& n = experiment_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

// Default register contents. The 100-symbol pattern is shipped verbatim in
// sequences/fig3a.seq.
inline constexpr std::string_view kFig3aPattern =
    "+--+---+++---+--+++--+++---++++-+++-+-----+++++++---+-+++--+++-+--+--+++--+-++++++++---+--+---+++-++";
inline constexpr std::string_view kFig3bPattern = "+-++-+--";

inline std::vector<Symbol> symbols_from_pattern(std::string_view pattern) {
  std::vector<Symbol> out;
  for (char c : pattern) {
    if (c == '+') out.push_back(Symbol::PlusX);
    else if (c == '-') out.push_back(Symbol::MinusX);
    else throw ConfigError("symbol pattern may only contain '+' and '-'");
  }
  return out;
}

inline Symbol parse_symbol(std::string_view s) {
  if (s == "+x") return Symbol::PlusX;
  if (s == "-x") return Symbol::MinusX;
  if (s == "+y") return Symbol::PlusY;
  if (s == "-y") return Symbol::MinusY;
  throw ConfigError("unknown phase symbol '" + std::string(s) + "'");
}

/// Protocol keys understood by the experiments, on top of ensemble_keys().
inline const std::set<std::string>& protocol_keys() {
  static const std::set<std::string> keys = {
      "threads",        "grad_mT_m",        "grad_tau_us",      "grad_delay_us",
      "hahn_tau_us",    "second_pi_us",     "pulse_spacing_us", "pi_phase_deg",
      "rf_phase_deg",   "acq_dt_ns",        "echo_half_width_us", "tip_pi",
      "detection_noise", "threshold_factor", "k_max_r0",        "k_points",
      "grid_points",    "theta_min_pi",     "theta_max_pi",     "phase_cycle",
      "n_pulses",       "symbols",          "nuclear_storage_us", "phase1",
      "phase2"};
  return keys;
}

inline bool is_known_key(const std::string& key) {
  return ensemble_keys().count(key) || protocol_keys().count(key);
}

/// Room-temperature fullerene sample with a pulsed gradient coil. The radius
/// places the 30 mT/m x 1.3 us gradient near the first overlap zero.
inline ConfigMap nc60_preset() {
  return {{"n_spins", "100000"},      {"profile", "cylinder"},    {"r0_mm", "0.56"},
          {"T2_us", "80"},            {"T2star_us", "0.2"},       {"T1_us", "inf"},
          {"T2n_ms", "inf"},          {"static_gradient_mT_m", "0"},
          {"gamma_ratio_nuclear", "0.00011"}, {"b1_beta", "0"},
          {"detuning_dist", "lorentzian"},    {"seed", "1"},
          {"grad_mT_m", "30"},        {"grad_tau_us", "1.3"},     {"grad_delay_us", "0.2"},
          {"pi_phase_deg", "90"},     {"acq_dt_ns", "10"}};
}

/// Phosphorus donors in silicon at 9 K in the field of a permanent magnet.
inline ConfigMap psi_preset() {
  return {{"n_spins", "100000"},      {"profile", "cylinder"},    {"r0_mm", "1"},
          {"T2_us", "450"},           {"T2star_us", "1"},         {"T1_us", "inf"},
          {"T2n_ms", "1000"},         {"static_gradient_mT_m", "25"},
          {"gamma_ratio_nuclear", "-0.000615"}, {"b1_beta", "0"},
          {"detuning_dist", "lorentzian"},      {"seed", "1"},
          {"pulse_spacing_us", "3"},  {"tip_pi", "0.009"},        {"pi_phase_deg", "90"},
          {"rf_phase_deg", "90"},     {"acq_dt_ns", "50"},        {"echo_half_width_us", "0.5"}};
}

inline ConfigMap experiment_preset(std::string_view name) {
  if (!is_experiment(name)) throw std::invalid_argument("unknown experiment " + std::string(name));
  if (name == "fig3a" || name == "fig3b") return psi_preset();
  ConfigMap m = nc60_preset();
  if (name == "fig1a" || name == "fig1b") m["hahn_tau_us"] = "4";
  return m;
}

/// Resolved settings for one experiment: the ensemble plus protocol values.
class ExperimentSettings {
 public:
  ExperimentSettings(std::string name, const ConfigMap& overrides)
      : name_(std::move(name)), values_(experiment_preset(name_)) {
    for (const auto& [k, v] : overrides) {
      if (!is_known_key(k)) throw ConfigError("unknown config key '" + k + "'");
      values_[k] = v;
    }
    ensemble_ = ensemble_config(values_);
    threads_ = static_cast<unsigned>(config_integer(values_, "threads", 1));
  }

  const std::string& name() const { return name_; }
  const EnsembleConfig& ensemble() const { return ensemble_; }
  unsigned threads() const { return threads_; }
  const ConfigMap& values() const { return values_; }

  double number(const std::string& key, double fallback) const {
    return config_number(values_, key, fallback);
  }
  std::uint64_t integer(const std::string& key, std::uint64_t fallback) const {
    return config_integer(values_, key, fallback);
  }
  std::string text(const std::string& key, std::string fallback) const {
    return config_string(values_, key, std::move(fallback));
  }

  // Resolved ensemble description merged with the protocol keys; the
  // execution-only key `threads` is left out so digests are comparable.
  ConfigMap resolved() const {
    ConfigMap out = describe(ensemble_);
    for (const auto& [k, v] : values_)
      if (!ensemble_keys().count(k) && k != "threads") out[k] = v;
    return out;
  }

  double us(const std::string& key, double fallback_us) const {
    return number(key, fallback_us) * 1e-6;
  }
  double dt() const { return number("acq_dt_ns", 10.0) * 1e-9; }
  double echo_half_width() const {
    return us("echo_half_width_us", 2.0 * ensemble_.relaxation.T2_star * 1e6);
  }
  double pi_phase() const { return number("pi_phase_deg", 90.0) * pi / 180.0; }
  double rf_phase() const { return number("rf_phase_deg", 90.0) * pi / 180.0; }
  double gradient() const { return number("grad_mT_m", 30.0) * 1e-3; }
  double gradient_tau() const { return us("grad_tau_us", 1.3); }
  double gradient_delay() const { return us("grad_delay_us", 0.2); }
  double noise() const { return number("detection_noise", 0.0); }
  double threshold_factor() const { return number("threshold_factor", 3.0); }

 private:
  std::string name_;
  ConfigMap values_;
  EnsembleConfig ensemble_;
  unsigned threads_ = 1;
};

namespace detail {

// Runs a program on a copy of `base` and returns the acquisitions, with
// optional detection noise seeded per run.
class Runner {
 public:
  Runner(const ExperimentSettings& s, Ensemble base)
      : engine_(s.threads()), base_(std::move(base)), noise_(s.noise()),
        seed_(s.ensemble().seed) {}

  std::vector<Signal> run(const std::vector<SequenceEvent>& events) {
    Ensemble e = base_;
    auto result = engine_.run(e, events);
    for (auto& sig : result.signals)
      add_detection_noise(sig, noise_, seed_ * 0x9e3779b97f4a7c15ULL + (++runs_));
    return std::move(result.signals);
  }

  const Ensemble& base() const { return base_; }
  std::size_t n() const { return base_.size(); }

 private:
  Engine engine_;
  Ensemble base_;
  double noise_;
  std::uint64_t seed_;
  std::uint64_t runs_ = 0;
};

inline double noise_threshold(const ExperimentSettings& s, std::size_t n,
                              const std::vector<double>& tips) {
  double sum = 0.0;
  for (double t : tips) sum += std::sin(t) * std::sin(t);
  double floor = std::sqrt(sum) / std::sqrt(static_cast<double>(n));
  const double noise = s.noise();
  return s.threshold_factor() * std::hypot(floor, noise);
}

inline ExperimentResult start_result(const ExperimentSettings& s) {
  ExperimentResult r;
  r.experiment = s.name();
  r.config = s.resolved();
  r.config_digest = config_digest(r.config);
  r.seed = s.ensemble().seed;
  return r;
}

// First two positive roots of the analytic overlap, by scan and bisection.
inline std::vector<double> overlap_zeros(const SampleGeometry& g, double x_max) {
  const double h = g.half_extent();
  auto f = [&](double x) { return mode_overlap(g, x / h).real(); };
  std::vector<double> roots;
  double prev = f(1e-6);
  for (double x = 0.01; x <= x_max && roots.size() < 2; x += 0.01) {
    const double cur = f(x);
    if ((prev > 0) != (cur > 0)) {
      double lo = x - 0.01, hi = x;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((f(mid) > 0) == (f(lo) > 0) ? lo : hi) = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev = cur;
  }
  return roots;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fig. 1: mode orthogonality and single-pulse gradient recall
// ---------------------------------------------------------------------------

/// pi/2 - G - pi - acquire around the Hahn echo, with the gradient area
/// chosen so that k * (half extent) = x.
inline std::vector<SequenceEvent> fig1a_program(const ExperimentSettings& s, double G) {
  const double T = s.us("hahn_tau_us", 4.0);
  ProgramBuilder p;
  p.pulse(0.5 * pi, 0.0).wait(s.gradient_delay()).grad(G, s.gradient_tau());
  p.wait_until(T).pulse(pi, s.pi_phase());
  p.acquire_window(2.0 * T, s.echo_half_width(), s.dt());
  return p.take();
}

inline ExperimentResult experiment_fig1a(const ExperimentSettings& s,
                                         std::vector<double> k_grid = {}) {
  auto result = detail::start_result(s);
  const auto& g = s.ensemble().geometry;
  const double h = g.half_extent();
  const double gamma = PhysicalConstants().gamma_e();
  const double tau = s.gradient_tau();
  const double T = s.us("hahn_tau_us", 4.0);
  if (k_grid.empty()) {
    const double k_max = s.number("k_max_r0", 12.0);
    const auto points = static_cast<std::size_t>(s.integer("k_points", 49));
    if (points < 2) throw ConfigError("k_points must be at least 2");
    for (std::size_t i = 0; i < points; ++i)
      k_grid.push_back(k_max * static_cast<double>(i) / static_cast<double>(points - 1));
  }

  detail::Runner runner(s, build_ensemble(s.ensemble()));
  const PulseFrame frame = PulseFrame().refocus(s.pi_phase());
  auto echo_at = [&](double x) {
    const double G = x / (h * gamma * tau);
    const auto sig = runner.run(fig1a_program(s, G));
    return frame.to_pulse_frame(integrate_echo(sig.at(0), 2.0 * T, s.echo_half_width()).amplitude);
  };
  const auto ref = echo_at(0.0);
  auto normalized = [&](double x) {
    const auto a = echo_at(x);
    return std::pair{(a * std::conj(ref)).real() / std::norm(ref), std::norm(a) / std::norm(ref)};
  };

  std::vector<double> amp(k_grid.size()), inten(k_grid.size());
  double ss = 0.0;
  auto& intensity_curve = result.curves["fig1a_intensity"];
  auto& amplitude_curve = result.curves["fig1a_amplitude"];
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    const double x = k_grid[i];
    std::tie(amp[i], inten[i]) = x == 0.0 ? std::pair{1.0, 1.0} : normalized(x);
    const double th = mode_overlap(g, x / h).real();
    const double area = x / (h * gamma) * 1e9;  // mT us / m
    intensity_curve.push_back({area, inten[i], th * th});
    amplitude_curve.push_back({area, amp[i], th});
    ss += (inten[i] - th * th) * (inten[i] - th * th);
  }
  const double rms = std::sqrt(ss / static_cast<double>(k_grid.size()));

  // Zeros of the signed amplitude, refined by regula falsi on fresh runs.
  std::vector<double> zeros;
  for (std::size_t i = 0; i + 1 < k_grid.size() && zeros.size() < 2; ++i) {
    if ((amp[i] > 0) == (amp[i + 1] > 0)) continue;
    double lo = k_grid[i], hi = k_grid[i + 1], flo = amp[i], fhi = amp[i + 1];
    double x = lo;
    for (int it = 0; it < 12 && hi - lo > 1e-5; ++it) {
      x = hi - fhi * (hi - lo) / (fhi - flo);
      const double fx = normalized(x).first;
      if ((fx > 0) == (flo > 0)) { lo = x; flo = fx; fhi *= 0.5; }
      else { hi = x; fhi = fx; flo *= 0.5; }
    }
    zeros.push_back(x);
  }

  const auto expected = detail::overlap_zeros(g, 20.0);
  result.comparisons.push_back(compare("k0_intensity", inten.empty() ? 0.0 : inten[0], 1.0, 1e-12));
  result.comparisons.push_back(compare("intensity_rms_deviation", rms, 0.0, 0.01));
  for (std::size_t z = 0; z < 2 && z < expected.size(); ++z) {
    const double found = z < zeros.size() ? zeros[z] : std::nan("");
    result.comparisons.push_back(
        compare("zero_" + std::to_string(z + 1) + "_kr0", found, expected[z], 0.01 * expected[z]));
  }
  (void)T;
  return result;
}

inline std::vector<SequenceEvent> fig1b_program(const ExperimentSettings& s, bool with_gradients) {
  const double T = s.us("hahn_tau_us", 4.0);
  ProgramBuilder p;
  p.pulse(0.5 * pi, 0.0);
  if (with_gradients) p.wait(s.gradient_delay()).grad(s.gradient(), s.gradient_tau());
  p.wait_until(T).pulse(pi, s.pi_phase());
  if (with_gradients) p.wait(s.gradient_delay()).grad(s.gradient(), s.gradient_tau());
  p.acquire_window(2.0 * T, s.echo_half_width(), s.dt());
  return p.take();
}

struct Fig1bOutcome {
  EchoReport recall;
  EchoReport hahn;
  double fidelity = 0.0;
  double recall_peak = 0.0;
  double hahn_peak = 0.0;
};

inline Fig1bOutcome run_fig1b(const ExperimentSettings& s, std::vector<Signal>* signals = nullptr) {
  detail::Runner runner(s, build_ensemble(s.ensemble()));
  const double T = s.us("hahn_tau_us", 4.0);
  const double hw = s.echo_half_width();
  const double thr = detail::noise_threshold(s, runner.n(), {0.5 * pi});
  const PulseFrame frame = PulseFrame().refocus(s.pi_phase());
  const auto hahn_sig = runner.run(fig1b_program(s, false));
  const auto recall_sig = runner.run(fig1b_program(s, true));
  Fig1bOutcome out;
  out.hahn = in_frame(integrate_echo(hahn_sig.at(0), 2.0 * T, hw), frame, thr);
  out.recall = in_frame(integrate_echo(recall_sig.at(0), 2.0 * T, hw), frame, thr);
  out.fidelity = std::abs(out.recall.amplitude) / std::abs(out.hahn.amplitude);
  out.hahn_peak = find_peak(hahn_sig.at(0), 2.0 * T - hw, 2.0 * T + hw);
  out.recall_peak = find_peak(recall_sig.at(0), 2.0 * T - hw, 2.0 * T + hw);
  if (signals) {
    signals->push_back(recall_sig.at(0));
    signals->push_back(hahn_sig.at(0));
  }
  return out;
}

inline ExperimentResult experiment_fig1b(const ExperimentSettings& s) {
  auto result = detail::start_result(s);
  const auto out = run_fig1b(s, &result.signals);
  result.echoes = {out.recall, out.hahn};
  result.comparisons.push_back(compare("fidelity", out.fidelity, 1.0, 1e-3));
  result.comparisons.push_back(
      compare("echo_time_offset_us", std::abs(out.recall_peak - out.hahn_peak) * 1e6, 0.0,
              s.dt() * 1e6 * (1.0 + 1e-6)));
  result.comparisons.push_back(compare("recall_symbol_is_plus_x",
                                       out.recall.symbol == Symbol::PlusX ? 1.0 : 0.0, 1.0, 0.0));
  return result;
}

// ---------------------------------------------------------------------------
// Fig. 2: two registers recalled in either order
// ---------------------------------------------------------------------------

enum class RecallOrder { Same, Inverse };

struct Fig2Timing {
  double spacing, first_pi, second_pi, half_width;
};

inline Fig2Timing fig2_timing(const ExperimentSettings& s) {
  return {s.us("pulse_spacing_us", 3.0), s.us("hahn_tau_us", 8.0), s.us("second_pi_us", 20.0),
          s.echo_half_width()};
}

/// Stores P1 and P2, each followed by a gradient, then recalls them.
///
/// Inverse order: pi, G -> P2 echo, G -> P1 echo.
/// Same order: pi, G, G -> P1 echo, pi, G -> P2 echo.
inline std::vector<SequenceEvent> fig2_program(const ExperimentSettings& s, RecallOrder order,
                                               double theta1, double phase1, double theta2,
                                               double phase2) {
  const auto tm = fig2_timing(s);
  const double G = s.gradient(), tau = s.gradient_tau(), gd = s.gradient_delay();
  const double dt = s.dt();
  ProgramBuilder p;
  p.pulse(theta1, phase1).wait(gd).grad(G, tau);
  p.wait_until(tm.spacing).pulse(theta2, phase2).wait(gd).grad(G, tau);
  p.wait_until(tm.first_pi).pulse(pi, s.pi_phase()).wait(gd).grad(G, tau);
  if (order == RecallOrder::Inverse) {
    const double echo2 = 2.0 * tm.first_pi - tm.spacing;
    p.acquire_window(echo2, tm.half_width, dt);
    p.wait(gd).grad(G, tau);
    p.acquire_window(2.0 * tm.first_pi, tm.half_width, dt);
  } else {
    p.grad(G, tau);
    p.acquire_window(2.0 * tm.first_pi, tm.half_width, dt);
    p.wait_until(tm.second_pi).pulse(pi, s.pi_phase()).wait(gd).grad(G, tau);
    p.acquire_window(2.0 * tm.second_pi - (2.0 * tm.first_pi - tm.spacing), tm.half_width, dt);
  }
  return p.take();
}

struct Fig2Echoes {
  // In echo-time order.
  std::array<EchoReport, 2> echoes;
  // Which stored pulse each echo belongs to (0 = P1, 1 = P2).
  std::array<int, 2> source;
};

namespace detail {

inline Fig2Echoes fig2_echoes(Runner& runner, const ExperimentSettings& s, RecallOrder order,
                              double theta1, double phase1, double theta2, double phase2,
                              double threshold, std::vector<Signal>* keep = nullptr) {
  const auto tm = fig2_timing(s);
  const auto sig = runner.run(fig2_program(s, order, theta1, phase1, theta2, phase2));
  PulseFrame once = PulseFrame().refocus(s.pi_phase());
  PulseFrame twice = PulseFrame(once).refocus(s.pi_phase());
  Fig2Echoes out;
  const double echo_p2 = 2.0 * tm.first_pi - tm.spacing;
  if (order == RecallOrder::Inverse) {
    out.echoes[0] = in_frame(integrate_echo(sig.at(0), echo_p2, tm.half_width), once, threshold);
    out.echoes[1] = in_frame(integrate_echo(sig.at(1), 2.0 * tm.first_pi, tm.half_width), once, threshold);
    out.source = {1, 0};
  } else {
    out.echoes[0] = in_frame(integrate_echo(sig.at(0), 2.0 * tm.first_pi, tm.half_width), once, threshold);
    out.echoes[1] = in_frame(integrate_echo(sig.at(1), 2.0 * tm.second_pi - echo_p2, tm.half_width),
                             twice, threshold);
    out.source = {0, 1};
  }
  if (keep) keep->insert(keep->end(), sig.begin(), sig.end());
  return out;
}

}  // namespace detail

/// Echo reports in echo-time order for one pair of stored phases.
inline std::vector<EchoReport> experiment_fig2(const ExperimentSettings& s, RecallOrder order,
                                               Symbol phase1, Symbol phase2) {
  detail::Runner runner(s, build_ensemble(s.ensemble()));
  const double theta = s.number("tip_pi", 1.0 / 6.0) * pi;
  const double thr = detail::noise_threshold(s, runner.n(), {theta, theta});
  const auto out = detail::fig2_echoes(runner, s, order, theta, phase_of(phase1), theta,
                                       phase_of(phase2), thr);
  return {out.echoes[0], out.echoes[1]};
}

inline ExperimentResult experiment_fig2_full(const ExperimentSettings& s, RecallOrder order) {
  auto result = detail::start_result(s);
  detail::Runner runner(s, build_ensemble(s.ensemble()));
  const double theta = s.number("tip_pi", 1.0 / 6.0) * pi;
  const double thr = detail::noise_threshold(s, runner.n(), {theta, theta});

  std::vector<std::pair<Symbol, Symbol>> pairs = {{Symbol::PlusX, Symbol::MinusX},
                                                  {Symbol::PlusX, Symbol::PlusY}};
  if (s.values().count("phase1") || s.values().count("phase2"))
    pairs = {{parse_symbol(s.text("phase1", "+x")), parse_symbol(s.text("phase2", "-x"))}};

  const auto [d1, d2] = crosstalk_theory(theta, theta);
  const std::array<double, 2> retained = {1.0 - d1, 1.0 - d2};
  for (const auto& [p1, p2] : pairs) {
    const std::array<Symbol, 2> applied = {p1, p2};
    const auto both = detail::fig2_echoes(runner, s, order, theta, phase_of(p1), theta,
                                          phase_of(p2), thr, &result.signals);
    const auto only1 = detail::fig2_echoes(runner, s, order, theta, phase_of(p1), 0.0, 0.0, thr);
    const auto only2 = detail::fig2_echoes(runner, s, order, 0.0, 0.0, theta, phase_of(p2), thr);
    const std::string tag = std::string(to_string(p1)) + "," + std::string(to_string(p2));
    int correct = 0;
    for (int k = 0; k < 2; ++k) {
      const int src = both.source[k];
      result.echoes.push_back(both.echoes[k]);
      correct += both.echoes[k].symbol == applied[src];
      const double alone = std::abs((src == 0 ? only1 : only2).echoes[k].amplitude);
      const double ratio = std::abs(both.echoes[k].amplitude) / (alone * retained[src]);
      result.comparisons.push_back(compare("P" + std::to_string(src + 1) + "_intensity_vs_theory[" + tag + "]",
                                           ratio, 1.0, 0.03));
    }
    result.comparisons.push_back(compare("decoded[" + tag + "]", correct, 2.0, 0.0));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Crosstalk between two stored excitations
// ---------------------------------------------------------------------------

inline std::vector<CrosstalkReport> experiment_crosstalk(const ExperimentSettings& s,
                                                         std::vector<double> theta1_grid = {},
                                                         std::vector<double> theta2_grid = {}) {
  if (theta1_grid.empty() || theta2_grid.empty()) {
    const auto n = static_cast<std::size_t>(s.integer("grid_points", 10));
    if (n < 1) throw ConfigError("grid_points must be positive");
    const double lo = s.number("theta_min_pi", 0.02) * pi, hi = s.number("theta_max_pi", 0.6) * pi;
    std::vector<double> grid;
    for (std::size_t i = 0; i < n; ++i)
      grid.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    if (theta1_grid.empty()) theta1_grid = grid;
    if (theta2_grid.empty()) theta2_grid = grid;
  }
  detail::Runner runner(s, build_ensemble(s.ensemble()));
  const bool cycle = s.integer("phase_cycle", 1) != 0;
  const auto order = RecallOrder::Inverse;
  // Echo 0 belongs to P2, echo 1 to P1.
  auto amplitudes = [&](double t1, double ph1, double t2, double ph2) {
    const auto e = detail::fig2_echoes(runner, s, order, t1, ph1, t2, ph2, 0.0);
    return std::pair{e.echoes[1].amplitude, e.echoes[0].amplitude};
  };
  const std::array<double, 4> cycle_phases = {0.0, 0.5 * pi, pi, 1.5 * pi};
  const std::size_t steps = cycle ? 4 : 1;

  std::map<double, std::complex<double>> alone1, alone2;
  for (double t1 : theta1_grid) alone1[t1] = amplitudes(t1, 0.0, 0.0, 0.0).first;
  for (double t2 : theta2_grid) alone2[t2] = amplitudes(0.0, 0.0, t2, 0.0).second;
  // Phase-sensitive echo size: projection on the undisturbed echo, so an
  // inverted echo counts as negative.
  auto projected = [](std::complex<double> a, std::complex<double> ref) {
    return (a * std::conj(ref)).real() / std::abs(ref);
  };

  std::vector<CrosstalkReport> out;
  for (double t1 : theta1_grid) {
    for (double t2 : theta2_grid) {
      // The other pulse's phase is cycled; terms carrying it average out
      // while the observed register's own echo does not depend on it.
      std::complex<double> p1 = 0.0, p2 = 0.0;
      for (std::size_t c = 0; c < steps; ++c) p1 += amplitudes(t1, 0.0, t2, cycle_phases[c]).first;
      for (std::size_t c = 0; c < steps; ++c) p2 += amplitudes(t1, cycle_phases[c], t2, 0.0).second;
      p1 /= static_cast<double>(steps);
      p2 /= static_cast<double>(steps);
      CrosstalkReport r;
      r.theta1 = t1;
      r.theta2 = t2;
      r.D1 = fractional_change(std::abs(alone1[t1]), projected(p1, alone1[t1]));
      r.D2 = fractional_change(std::abs(alone2[t2]), projected(p2, alone2[t2]));
      std::tie(r.D1_theory, r.D2_theory) = crosstalk_theory(t1, t2);
      out.push_back(r);
    }
  }
  return out;
}

inline ExperimentResult experiment_crosstalk_full(const ExperimentSettings& s) {
  auto result = detail::start_result(s);
  result.crosstalk = experiment_crosstalk(s);
  double e1 = 0.0, e2 = 0.0;
  std::map<double, std::pair<double, double>> d1_range, d2_range;  // by theta2 / theta1
  auto& c1 = result.curves["crosstalk_D1"];
  auto& c2 = result.curves["crosstalk_D2"];
  for (const auto& r : result.crosstalk) {
    e1 = std::max(e1, r.D1_error());
    e2 = std::max(e2, r.D2_error());
    c1.push_back({r.theta2 / pi, r.D1, r.D1_theory});
    c2.push_back({r.theta1 / pi, r.D2, r.D2_theory});
    auto upd = [](auto& m, double key, double v) {
      auto it = m.find(key);
      if (it == m.end()) m[key] = {v, v};
      else it->second = {std::min(it->second.first, v), std::max(it->second.second, v)};
    };
    upd(d1_range, r.theta2, r.D1);
    upd(d2_range, r.theta1, r.D2);
  }
  double spread1 = 0.0, spread2 = 0.0;
  for (const auto& [k, v] : d1_range) spread1 = std::max(spread1, v.second - v.first);
  for (const auto& [k, v] : d2_range) spread2 = std::max(spread2, v.second - v.first);
  result.comparisons.push_back(compare("max_D1_deviation", e1, 0.0, 0.005));
  result.comparisons.push_back(compare("max_D2_deviation", e2, 0.0, 0.005));
  result.comparisons.push_back(compare("D1_spread_over_theta1", spread1, 0.0, 0.005));
  result.comparisons.push_back(compare("D2_spread_over_theta2", spread2, 0.0, 0.005));
  return result;
}

// ---------------------------------------------------------------------------
// Fig. 3: register stack in a static gradient, nuclear storage
// ---------------------------------------------------------------------------

inline std::vector<Symbol> register_symbols(const ExperimentSettings& s, std::string_view fallback) {
  return symbols_from_pattern(s.text("symbols", std::string(fallback)));
}

/// Pulse train at fixed spacing, one refocusing pi pulse one spacing after
/// the last excitation, then a continuous acquisition over all echoes.
inline std::vector<SequenceEvent> fig3a_program(const ExperimentSettings& s,
                                                const std::vector<Symbol>& symbols) {
  const double spacing = s.us("pulse_spacing_us", 3.0);
  const double tip = s.number("tip_pi", 0.009) * pi;
  ProgramBuilder p;
  for (Symbol sym : symbols) p.pulse(tip, phase_of(sym)).wait(spacing);
  const double T = p.now();
  p.pulse(pi, s.pi_phase());
  const double span = T + 0.5 * spacing;
  p.acquire(span, s.dt());
  return p.take();
}

struct StackOutcome {
  std::vector<EchoReport> echoes;    // in echo-time order
  std::vector<Symbol> decoded;       // in echo-time order
  std::vector<double> expected_time;
  std::vector<double> peak_time;
  Signal signal;
};

inline StackOutcome run_fig3a(const ExperimentSettings& s, const std::vector<Symbol>& symbols) {
  detail::Runner runner(s, build_ensemble(s.ensemble()));
  const double spacing = s.us("pulse_spacing_us", 3.0);
  const double tip = s.number("tip_pi", 0.009) * pi;
  const double hw = s.echo_half_width();
  const double thr = detail::noise_threshold(s, runner.n(), std::vector<double>(symbols.size(), tip));
  const auto sig = runner.run(fig3a_program(s, symbols));
  const PulseFrame frame = PulseFrame().refocus(s.pi_phase());
  const double T = spacing * static_cast<double>(symbols.size());
  StackOutcome out;
  for (std::size_t j = symbols.size(); j-- > 0;) {
    const double tj = spacing * static_cast<double>(j);
    const double te = 2.0 * T - tj;
    auto rep = in_frame(integrate_echo(sig.at(0), te, hw, thr), frame, thr);
    out.echoes.push_back(rep);
    out.decoded.push_back(rep.symbol);
    out.expected_time.push_back(te);
    out.peak_time.push_back(find_peak(sig.at(0), te - hw, te + hw));
  }
  out.signal = sig.at(0);
  return out;
}

inline ExperimentResult experiment_fig3a(const ExperimentSettings& s) {
  auto result = detail::start_result(s);
  auto symbols = register_symbols(s, kFig3aPattern);
  if (s.values().count("n_pulses")) symbols.resize(s.integer("n_pulses", symbols.size()), Symbol::PlusX);
  const auto out = run_fig3a(s, symbols);
  result.echoes = out.echoes;
  result.signals.push_back(out.signal);

  const double spacing = s.us("pulse_spacing_us", 3.0);
  const double T = spacing * static_cast<double>(symbols.size());
  int correct = 0;
  double worst_offset = 0.0;
  std::vector<double> delta_t, mag;
  for (std::size_t k = 0; k < out.echoes.size(); ++k) {
    const std::size_t j = symbols.size() - 1 - k;
    correct += out.decoded[k] == symbols[j];
    worst_offset = std::max(worst_offset, std::abs(out.peak_time[k] - out.expected_time[k]));
    delta_t.push_back(T - spacing * static_cast<double>(j));
    mag.push_back(std::abs(out.echoes[k].amplitude));
  }
  const double T2 = s.ensemble().relaxation.T2;
  const auto fit = fit_echo_envelope(delta_t, mag, T2);
  auto& curve = result.curves["fig3a_envelope"];
  for (std::size_t k = 0; k < mag.size(); ++k)
    curve.push_back({delta_t[k] * 1e6, mag[k],
                     fit.amplitude * (std::isfinite(T2) ? std::exp(-2.0 * delta_t[k] / T2) : 1.0)});
  result.comparisons.push_back(compare("decoded_reverse_order", correct,
                                       static_cast<double>(symbols.size()), 0.0));
  result.comparisons.push_back(
      compare("echo_time_mirror_offset_us", worst_offset * 1e6, 0.0, s.dt() * 1e6 * (1.0 + 1e-6)));
  result.comparisons.push_back(compare("envelope_rms_relative", fit.rms_relative, 0.0, 0.02));
  return result;
}

/// Pulse train, transfer to the nuclei, rf pi halfway through the nuclear
/// storage interval, transfer back, acquisition over the returning echoes.
inline std::vector<SequenceEvent> fig3b_program(const ExperimentSettings& s,
                                                const std::vector<Symbol>& symbols,
                                                bool return_transfer = true) {
  const double spacing = s.us("pulse_spacing_us", 3.0);
  const double tip = s.number("tip_pi", 0.009) * pi;
  const double storage = s.us("nuclear_storage_us", 1000.0);
  ProgramBuilder p;
  for (Symbol sym : symbols) p.pulse(tip, phase_of(sym)).wait(spacing);
  const double t_store = p.now();
  p.transfer(TransferDirection::E2N).wait(0.5 * storage);
  p.rf_pulse(pi, s.rf_phase()).wait(0.5 * storage);
  if (return_transfer) p.transfer(TransferDirection::N2E);
  p.acquire(t_store + 0.5 * spacing, s.dt());
  return p.take();
}

inline StackOutcome run_fig3b(const ExperimentSettings& s, const std::vector<Symbol>& symbols,
                              bool return_transfer = true) {
  detail::Runner runner(s, build_ensemble(s.ensemble()));
  const double spacing = s.us("pulse_spacing_us", 3.0);
  const double tip = s.number("tip_pi", 0.009) * pi;
  const double storage = s.us("nuclear_storage_us", 1000.0);
  const double hw = s.echo_half_width();
  const double thr = detail::noise_threshold(s, runner.n(), std::vector<double>(symbols.size(), tip));
  const auto sig = runner.run(fig3b_program(s, symbols, return_transfer));
  const PulseFrame frame = PulseFrame().refocus(s.rf_phase());
  const double t_store = spacing * static_cast<double>(symbols.size());
  const double t_back = t_store + storage;
  StackOutcome out;
  for (std::size_t j = symbols.size(); j-- > 0;) {
    const double te = t_back + (t_store - spacing * static_cast<double>(j));
    auto rep = in_frame(integrate_echo(sig.at(0), te, hw, thr), frame, thr);
    out.echoes.push_back(rep);
    out.decoded.push_back(rep.symbol);
    out.expected_time.push_back(te);
    out.peak_time.push_back(find_peak(sig.at(0), te - hw, te + hw));
  }
  out.signal = sig.at(0);
  return out;
}

inline ExperimentResult experiment_fig3b(const ExperimentSettings& s) {
  auto result = detail::start_result(s);
  auto symbols = register_symbols(s, kFig3bPattern);
  if (s.values().count("n_pulses")) symbols.resize(s.integer("n_pulses", symbols.size()), Symbol::PlusX);
  const auto out = run_fig3b(s, symbols, true);
  const auto parked = run_fig3b(s, symbols, false);
  result.echoes = out.echoes;
  result.signals.push_back(out.signal);
  int correct = 0, stray = 0;
  double worst_offset = 0.0;
  for (std::size_t k = 0; k < out.echoes.size(); ++k) {
    correct += out.decoded[k] == symbols[symbols.size() - 1 - k];
    stray += parked.decoded[k] != Symbol::None;
    worst_offset = std::max(worst_offset, std::abs(out.peak_time[k] - out.expected_time[k]));
  }
  result.comparisons.push_back(compare("decoded_reverse_order", correct,
                                       static_cast<double>(symbols.size()), 0.0));
  result.comparisons.push_back(
      compare("echo_time_mirror_offset_us", worst_offset * 1e6, 0.0, s.dt() * 1e6 * (1.0 + 1e-6)));
  result.comparisons.push_back(compare("echoes_without_return_transfer", stray, 0.0, 0.0));
  return result;
}

/// Dispatches a canned experiment by name.
inline ExperimentResult run_experiment(const std::string& name, const ConfigMap& overrides) {
  if (!is_experiment(name)) throw std::invalid_argument("unknown experiment '" + name + "'");
  const ExperimentSettings s(name, overrides);
  if (name == "fig1a") return experiment_fig1a(s);
  if (name == "fig1b") return experiment_fig1b(s);
  if (name == "fig2a") return experiment_fig2_full(s, RecallOrder::Same);
  if (name == "fig2b") return experiment_fig2_full(s, RecallOrder::Inverse);
  if (name == "fig3a") return experiment_fig3a(s);
  if (name == "fig3b") return experiment_fig3b(s);
  return experiment_crosstalk_full(s);
}

}  // namespace holomem
