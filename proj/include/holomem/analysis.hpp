#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "holomem/constants.hpp"
#include "holomem/engine.hpp"
#include "holomem/random.hpp"

namespace holomem {

enum class Symbol { PlusX, MinusX, PlusY, MinusY, None };

inline std::string_view to_string(Symbol s) {
  switch (s) {
    case Symbol::PlusX: return "+x";
    case Symbol::MinusX: return "-x";
    case Symbol::PlusY: return "+y";
    case Symbol::MinusY: return "-y";
    case Symbol::None: return "none";
  }
  return "?";
}

inline double phase_of(Symbol s) {
  switch (s) {
    case Symbol::PlusX: return 0.0;
    case Symbol::PlusY: return 0.5 * pi;
    case Symbol::MinusX: return pi;
    case Symbol::MinusY: return 1.5 * pi;
    case Symbol::None: break;
  }
  throw std::invalid_argument("Symbol::None has no phase");
}

/// Nearest cardinal direction, or None below the threshold.
inline Symbol decode_symbol(std::complex<double> amplitude, double threshold) {
  if (!(std::abs(amplitude) >= threshold) || amplitude == 0.0) return Symbol::None;
  const double a = std::arg(amplitude);  // (-pi, pi]
  const double q = std::round(a / (0.5 * pi));
  switch (static_cast<int>(q)) {
    case 0: return Symbol::PlusX;
    case 1: return Symbol::PlusY;
    case -1: return Symbol::MinusY;
    default: return Symbol::MinusX;
  }
}

struct EchoReport {
  double t_center = 0.0;               // s
  std::complex<double> amplitude{};    // window mean of m+
  double intensity = 0.0;              // |amplitude|^2
  Symbol symbol = Symbol::None;
};

/// Trapezoidal mean of m+ over [t_center - half_width, t_center + half_width].
/// The window may overhang the sampled range by at most half a sample.
inline EchoReport integrate_echo(const Signal& signal, double t_center, double half_width,
                                 double threshold = 0.0) {
  if (signal.size() < 2) throw std::invalid_argument("signal too short to integrate");
  if (!(half_width > 0.0)) throw std::invalid_argument("echo half width must be positive");
  const double slack = 0.5 * signal.dt() * (1.0 + 1e-9);
  const double lo = t_center - half_width, hi = t_center + half_width;
  if (lo < signal.t.front() - slack || hi > signal.t.back() + slack)
    throw std::out_of_range("echo window lies outside the signal");
  const auto first = std::lower_bound(signal.t.begin(), signal.t.end(), lo - slack) - signal.t.begin();
  const auto last = std::upper_bound(signal.t.begin(), signal.t.end(), hi + slack) - signal.t.begin();
  const auto b = static_cast<std::size_t>(first), e = static_cast<std::size_t>(last);
  if (e < b + 2) throw std::out_of_range("echo window holds fewer than two samples");
  std::complex<double> area = 0.0;
  for (std::size_t k = b + 1; k < e; ++k)
    area += 0.5 * (signal.t[k] - signal.t[k - 1]) * (signal.m_plus[k] + signal.m_plus[k - 1]);
  EchoReport r;
  r.t_center = t_center;
  r.amplitude = area / (signal.t[e - 1] - signal.t[b]);
  r.intensity = std::norm(r.amplitude);
  r.symbol = decode_symbol(r.amplitude, threshold);
  return r;
}

/// Time of the largest |m+| inside [lo, hi].
inline double find_peak(const Signal& signal, double lo, double hi) {
  double best_t = lo, best = -1.0;
  for (std::size_t k = 0; k < signal.size(); ++k) {
    if (signal.t[k] < lo || signal.t[k] > hi) continue;
    const double v = std::abs(signal.m_plus[k]);
    if (v > best) {
      best = v;
      best_t = signal.t[k];
    }
  }
  if (best < 0.0) throw std::out_of_range("no samples in peak search range");
  return best_t;
}

/// Maps a raw echo amplitude back to the phase of the pulse that stored it.
///
/// A pulse of phase phi leaves m+ = -i e^{i phi}. A refocusing pi pulse of
/// phase psi (microwave on the electron, or rf on the parked nuclear
/// coherence) maps m+ -> e^{2 i psi} conj(m+). The frame tracks the
/// composition as m = alpha * x or alpha * conj(x) with x = e^{i phi}; for
/// +y refocusing this reduces to inverting the imaginary part after every
/// odd refocusing pulse.
class PulseFrame {
 public:
  PulseFrame& refocus(double psi) {
    alpha_ = std::polar(1.0, 2.0 * psi) * std::conj(alpha_);
    conjugated_ = !conjugated_;
    return *this;
  }

  std::complex<double> to_pulse_frame(std::complex<double> raw) const {
    const auto x = raw / alpha_;
    return conjugated_ ? std::conj(x) : x;
  }

  bool conjugated() const { return conjugated_; }

 private:
  std::complex<double> alpha_{0.0, -1.0};
  bool conjugated_ = false;
};

inline EchoReport in_frame(EchoReport r, const PulseFrame& frame, double threshold) {
  r.amplitude = frame.to_pulse_frame(r.amplitude);
  r.intensity = std::norm(r.amplitude);
  r.symbol = decode_symbol(r.amplitude, threshold);
  return r;
}

/// Expected fractional echo losses: D1 for the first excitation caused by the
/// partial refocusing of the second, D2 for the second caused by the
/// longitudinal magnetization the first consumed.
inline std::pair<double, double> crosstalk_theory(double theta1, double theta2) {
  return {(1.0 - std::cos(theta2)) / 2.0, 1.0 - std::cos(theta1)};
}

struct CrosstalkReport {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double D1 = 0.0;
  double D2 = 0.0;
  double D1_theory = 0.0;
  double D2_theory = 0.0;

  double D1_error() const { return std::abs(D1 - D1_theory); }
  double D2_error() const { return std::abs(D2 - D2_theory); }
};

inline double fractional_change(double reference, double measured) {
  return (reference - measured) / reference;
}

/// Least-squares amplitude for data ~ A exp(-2 dt / T2) with T2 fixed, and
/// the RMS residual relative to A.
struct EnvelopeFit {
  double amplitude = 0.0;
  double rms_relative = 0.0;
  double fitted_T2 = 0.0;  // free log-linear fit, for reference
};

inline EnvelopeFit fit_echo_envelope(const std::vector<double>& delta_t,
                                     const std::vector<double>& magnitude, double T2) {
  if (delta_t.size() != magnitude.size() || delta_t.size() < 2)
    throw std::invalid_argument("envelope fit needs matching samples");
  const std::size_t n = delta_t.size();
  double num = 0.0, den = 0.0;
  std::vector<double> model(n);
  for (std::size_t j = 0; j < n; ++j) {
    model[j] = std::isfinite(T2) ? std::exp(-2.0 * delta_t[j] / T2) : 1.0;
    num += magnitude[j] * model[j];
    den += model[j] * model[j];
  }
  EnvelopeFit fit;
  fit.amplitude = num / den;
  double ss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double r = magnitude[j] - fit.amplitude * model[j];
    ss += r * r;
  }
  fit.rms_relative = std::sqrt(ss / static_cast<double>(n)) / fit.amplitude;

  // ln m = c - (2/T2) dt
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!(magnitude[j] > 0.0)) continue;
    const double y = std::log(magnitude[j]);
    sx += delta_t[j];
    sy += y;
    sxx += delta_t[j] * delta_t[j];
    sxy += delta_t[j] * y;
    ++used;
  }
  const double m = static_cast<double>(used);
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  fit.fitted_T2 = slope < 0.0 ? -2.0 / slope : infinity;
  return fit;
}

inline void add_detection_noise(Signal& s, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return;
  Rng rng(seed);
  for (auto& m : s.m_plus) m += std::complex<double>(sigma * rng.normal(), sigma * rng.normal());
}

}  // namespace holomem
