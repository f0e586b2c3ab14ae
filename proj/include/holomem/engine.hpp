#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "holomem/ensemble.hpp"
#include "holomem/events.hpp"
#include "holomem/parallel.hpp"

namespace holomem {

/// Digitized transverse magnetization m+ = <w (sx + i sy)>.
struct Signal {
  std::vector<double> t;                    // absolute sequence time, s
  std::vector<std::complex<double>> m_plus;

  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }
  double dt() const { return t.size() > 1 ? t[1] - t[0] : 0.0; }
};

struct RunResult {
  std::vector<Signal> signals;
};

/// Error from run_sequence, carrying the offending event index.
class SequenceRunError : public std::runtime_error {
 public:
  SequenceRunError(std::size_t index, const std::string& what)
      : std::runtime_error("event " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

namespace detail {

inline double decay_factor(double t, double T) {
  return std::isfinite(T) ? std::exp(-t / T) : 1.0;
}

}  // namespace detail

/// Applies sequence events to an ensemble in place.
///
/// Every event is a map over sites; work is split into fixed blocks so
/// results do not depend on the thread count.
class Engine {
 public:
  explicit Engine(unsigned threads = 1) : threads_(threads == 0 ? 1 : threads) {}

  unsigned threads() const { return threads_; }

  void microwave_pulse(Ensemble& e, double theta, double phase) const {
    const double c = std::cos(phase), s = std::sin(phase);
    const bool uniform = e.b1_beta() == 0.0 || !e.geometry().radial();
    const double cos_u = std::cos(theta), sin_u = std::sin(theta);
    for_each_block(e.size(), threads_, [&](std::size_t lo, std::size_t hi, std::size_t) {
      for (std::size_t i = lo; i < hi; ++i) {
        double ct = cos_u, st = sin_u;
        if (!uniform) {
          const double angle = theta * e.b1_scale(i);
          ct = std::cos(angle);
          st = std::sin(angle);
        }
        const double x = e.sx[i], y = e.sy[i], z = e.sz[i];
        const double along = c * x + s * y;
        const double k = along * (1.0 - ct);
        // v cos + (n x v) sin + n (n.v)(1 - cos)
        e.sx[i] = x * ct + s * z * st + c * k;
        e.sy[i] = y * ct - c * z * st + s * k;
        e.sz[i] = z * ct + (c * y - s * x) * st;
      }
    });
  }

  void evolve_free(Ensemble& e, double t) const { precess(e, 0.0, t); }

  /// Free evolution for t with an extra gradient area (T s / m) folded in;
  /// equivalent to any sequence of delays and gradient pulses of total
  /// duration t and total pulsed area `area`.
  void evolve_combined(Ensemble& e, double t, double area) const {
    if (t < 0.0) throw std::invalid_argument("negative evolution time");
    if (t == 0.0 && area == 0.0) return;
    const double gamma = e.constants().gamma_e();
    const double ratio = e.constants().gamma_ratio_nuclear();
    const double grad_area = e.static_gradient() * t + area;
    const double e2 = detail::decay_factor(t, e.relaxation().T2);
    const double e1 = detail::decay_factor(t, e.relaxation().T1);
    const double en = detail::decay_factor(t, e.relaxation().T2n);
    for_each_block(e.size(), threads_, [&](std::size_t lo, std::size_t hi, std::size_t) {
      double* __restrict x = e.sx.data();
      double* __restrict y = e.sy.data();
      double* __restrict z = e.sz.data();
      const double* __restrict dl = e.delta.data();
      const double* __restrict pos = e.z.data();
      for (std::size_t i = lo; i < hi; ++i) {
        const double phi = dl[i] * t + gamma * grad_area * pos[i];
        const double c = e2 * std::cos(phi), s = e2 * std::sin(phi);
        const double x0 = x[i], y0 = y[i];
        x[i] = x0 * c - y0 * s;
        y[i] = x0 * s + y0 * c;
        if (e1 != 1.0) z[i] = 1.0 - (1.0 - z[i]) * e1;
        if (e.an_re[i] != 0.0 || e.an_im[i] != 0.0) {
          const double pn = ratio * phi;
          const double cn = en * std::cos(pn), sn = en * std::sin(pn);
          const double re = e.an_re[i], im = e.an_im[i];
          e.an_re[i] = re * cn - im * sn;
          e.an_im[i] = re * sn + im * cn;
        }
      }
    });
    e.advance_time(t);
  }

  /// Gradient pulse of strength G for tau. The static gradient, detunings
  /// and relaxation keep acting for the duration of the pulse.
  void gradient(Ensemble& e, double G, double tau) const { precess(e, G, tau); }

  void rf_pulse(Ensemble& e, double theta, double phase) const {
    // Coherence-order mixing: a -> cos^2(theta/2) a + sin^2(theta/2) a* e^{2i phase}
    const double keep = std::cos(0.5 * theta) * std::cos(0.5 * theta);
    const double flip = std::sin(0.5 * theta) * std::sin(0.5 * theta);
    const double c2 = std::cos(2.0 * phase), s2 = std::sin(2.0 * phase);
    for_each_block(e.size(), threads_, [&](std::size_t lo, std::size_t hi, std::size_t) {
      for (std::size_t i = lo; i < hi; ++i) {
        const double re = e.an_re[i], im = e.an_im[i];
        e.an_re[i] = keep * re + flip * (re * c2 + im * s2);
        e.an_im[i] = keep * im + flip * (re * s2 - im * c2);
      }
    });
  }

  /// Swaps the electron transverse amplitude with the nuclear register.
  /// The swap is its own inverse, so both directions perform the same map;
  /// a transfer fidelity below one scales the moved amplitudes.
  void transfer(Ensemble& e, TransferDirection) const {
    const double eta = e.config().transfer_fidelity;
    for_each_block(e.size(), threads_, [&](std::size_t lo, std::size_t hi, std::size_t) {
      for (std::size_t i = lo; i < hi; ++i) {
        const double x = e.sx[i], y = e.sy[i];
        e.sx[i] = eta * e.an_re[i];
        e.sy[i] = eta * e.an_im[i];
        e.an_re[i] = eta * x;
        e.an_im[i] = eta * y;
      }
    });
  }

  /// Weighted mean transverse magnetization.
  std::complex<double> magnetization(const Ensemble& e) const {
    std::vector<std::complex<double>> partial(block_count(e.size()));
    const auto& w = e.detection_weights();
    for_each_block(e.size(), threads_, [&](std::size_t lo, std::size_t hi, std::size_t b) {
      double re = 0.0, im = 0.0;
      for (std::size_t i = lo; i < hi; ++i) {
        const double wi = w.empty() ? 1.0 : w[i];
        re += wi * e.sx[i];
        im += wi * e.sy[i];
      }
      partial[b] = {re, im};
    });
    std::complex<double> sum = 0.0;
    for (const auto& p : partial) sum += p;
    return sum / static_cast<double>(e.size());
  }

  /// Free evolution sampled every dt; the sample at t0 + k dt is taken after
  /// the k-th step. A trailing fraction of dt is evolved but not sampled.
  Signal acquire(Ensemble& e, double duration, double dt) const {
    if (!(dt > 0.0)) throw std::invalid_argument("acquisition step must be positive");
    if (dt > duration) throw std::invalid_argument("acquisition step exceeds its duration");
    const auto steps = static_cast<std::size_t>(std::floor(duration / dt * (1.0 + 1e-12)));
    const double t0 = e.time();
    const std::size_t n = e.size();
    const std::size_t blocks = block_count(n);
    std::vector<double> part_re(blocks * steps), part_im(blocks * steps);

    const double gamma = e.constants().gamma_e();
    const double grad = e.static_gradient();
    const double e2 = detail::decay_factor(dt, e.relaxation().T2);
    const auto& w = e.detection_weights();

    for_each_block(n, threads_, [&](std::size_t lo, std::size_t hi, std::size_t b) {
      const std::size_t len = hi - lo;
      std::vector<double> pre(len), pim(len);
      for (std::size_t j = 0; j < len; ++j) {
        const std::size_t i = lo + j;
        const double phi = (e.delta[i] + gamma * grad * e.z[i]) * dt;
        pre[j] = e2 * std::cos(phi);
        pim[j] = e2 * std::sin(phi);
      }
      double* __restrict x = e.sx.data() + lo;
      double* __restrict y = e.sy.data() + lo;
      const double* wb = w.empty() ? nullptr : w.data() + lo;
      for (std::size_t k = 0; k < steps; ++k) {
        for (std::size_t j = 0; j < len; ++j) {
          const double a = x[j], c = y[j];
          x[j] = a * pre[j] - c * pim[j];
          y[j] = a * pim[j] + c * pre[j];
        }
        double acc_re[4] = {0, 0, 0, 0}, acc_im[4] = {0, 0, 0, 0};
        std::size_t j = 0;
        if (wb) {
          for (; j + 4 <= len; j += 4)
            for (int q = 0; q < 4; ++q) {
              acc_re[q] += wb[j + q] * x[j + q];
              acc_im[q] += wb[j + q] * y[j + q];
            }
          for (; j < len; ++j) {
            acc_re[0] += wb[j] * x[j];
            acc_im[0] += wb[j] * y[j];
          }
        } else {
          for (; j + 4 <= len; j += 4)
            for (int q = 0; q < 4; ++q) {
              acc_re[q] += x[j + q];
              acc_im[q] += y[j + q];
            }
          for (; j < len; ++j) {
            acc_re[0] += x[j];
            acc_im[0] += y[j];
          }
        }
        part_re[b * steps + k] = (acc_re[0] + acc_re[1]) + (acc_re[2] + acc_re[3]);
        part_im[b * steps + k] = (acc_im[0] + acc_im[1]) + (acc_im[2] + acc_im[3]);
      }
    });

    // Longitudinal and nuclear parts only need the total elapsed time.
    const double sampled = static_cast<double>(steps) * dt;
    relax_passive(e, sampled);

    Signal sig;
    sig.t.resize(steps);
    sig.m_plus.resize(steps);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < steps; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t b = 0; b < blocks; ++b) {
        re += part_re[b * steps + k];
        im += part_im[b * steps + k];
      }
      sig.t[k] = t0 + static_cast<double>(k + 1) * dt;
      sig.m_plus[k] = {re * inv_n, im * inv_n};
    }
    e.advance_time(sampled);
    const double rest = duration - sampled;
    if (rest > 0.0) precess(e, 0.0, rest);
    return sig;
  }

  /// Applies one event; returns true and fills `signal` for acquisitions.
  bool apply(Ensemble& e, const SequenceEvent& ev, Signal* signal = nullptr) const {
    validate_event(ev);
    if (auto* p = std::get_if<MicrowavePulse>(&ev)) {
      microwave_pulse(e, p->theta, p->phase);
    } else if (auto* g = std::get_if<GradientPulse>(&ev)) {
      gradient(e, g->G, g->tau);
    } else if (auto* d = std::get_if<Delay>(&ev)) {
      evolve_free(e, d->t);
    } else if (auto* rf = std::get_if<RfPulse>(&ev)) {
      rf_pulse(e, rf->theta, rf->phase);
    } else if (auto* tr = std::get_if<Transfer>(&ev)) {
      transfer(e, tr->direction);
    } else if (auto* a = std::get_if<Acquire>(&ev)) {
      Signal s = acquire(e, a->duration, a->dt);
      if (signal) *signal = std::move(s);
      return true;
    }
    return false;
  }

  /// Folds the events left to right. Runs of consecutive delays and
  /// gradient pulses commute and are applied as one precession step.
  RunResult run(Ensemble& e, std::span<const SequenceEvent> events) const {
    RunResult result;
    double pending_t = 0.0, pending_area = 0.0;
    auto flush = [&] {
      evolve_combined(e, pending_t, pending_area);
      pending_t = pending_area = 0.0;
    };
    for (std::size_t idx = 0; idx < events.size(); ++idx) {
      try {
        const auto& ev = events[idx];
        validate_event(ev);
        if (const auto* d = std::get_if<Delay>(&ev)) {
          pending_t += d->t;
          continue;
        }
        if (const auto* g = std::get_if<GradientPulse>(&ev)) {
          pending_t += g->tau;
          pending_area += g->G * g->tau;
          continue;
        }
        flush();
        Signal s;
        if (apply(e, ev, &s)) result.signals.push_back(std::move(s));
      } catch (const std::exception& ex) {
        throw SequenceRunError(idx, ex.what());
      }
    }
    try {
      flush();
    } catch (const std::exception& ex) {
      throw SequenceRunError(events.size() - 1, ex.what());
    }
    return result;
  }

 private:
  void precess(Ensemble& e, double extra_gradient, double t) const {
    if (t < 0.0) throw std::invalid_argument("negative evolution time");
    evolve_combined(e, t, extra_gradient * t);
  }

  // Longitudinal recovery and nuclear evolution over t, leaving the
  // electron transverse components alone.
  void relax_passive(Ensemble& e, double t) const {
    if (t <= 0.0) return;
    const double gamma = e.constants().gamma_e();
    const double ratio = e.constants().gamma_ratio_nuclear();
    const double grad = e.static_gradient();
    const double e1 = detail::decay_factor(t, e.relaxation().T1);
    const double en = detail::decay_factor(t, e.relaxation().T2n);
    for_each_block(e.size(), threads_, [&](std::size_t lo, std::size_t hi, std::size_t) {
      for (std::size_t i = lo; i < hi; ++i) {
        e.sz[i] = 1.0 - (1.0 - e.sz[i]) * e1;
        if (e.an_re[i] != 0.0 || e.an_im[i] != 0.0) {
          const double pn = ratio * (e.delta[i] + gamma * grad * e.z[i]) * t;
          const double cn = en * std::cos(pn), sn = en * std::sin(pn);
          const double re = e.an_re[i], im = e.an_im[i];
          e.an_re[i] = re * cn - im * sn;
          e.an_im[i] = re * sn + im * cn;
        }
      }
    });
  }

  unsigned threads_ = 1;
};

/// RMS transverse coherence per site divided by sqrt(N): the magnitude a
/// fully dephased ensemble of the same coherence leaves in m+.
inline double dephased_noise_floor(const Ensemble& e) {
  const auto& w = e.detection_weights();
  double sum = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sum += wi * wi * (e.sx[i] * e.sx[i] + e.sy[i] * e.sy[i]);
  }
  return std::sqrt(sum) / static_cast<double>(e.size());
}

}  // namespace holomem
