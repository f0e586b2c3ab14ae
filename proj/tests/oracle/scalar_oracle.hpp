#pragma once

// Straight-line reference model of the spin ensemble, one spin at a time.
// Rotations use unit quaternions and precession uses closed-form complex
// exponentials, so it shares no arithmetic path with the block engine.

#include <cmath>
#include <complex>
#include <variant>
#include <vector>

#include "holomem/engine.hpp"
#include "holomem/ensemble.hpp"
#include "holomem/events.hpp"

namespace oracle {

using cd = std::complex<double>;

struct Quat {
  double w, x, y, z;
};

inline Quat mul(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

struct Spin {
  double z = 0, r = 0, delta = 0;
  double mx = 0, my = 0, mz = 1;
  cd a{0, 0};
};

struct Params {
  double gamma = 0, ratio = 0, Gs = 0, T2 = INFINITY, T1 = INFINITY, T2n = INFINITY;
  double beta = 0, r0 = 1, eta = 1;
  bool radial = true;
};

inline double decay(double t, double T) { return std::isinf(T) ? 1.0 : std::exp(-t / T); }

class Model {
 public:
  Model(const holomem::Ensemble& e) {
    p_.gamma = e.constants().gamma_e();
    p_.ratio = e.constants().gamma_ratio_nuclear();
    p_.Gs = e.static_gradient();
    p_.T2 = e.relaxation().T2;
    p_.T1 = e.relaxation().T1;
    p_.T2n = e.relaxation().T2n;
    p_.beta = e.b1_beta();
    p_.r0 = e.geometry().r0;
    p_.radial = e.geometry().radial();
    p_.eta = e.config().transfer_fidelity;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const auto s = e.site(i);
      spins_.push_back({s.z, s.r, s.delta, s.s.x, s.s.y, s.s.z, s.a_n});
    }
  }

  const std::vector<Spin>& spins() const { return spins_; }
  double time() const { return time_; }

  double scale(const Spin& s) const {
    if (!p_.radial || p_.beta == 0.0) return 1.0;
    return 1.0 + p_.beta * (s.r / p_.r0) * (s.r / p_.r0);
  }

  void pulse(double theta, double phase) {
    for (auto& s : spins_) {
      const double h = 0.5 * theta * scale(s);
      const Quat q{std::cos(h), std::sin(h) * std::cos(phase), std::sin(h) * std::sin(phase), 0.0};
      const Quat qc{q.w, -q.x, -q.y, -q.z};
      const Quat v = mul(mul(q, Quat{0, s.mx, s.my, s.mz}), qc);
      s.mx = v.x;
      s.my = v.y;
      s.mz = v.z;
    }
  }

  // Free precession for t with an additional gradient G.
  void evolve(double t, double G) {
    for (auto& s : spins_) {
      const double phi = s.delta * t + p_.gamma * (p_.Gs + G) * s.z * t;
      const cd m = cd(s.mx, s.my) * std::exp(cd(0, phi)) * decay(t, p_.T2);
      s.mx = m.real();
      s.my = m.imag();
      s.mz = 1.0 - (1.0 - s.mz) * decay(t, p_.T1);
      s.a *= std::exp(cd(0, p_.ratio * phi)) * decay(t, p_.T2n);
    }
    time_ += t;
  }

  void rf(double theta, double phase) {
    for (auto& s : spins_) {
      const double c = std::cos(theta / 2), sn = std::sin(theta / 2);
      s.a = c * c * s.a + sn * sn * std::conj(s.a) * std::exp(cd(0, 2 * phase));
    }
  }

  void transfer() {
    for (auto& s : spins_) {
      const cd m(s.mx, s.my);
      const cd a = s.a;
      s.mx = p_.eta * a.real();
      s.my = p_.eta * a.imag();
      s.a = p_.eta * m;
    }
  }

  double weight(const Spin& s) const {
    if (!p_.radial || p_.beta == 0.0) return 1.0;
    double mean = 0.0;
    for (const auto& o : spins_) mean += scale(o);
    mean /= static_cast<double>(spins_.size());
    return scale(s) / mean;
  }

  holomem::Signal acquire(double duration, double dt) {
    holomem::Signal sig;
    const auto steps = static_cast<std::size_t>(std::floor(duration / dt * (1.0 + 1e-12)));
    for (std::size_t k = 1; k <= steps; ++k) {
      const double t = static_cast<double>(k) * dt;
      cd sum = 0.0;
      for (const auto& s : spins_) {
        const double phi = (s.delta + p_.gamma * p_.Gs * s.z) * t;
        sum += weight(s) * cd(s.mx, s.my) * std::exp(cd(0, phi)) * decay(t, p_.T2);
      }
      sig.t.push_back(time_ + t);
      sig.m_plus.push_back(sum / static_cast<double>(spins_.size()));
    }
    evolve(duration, 0.0);
    return sig;
  }

  // Returns true for acquisitions and stores the signal.
  bool apply(const holomem::SequenceEvent& ev, holomem::Signal* out) {
    using namespace holomem;
    if (auto* p = std::get_if<MicrowavePulse>(&ev)) pulse(p->theta, p->phase);
    else if (auto* g = std::get_if<GradientPulse>(&ev)) evolve(g->tau, g->G);
    else if (auto* d = std::get_if<Delay>(&ev)) evolve(d->t, 0.0);
    else if (auto* r = std::get_if<RfPulse>(&ev)) rf(r->theta, r->phase);
    else if (std::get_if<Transfer>(&ev)) transfer();
    else if (auto* a = std::get_if<Acquire>(&ev)) {
      *out = acquire(a->duration, a->dt);
      return true;
    }
    return false;
  }

 private:
  Params p_;
  std::vector<Spin> spins_;
  double time_ = 0.0;
};

}  // namespace oracle
