#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "holomem/constants.hpp"
#include "holomem/geometry.hpp"
#include "holomem/random.hpp"

namespace holomem {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

/// Decoherence and dephasing times in seconds. Infinite values are allowed
/// and mean "no decay".
struct RelaxationParams {
  double T2 = infinity;
  double T2_star = 1e-6;
  double T1 = infinity;
  double T2n = infinity;

  void validate() const {
    for (double t : {T2, T2_star, T1, T2n})
      if (!(t > 0.0)) throw std::invalid_argument("relaxation times must be positive");
    if (!std::isfinite(T2_star))
      throw std::invalid_argument("T2* must be finite");
    if (T2_star > T2) throw std::invalid_argument("T2* must not exceed T2");
    if (T2 > T1) throw std::invalid_argument("T2 must not exceed T1");
  }
};

enum class DetuningDistribution { Lorentzian, Gaussian };
enum class SamplingMode { MonteCarlo, Grid };

inline std::string_view to_string(DetuningDistribution d) {
  return d == DetuningDistribution::Lorentzian ? "lorentzian" : "gaussian";
}
inline std::string_view to_string(SamplingMode s) {
  return s == SamplingMode::MonteCarlo ? "montecarlo" : "grid";
}

/// Everything needed to reproduce an ensemble bit for bit.
struct EnsembleConfig {
  std::size_t n_spins = 100000;
  SampleGeometry geometry = SampleGeometry::cylinder(0.56e-3);
  RelaxationParams relaxation;
  double static_gradient = 0.0;  // T/m
  double gamma_ratio_nuclear = 0.0;
  double b1_beta = 0.0;
  DetuningDistribution detuning = DetuningDistribution::Lorentzian;
  SamplingMode sampling = SamplingMode::MonteCarlo;
  double transfer_fidelity = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_spins == 0) throw std::invalid_argument("n_spins must be at least 1");
    geometry.validate();
    relaxation.validate();
    if (!std::isfinite(static_gradient))
      throw std::invalid_argument("static gradient must be finite");
    if (!std::isfinite(b1_beta)) throw std::invalid_argument("b1_beta must be finite");
    if (!(transfer_fidelity >= 0.0 && transfer_fidelity <= 1.0))
      throw std::invalid_argument("transfer fidelity must lie in [0, 1]");
    PhysicalConstants check(gamma_ratio_nuclear);
    (void)check;
  }
};

struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  std::complex<double> transverse() const { return {x, y}; }
};

/// A single ensemble member, as a value. The ensemble stores its sites
/// column-wise; this is the row view.
struct SpinSite {
  double z = 0.0;      // m
  double r = 0.0;      // m
  double delta = 0.0;  // rad/s
  BlochVector s;
  std::complex<double> a_n{0.0, 0.0};
};

/// The spin ensemble. Site order is fixed at construction; engine
/// operations update the state columns in place.
class Ensemble {
 public:
  Ensemble() = default;

  std::size_t size() const { return z.size(); }
  const EnsembleConfig& config() const { return config_; }
  const PhysicalConstants& constants() const { return constants_; }
  const SampleGeometry& geometry() const { return config_.geometry; }
  const RelaxationParams& relaxation() const { return config_.relaxation; }
  double static_gradient() const { return config_.static_gradient; }
  double b1_beta() const { return config_.b1_beta; }
  std::uint64_t rng_seed() const { return config_.seed; }

  // Absolute sequence time in seconds.
  double time() const { return time_; }
  void advance_time(double dt) { time_ += dt; }

  // Local drive-field scale 1 + beta (r/r0)^2.
  double b1_scale(std::size_t i) const {
    if (config_.b1_beta == 0.0 || !config_.geometry.radial()) return 1.0;
    const double q = r[i] / config_.geometry.r0;
    return 1.0 + config_.b1_beta * q * q;
  }

  // Reciprocity detection weights normalized to mean one; empty when the
  // drive field is homogeneous.
  const std::vector<double>& detection_weights() const { return weights_; }

  SpinSite site(std::size_t i) const {
    return {z[i], r[i], delta[i], {sx[i], sy[i], sz[i]}, {an_re[i], an_im[i]}};
  }

  void set_state(std::size_t i, const BlochVector& s, std::complex<double> a_n = {}) {
    sx[i] = s.x;
    sy[i] = s.y;
    sz[i] = s.z;
    an_re[i] = a_n.real();
    an_im[i] = a_n.imag();
  }

  // Hand-built ensembles for tests and small oracles.
  static Ensemble from_sites(const EnsembleConfig& config,
                             const std::vector<SpinSite>& sites) {
    Ensemble e;
    e.config_ = config;
    e.config_.n_spins = sites.size();
    e.constants_ = PhysicalConstants(config.gamma_ratio_nuclear);
    e.resize(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) {
      e.z[i] = sites[i].z;
      e.r[i] = sites[i].r;
      e.delta[i] = sites[i].delta;
      e.set_state(i, sites[i].s, sites[i].a_n);
    }
    e.init_weights();
    return e;
  }

  bool operator==(const Ensemble& o) const {
    return z == o.z && r == o.r && delta == o.delta && sx == o.sx && sy == o.sy &&
           sz == o.sz && an_re == o.an_re && an_im == o.an_im && time_ == o.time_;
  }

  // Site columns.
  std::vector<double> z, r, delta;
  std::vector<double> sx, sy, sz;
  std::vector<double> an_re, an_im;

 private:
  friend Ensemble build_ensemble(const EnsembleConfig&);

  void resize(std::size_t n) {
    for (auto* v : {&z, &r, &delta, &sx, &sy, &an_re, &an_im}) v->assign(n, 0.0);
    sz.assign(n, 1.0);
  }

  void init_weights() {
    weights_.clear();
    if (config_.b1_beta == 0.0 || !config_.geometry.radial()) return;
    weights_.resize(size());
    double total = 0.0;
    for (std::size_t i = 0; i < size(); ++i) total += (weights_[i] = b1_scale(i));
    const double mean = total / static_cast<double>(size());
    for (double& w : weights_) w /= mean;
  }

  EnsembleConfig config_;
  PhysicalConstants constants_;
  std::vector<double> weights_;
  double time_ = 0.0;
};

namespace detail {

// Additive recurrence on the generalized golden ratio; a deterministic
// low-discrepancy lattice used by SamplingMode::Grid.
inline double lattice_coordinate(std::size_t i, int dim, double shift) {
  constexpr double phi4 = 1.1673039782614187;  // root of x^5 = x + 1
  double alpha = 1.0;
  for (int d = 0; d <= dim; ++d) alpha /= phi4;
  double v = shift + alpha * static_cast<double>(i);
  v -= std::floor(v);
  return v <= 0.0 ? 0.5 / 9007199254740992.0 : v;
}

inline double draw_detuning(DetuningDistribution dist, double T2_star, double u,
                            double v) {
  if (dist == DetuningDistribution::Lorentzian)
    return std::tan(pi * (u - 0.5)) / T2_star;
  // Gaussian line with the FID falling to 1/e at T2*.
  const double sigma = std::sqrt(2.0) / T2_star;
  return sigma * std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * pi * v);
}

}  // namespace detail

/// Samples positions from the geometry's density and detunings from the
/// configured line. All Bloch vectors start at +z and nuclear registers
/// at zero.
inline Ensemble build_ensemble(const EnsembleConfig& config) {
  config.validate();
  Ensemble e;
  e.config_ = config;
  e.constants_ = PhysicalConstants(config.gamma_ratio_nuclear);
  e.resize(config.n_spins);

  const auto& g = config.geometry;
  const double T2s = config.relaxation.T2_star;
  const auto n = config.n_spins;
  if (config.sampling == SamplingMode::MonteCarlo) {
    Rng rng(config.seed);
    for (std::size_t i = 0; i < n; ++i) {
      const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
      const double u4 = rng.uniform(), u5 = rng.uniform();
      const auto pos = place_site(g, u1, u2, u3);
      e.z[i] = pos.z;
      e.r[i] = pos.r;
      e.delta[i] = detail::draw_detuning(config.detuning, T2s, u4, u5);
    }
  } else {
    Rng rng(config.seed);
    double shift[5];
    for (double& s : shift) s = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      const double u1 = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      const auto pos = place_site(g, u1, detail::lattice_coordinate(i, 0, shift[1]),
                                  detail::lattice_coordinate(i, 1, shift[2]));
      e.z[i] = pos.z;
      e.r[i] = pos.r;
      e.delta[i] = detail::draw_detuning(config.detuning, T2s,
                                         detail::lattice_coordinate(i, 2, shift[3]),
                                         detail::lattice_coordinate(i, 3, shift[4]));
    }
  }
  e.init_weights();
  return e;
}

inline Ensemble build_ensemble(EnsembleConfig config, std::size_t n_spins,
                               std::uint64_t seed) {
  config.n_spins = n_spins;
  config.seed = seed;
  return build_ensemble(config);
}

}  // namespace holomem
