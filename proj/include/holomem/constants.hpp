#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace holomem {

// CODATA 2018
namespace codata {
inline constexpr double electron_g = 2.00231930436256;      // |g_e|
inline constexpr double bohr_magneton = 9.2740100783e-24;   // J/T
inline constexpr double hbar = 1.054571817e-34;             // J s
}  // namespace codata

inline constexpr double pi = std::numbers::pi;

/// Electron gyromagnetic factor and the nuclear/electron ratio.
///
/// gamma_e is the composite g_e*mu_B/hbar so that a field B gives the
/// precession rate gamma_e*B in rad/s.
class PhysicalConstants {
 public:
  PhysicalConstants() = default;

  explicit PhysicalConstants(double gamma_ratio_nuclear)
      : PhysicalConstants(default_gamma_e(), gamma_ratio_nuclear) {}

  PhysicalConstants(double gamma_e, double gamma_ratio_nuclear)
      : gamma_e_(gamma_e), gamma_ratio_nuclear_(gamma_ratio_nuclear) {
    if (!(gamma_e > 0.0) || !std::isfinite(gamma_e))
      throw std::invalid_argument("gamma_e must be positive and finite");
    if (!(std::abs(gamma_ratio_nuclear) < 0.01))
      throw std::invalid_argument("|gamma_ratio_nuclear| must be below 0.01");
  }

  static constexpr double default_gamma_e() {
    return codata::electron_g * codata::bohr_magneton / codata::hbar;
  }

  double gamma_e() const { return gamma_e_; }
  double gamma_ratio_nuclear() const { return gamma_ratio_nuclear_; }

 private:
  double gamma_e_ = default_gamma_e();
  double gamma_ratio_nuclear_ = 0.0;
};

/// Spin-wave number imprinted by a gradient G (T/m) applied for tau (s).
inline double wavenumber(double gradient, double tau,
                         const PhysicalConstants& constants) {
  return constants.gamma_e() * gradient * tau;
}

}  // namespace holomem
