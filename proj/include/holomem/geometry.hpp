#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

#include "holomem/constants.hpp"

namespace holomem {

enum class Profile { UniformSlab, TransverseCylinder, Sphere };

inline std::string_view to_string(Profile p) {
  switch (p) {
    case Profile::UniformSlab: return "slab";
    case Profile::TransverseCylinder: return "cylinder";
    case Profile::Sphere: return "sphere";
  }
  return "?";
}

inline Profile profile_from_string(std::string_view s) {
  if (s == "slab" || s == "UniformSlab") return Profile::UniformSlab;
  if (s == "cylinder" || s == "TransverseCylinder") return Profile::TransverseCylinder;
  if (s == "sphere" || s == "Sphere") return Profile::Sphere;
  throw std::invalid_argument("unknown profile '" + std::string(s) + "'");
}

/// Spatial support of the sample along the gradient axis z.
///
/// UniformSlab spans [-d/2, d/2]. TransverseCylinder is a cylinder whose
/// axis is perpendicular to z, so its cross-section is a disc of radius r0
/// in a plane containing z and its column density is proportional to
/// sqrt(r0^2 - z^2). Sphere is a ball of radius r0. For the radial profiles
/// r is the distance from the cylinder axis (or the sphere centre) and
/// carries the microwave-field inhomogeneity.
struct SampleGeometry {
  Profile profile = Profile::TransverseCylinder;
  double d = 0.0;   // m, slab only
  double r0 = 0.0;  // m, cylinder and sphere

  bool radial() const { return profile != Profile::UniformSlab; }

  // Half extent along z.
  double half_extent() const { return radial() ? r0 : 0.5 * d; }

  void validate() const {
    if (profile == Profile::UniformSlab) {
      if (!(d > 0.0) || !std::isfinite(d))
        throw std::invalid_argument("slab extent d must be positive");
    } else if (!(r0 > 0.0) || !std::isfinite(r0)) {
      throw std::invalid_argument("radius r0 must be positive");
    }
  }

  static SampleGeometry slab(double d) { return {Profile::UniformSlab, d, 0.0}; }
  static SampleGeometry cylinder(double r0) {
    return {Profile::TransverseCylinder, 0.0, r0};
  }
  static SampleGeometry sphere(double r0) { return {Profile::Sphere, 0.0, r0}; }
};

struct SitePosition {
  double z = 0.0;
  double r = 0.0;
};

/// Maps three uniforms in (0,1) to a point distributed with the sample's
/// density. Only z and the radial distance r are retained.
inline SitePosition place_site(const SampleGeometry& g, double u1, double u2,
                               double u3) {
  switch (g.profile) {
    case Profile::UniformSlab:
      return {g.d * (u1 - 0.5), 0.0};
    case Profile::TransverseCylinder: {
      const double r = g.r0 * std::sqrt(u1);
      return {r * std::cos(2.0 * pi * u2), r};
    }
    case Profile::Sphere: {
      const double r = g.r0 * std::cbrt(u1);
      const double cos_polar = 2.0 * u3 - 1.0;
      return {r * cos_polar, r};
    }
  }
  return {};
}

namespace detail {

inline double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

}  // namespace detail

/// 2 J1(x) / x with its limit 1 at the origin.
inline double airy_amplitude(double x) {
  if (std::abs(x) < 1e-3) {
    const double x2 = x * x;
    return 1.0 - x2 / 8.0 + x2 * x2 / 192.0;
  }
  return 2.0 * std::cyl_bessel_j(1.0, std::abs(x)) / std::abs(x);
}

/// 3 (sin x - x cos x) / x^3, the Fourier transform of a uniform ball.
inline double ball_amplitude(double x) {
  if (std::abs(x) < 1e-2) {
    const double x2 = x * x;
    return 1.0 - x2 / 10.0 + x2 * x2 / 280.0;
  }
  return 3.0 * (std::sin(x) - x * std::cos(x)) / (x * x * x);
}

/// Normalized overlap (1/N) * integral of n(z) exp(-i k z) dz between the
/// uniform mode and the mode of wavenumber k. All supported profiles are
/// symmetric in z, so the imaginary part is zero.
inline std::complex<double> mode_overlap(const SampleGeometry& g, double k) {
  g.validate();
  switch (g.profile) {
    case Profile::UniformSlab: return detail::sinc(0.5 * k * g.d);
    case Profile::TransverseCylinder: return airy_amplitude(k * g.r0);
    case Profile::Sphere: return ball_amplitude(k * g.r0);
  }
  return 0.0;
}

}  // namespace holomem
