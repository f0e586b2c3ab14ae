#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "holomem/engine.hpp"
#include "holomem/ensemble.hpp"

namespace oracle {

using namespace holomem;

inline EnsembleConfig rich_config() {
  EnsembleConfig c;
  c.n_spins = 8;
  c.geometry = SampleGeometry::cylinder(0.5e-3);
  c.relaxation = {40e-6, 1e-6, 200e-6, 300e-6};
  c.static_gradient = 5e-3;
  c.gamma_ratio_nuclear = -6.15e-4;
  c.b1_beta = 0.2;
  c.transfer_fidelity = 0.9;
  c.seed = 11;
  return c;
}

// Random initial Bloch vectors and nuclear amplitudes on top of sampled sites.
inline Ensemble scrambled(const EnsembleConfig& c, std::uint64_t seed) {
  Ensemble e = build_ensemble(c);
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < e.size(); ++i) {
    BlochVector v{u(g), u(g), u(g)};
    const double n = v.norm();
    v = {v.x / n, v.y / n, v.z / n};
    e.set_state(i, v, {0.3 * u(g), 0.3 * u(g)});
  }
  return e;
}

inline std::vector<SequenceEvent> random_program(std::uint64_t seed, std::size_t length) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SequenceEvent> out;
  for (std::size_t k = 0; k < length; ++k) {
    switch (g() % 6) {
      case 0: out.push_back(MicrowavePulse{2 * pi * u(g), 2 * pi * u(g)}); break;
      case 1: out.push_back(GradientPulse{0.06 * (u(g) - 0.5), 2e-6 * u(g)}); break;
      case 2: out.push_back(Delay{3e-6 * u(g)}); break;
      case 3: out.push_back(RfPulse{2 * pi * u(g), 2 * pi * u(g)}); break;
      case 4: out.push_back(Transfer{u(g) < 0.5 ? TransferDirection::E2N : TransferDirection::N2E}); break;
      default: out.push_back(Acquire{1e-6 * (0.5 + u(g)), 5e-8}); break;
    }
  }
  return out;
}

}  // namespace oracle
