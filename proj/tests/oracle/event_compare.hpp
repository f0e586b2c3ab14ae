#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "holomem/events.hpp"

namespace event_compare {

using namespace holomem;

inline double angle_diff(double a, double b) { return std::remainder(a - b, 2 * pi); }

// Empty string when equal up to 1e-12 relative (phases modulo 2 pi),
// otherwise a description of the first mismatch.
inline std::string mismatch(const std::vector<SequenceEvent>& got, const std::vector<SequenceEvent>& want) {
  if (got.size() != want.size())
    return "length " + std::to_string(got.size()) + " vs " + std::to_string(want.size());
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(b), 1e-6) + 1e-20; };
  for (std::size_t i = 0; i < got.size(); ++i) {
    const std::string where = "event " + std::to_string(i) + ": " + describe(got[i]) + " vs " + describe(want[i]);
    if (got[i].index() != want[i].index()) return where;
    const bool ok = std::visit(
        [&](const auto& g) {
          using T = std::decay_t<decltype(g)>;
          const auto& w = std::get<T>(want[i]);
          if constexpr (std::is_same_v<T, MicrowavePulse> || std::is_same_v<T, RfPulse>)
            return close(g.theta, w.theta) && std::abs(angle_diff(g.phase, w.phase)) <= 1e-12;
          else if constexpr (std::is_same_v<T, GradientPulse>)
            return close(g.G, w.G) && close(g.tau, w.tau);
          else if constexpr (std::is_same_v<T, Delay>)
            return close(g.t, w.t);
          else if constexpr (std::is_same_v<T, Acquire>)
            return close(g.duration, w.duration) && close(g.dt, w.dt);
          else
            return g == w;
        },
        got[i]);
    if (!ok) return where;
  }
  return {};
}

}  // namespace event_compare
