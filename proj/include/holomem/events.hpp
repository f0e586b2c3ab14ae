#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace holomem {

// Ideal hard microwave pulse; phase selects the rotation axis
// (cos phase, sin phase, 0).
struct MicrowavePulse {
  double theta = 0.0;  // rad
  double phase = 0.0;  // rad
  bool operator==(const MicrowavePulse&) const = default;
};

struct GradientPulse {
  double G = 0.0;    // T/m
  double tau = 0.0;  // s
  bool operator==(const GradientPulse&) const = default;
};

struct Delay {
  double t = 0.0;  // s
  bool operator==(const Delay&) const = default;
};

// Ideal hard rf pulse on the nuclear register.
struct RfPulse {
  double theta = 0.0;
  double phase = 0.0;
  bool operator==(const RfPulse&) const = default;
};

enum class TransferDirection { E2N, N2E };

struct Transfer {
  TransferDirection direction = TransferDirection::E2N;
  bool operator==(const Transfer&) const = default;
};

struct Acquire {
  double duration = 0.0;  // s
  double dt = 0.0;        // s
  bool operator==(const Acquire&) const = default;
};

using SequenceEvent =
    std::variant<MicrowavePulse, GradientPulse, Delay, RfPulse, Transfer, Acquire>;

/// Physical time taken by an event. Pulses and transfers are instantaneous.
inline double duration_of(const SequenceEvent& ev) {
  if (auto* g = std::get_if<GradientPulse>(&ev)) return g->tau;
  if (auto* d = std::get_if<Delay>(&ev)) return d->t;
  if (auto* a = std::get_if<Acquire>(&ev)) return a->duration;
  return 0.0;
}

inline double total_duration(const std::vector<SequenceEvent>& events) {
  double t = 0.0;
  for (const auto& ev : events) t += duration_of(ev);
  return t;
}

/// Throws std::invalid_argument when an event violates its invariants.
inline void validate_event(const SequenceEvent& ev) {
  auto finite = [](double v, const char* what) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " is not finite");
  };
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, MicrowavePulse> || std::is_same_v<T, RfPulse>) {
          finite(e.theta, "pulse angle");
          finite(e.phase, "pulse phase");
        } else if constexpr (std::is_same_v<T, GradientPulse>) {
          finite(e.G, "gradient");
          finite(e.tau, "gradient duration");
          if (e.tau < 0.0) throw std::invalid_argument("negative gradient duration");
        } else if constexpr (std::is_same_v<T, Delay>) {
          finite(e.t, "delay");
          if (e.t < 0.0) throw std::invalid_argument("negative delay");
        } else if constexpr (std::is_same_v<T, Acquire>) {
          finite(e.duration, "acquisition duration");
          finite(e.dt, "acquisition step");
          if (!(e.dt > 0.0)) throw std::invalid_argument("acquisition step must be positive");
          if (e.dt > e.duration)
            throw std::invalid_argument("acquisition step exceeds its duration");
        }
      },
      ev);
}

inline std::string describe(const SequenceEvent& ev) {
  char buf[128];
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, MicrowavePulse>)
          std::snprintf(buf, sizeof buf, "MicrowavePulse(theta=%.17g, phase=%.17g)", e.theta, e.phase);
        else if constexpr (std::is_same_v<T, GradientPulse>)
          std::snprintf(buf, sizeof buf, "GradientPulse(G=%.17g, tau=%.17g)", e.G, e.tau);
        else if constexpr (std::is_same_v<T, Delay>)
          std::snprintf(buf, sizeof buf, "Delay(t=%.17g)", e.t);
        else if constexpr (std::is_same_v<T, RfPulse>)
          std::snprintf(buf, sizeof buf, "RfPulse(theta=%.17g, phase=%.17g)", e.theta, e.phase);
        else if constexpr (std::is_same_v<T, Transfer>)
          std::snprintf(buf, sizeof buf, "Transfer(%s)",
                        e.direction == TransferDirection::E2N ? "E2N" : "N2E");
        else
          std::snprintf(buf, sizeof buf, "Acquire(duration=%.17g, dt=%.17g)", e.duration, e.dt);
      },
      ev);
  return buf;
}

}  // namespace holomem
