#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "dream/core/error.hpp"

namespace dream::battery {

// Linear constant-current surrogate calibrated so a full-speed straight drive lasts lifetime_s.
struct BatteryParams {
  double capacity = 100.0;  // abstract energy units
  double lifetime_s = 900.0;
  double turn_multiplier = 1.25;
  double v_max = 1.0;
  double omega_max = 1.0;

  double straight_rate() const { return capacity / lifetime_s; }
  double turn_rate() const { return turn_multiplier * straight_rate(); }
};

struct BatteryState {
  double capacity = 100.0;
  double drained = 0.0;
  bool depleted = false;

  static BatteryState full(const BatteryParams& p = {}) { return {p.capacity, 0.0, false}; }

  // A battery holding `units` of charge out of `capacity`.
  static BatteryState with_charge(double units, const BatteryParams& p = {}) {
    const double held = std::clamp(units, 0.0, p.capacity);
    BatteryState b{p.capacity, p.capacity - held, false};
    b.depleted = held <= 0.0;
    return b;
  }

  double soc() const { return 100.0 * std::max(0.0, capacity - drained) / capacity; }
};

// Tolerance for accumulated rounding when deciding depletion.
inline constexpr double kDepletionSlack = 1e-9;

inline BatteryState consume(BatteryState b, double v, double omega, double dt,
                            const BatteryParams& p = {}) {
  if (!(dt > 0.0)) throw usage_error("battery::consume: dt must be > 0");
  if (b.depleted) return b;
  b.drained += dt * (p.straight_rate() * std::abs(v) / p.v_max +
                     p.turn_rate() * std::abs(omega) / p.omega_max);
  if (b.drained >= b.capacity - kDepletionSlack * b.capacity) {
    b.drained = b.capacity;
    b.depleted = true;
  }
  return b;
}

inline double remaining_energy_units(const BatteryState& b) { return std::max(0.0, b.capacity - b.drained); }

struct SocSample {
  double t = 0.0;
  double soc = 100.0;
};

// Full-speed straight drive from a fresh battery, sampled every `step` seconds.
inline std::vector<SocSample> discharge_curve(double duration, double step = 1.0,
                                              const BatteryParams& p = {}) {
  if (!(duration > 0.0)) throw usage_error("discharge_curve: duration must be > 0");
  if (!(step > 0.0)) throw usage_error("discharge_curve: step must be > 0");
  std::vector<SocSample> out;
  auto b = BatteryState::full(p);
  out.push_back({0.0, b.soc()});
  const auto n = static_cast<long>(std::ceil(duration / step - 1e-9));
  for (long i = 1; i <= n; ++i) {
    const double t = std::min(duration, static_cast<double>(i) * step);
    const double dt = t - out.back().t;
    b = consume(b, p.v_max, 0.0, dt, p);
    out.push_back({t, b.soc()});
  }
  return out;
}

inline void write_discharge_csv(std::ostream& os, const std::vector<SocSample>& curve) {
  os << "t,soc\n";
  os.precision(17);
  for (const auto& s : curve) os << s.t << ',' << s.soc << '\n';
}

}  // namespace dream::battery
