#pragma once

#include <optional>

namespace crossflow::sim {

/// Krauss-style parameters; accel/decel are SUMO's passenger defaults.
struct CarFollowingParams {
  double accel = 2.6;   // m/s^2
  double decel = 4.5;   // m/s^2
  double tau = 1.0;     // driver reaction time, s
  double v_max = 13.89; // m/s
};

/// What the vehicle has to respect ahead of it. `gap` is the usable
/// distance: bumper-to-bumper gap minus the minimum gap for a real leader,
/// or the distance to the stop line for a closed signal (leader speed 0).
struct Obstacle {
  double gap = 0.0;
  double speed = 0.0;
};

/// Krauss safe speed v_l + (g - v_l*tau) / ((v + v_l)/(2b) + tau).
double safe_speed(const CarFollowingParams& p, double v, const Obstacle& ahead);

/// v' = max(0, min(v + a*dt, v_max, v_safe, gap/dt)). The gap/dt cap uses
/// the obstacle's already-updated position, so the next gap is never
/// negative.
double next_speed(const CarFollowingParams& p, double v, const std::optional<Obstacle>& ahead,
                  double dt);

/// Distance covered in `horizon` seconds when accelerating freely from v.
double free_reach(const CarFollowingParams& p, double v, double horizon, double dt);

}  // namespace crossflow::sim
