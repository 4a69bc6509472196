#include "crossflow/sim/car_following.hpp"

#include <algorithm>

namespace crossflow::sim {

double safe_speed(const CarFollowingParams& p, double v, const Obstacle& ahead) {
  const double vl = ahead.speed;
  return vl + (ahead.gap - vl * p.tau) / ((v + vl) / (2.0 * p.decel) + p.tau);
}

double next_speed(const CarFollowingParams& p, double v, const std::optional<Obstacle>& ahead,
                  double dt) {
  double vn = std::min(v + p.accel * dt, p.v_max);
  if (ahead) {
    vn = std::min(vn, safe_speed(p, v, *ahead));
    vn = std::min(vn, std::max(0.0, ahead->gap) / dt);
  }
  return std::max(0.0, vn);
}

double free_reach(const CarFollowingParams& p, double v, double horizon, double dt) {
  double dist = 0.0;
  for (double t = 0.0; t + 1e-9 < horizon; t += dt) {
    v = std::min(v + p.accel * dt, p.v_max);
    dist += v * dt;
  }
  return dist;
}

}  // namespace crossflow::sim
