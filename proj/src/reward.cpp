#include "crossflow/reward.hpp"

#include <algorithm>

#include "crossflow/error.hpp"

namespace crossflow::reward {

double individual_delay(double speed, double v_max) { return 1.0 - speed / v_max; }

double total_squared_delay(std::span<const double> speeds, double v_max) {
  double sum = 0.0;
  for (double v : speeds) {
    const double r = v / v_max;
    sum += 1.0 - r * r;
  }
  return sum;
}

double RewardState::reward(double tsd) {
  if (!(tsd >= 0.0)) throw Error("total squared delay must be non-negative");
  tsd_max_ = std::max(tsd_max_, tsd);
  return std::clamp(1.0 - tsd / tsd_max_, 0.0, 1.0);
}

}  // namespace crossflow::reward
