#pragma once

#include <span>

namespace crossflow::reward {

/// 1 - v/v_max: lost-time rate of one vehicle.
double individual_delay(double speed, double v_max);

/// Sum over vehicles of 1 - (v/v_max)^2.
double total_squared_delay(std::span<const double> speeds, double v_max);

/// Running normalizer for the reward. The floor of 1 keeps the first
/// (possibly empty) step well defined.
class RewardState {
 public:
  double tsd_max() const { return tsd_max_; }
  /// Updates the running maximum and returns 1 - tsd / tsd_max in [0, 1].
  double reward(double tsd);
  /// Restores a saved maximum (never below the floor).
  void set_tsd_max(double v) { tsd_max_ = v < 1.0 ? 1.0 : v; }

 private:
  double tsd_max_ = 1.0;
};

}  // namespace crossflow::reward
