#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "crossflow/rng.hpp"
#include "crossflow/sim/scenario.hpp"

namespace crossflow::sim {

inline constexpr double kMinFlow = 100.0;
inline constexpr double kMaxFlow = 1000.0;

/// Exogenous traffic for one episode.
struct DemandConfig {
  std::array<double, kApproaches> flows{};  // veh/h per entry approach
  double p_cv = 1.0;
  /// One weight per connection of the intersection, normalized to sum to 1
  /// within each incoming approach.
  std::vector<double> turn_weights;
  std::uint64_t seed = 0;

  /// Mean inter-arrival time in seconds for `approach` (infinite if idle).
  double mean_headway(int approach) const;
  void validate(const Intersection& x) const;
};

/// p_cv ~ U[0,1], q_e ~ U[100,1000], one U(0,1) weight per connection
/// normalized per approach, and a fresh arrival seed.
DemandConfig sample_demand(const Intersection& x, RngStream& rng);

/// Turn weights giving every connection of an approach equal share.
std::vector<double> uniform_turn_weights(const Intersection& x);

struct Arrival {
  std::uint32_t vehicle_id = 0;
  double time = 0.0;
  int approach = 0;
  Movement movement = Movement::Through;
  bool is_cv = false;
};

/// Poisson arrivals over [0, horizon) for every approach, sorted by
/// (time, approach). Headways, routes and CV flags use separate substreams
/// so changing p_cv flips CV flags without moving any arrival.
std::vector<Arrival> generate_arrivals(const Intersection& x, const DemandConfig& cfg,
                                       double horizon);

}  // namespace crossflow::sim
