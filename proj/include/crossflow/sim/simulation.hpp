#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <vector>

#include "crossflow/sim/car_following.hpp"
#include "crossflow/sim/demand.hpp"
#include "crossflow/sim/phase_timer.hpp"
#include "crossflow/sim/scenario.hpp"

namespace crossflow::sim {

struct Vehicle {
  std::uint32_t id = 0;
  bool is_cv = false;
  int approach = 0;
  int lane = 0;
  int connection = 0;
  Movement movement = Movement::Through;
  double pos = 0.0;    // front bumper distance to the end of the current lane
  double speed = 0.0;  // m/s
  double arrival_time = 0.0;
  double inserted_at = -1.0;
  double crossed_at = -1.0;
  double exited_at = -1.0;
  double length = 5.0;
  double min_gap = 2.5;
};

struct SimParams {
  double dt = 1.0;
  double horizon = 3600.0;
  double vehicle_length = 5.0;
  double min_gap = 2.5;
  /// Time gap a permissive left turn needs in opposing traffic.
  double permissive_gap = 3.0;
  CarFollowingParams car_following{};
  bool record_events = false;
  /// Also log one row per vehicle per step (large).
  bool record_states = false;
};

enum class SignalState : int { Red = 0, Yellow = 1, Green = 2 };

enum class EventKind : int { Insert, Cross, Exit, Stage, State };
const char* event_name(EventKind k);

struct SimEvent {
  double t = 0.0;
  EventKind kind = EventKind::Insert;
  std::int64_t vehicle_id = -1;
  bool is_cv = false;
  int lane = -1;
  double pos = 0.0;
  double speed = 0.0;
  int phase = 0;
  Stage stage = Stage::Green;
};

/// What changed during one step.
struct SimEvents {
  std::vector<std::uint32_t> inserted;
  std::vector<std::uint32_t> crossed;
  std::vector<std::uint32_t> exited;
};

struct VehicleView {
  std::uint32_t id = 0;
  int lane = 0;
  double pos = 0.0;
  double speed = 0.0;
  bool is_cv = false;
};

class CvObservation;

/// Full view of the intersection. Baselines, reward and metrics use it;
/// the learned policy only ever sees `cv_view()`.
struct Observation {
  double time = 0.0;
  std::vector<VehicleView> vehicles;   // every in-network vehicle
  std::vector<int> lane_counts;        // per lane id, incoming and outgoing
  std::vector<std::uint8_t> lane_green;  // per incoming lane
  PhaseTimer timer;

  CvObservation cv_view() const;
};

/// Connected vehicles only, plus signal state. Constructible only by
/// filtering an Observation, so non-CV data cannot leak into the state.
class CvObservation {
 public:
  double time() const { return time_; }
  const std::vector<VehicleView>& vehicles() const { return vehicles_; }
  const std::vector<std::uint8_t>& lane_green() const { return lane_green_; }

  /// Test hook: build a CV view directly (every vehicle must be a CV).
  static CvObservation from_parts(double time, std::vector<VehicleView> cvs,
                                  std::vector<std::uint8_t> lane_green);

 private:
  friend struct Observation;
  double time_ = 0.0;
  std::vector<VehicleView> vehicles_;
  std::vector<std::uint8_t> lane_green_;
};

/// Single isolated intersection, stepped in fixed dt. Single-threaded;
/// distinct instances share nothing.
class Simulation {
 public:
  Simulation(Intersection intersection, DemandConfig demand, SimParams params = {});

  const Intersection& intersection() const { return x_; }
  const DemandConfig& demand() const { return demand_; }
  const SimParams& params() const { return params_; }
  const std::vector<Arrival>& arrivals() const { return arrivals_; }

  double time() const { return time_; }
  bool done() const { return time_ + 1e-9 >= params_.horizon; }

  const PhaseTimer& timer() const { return timer_; }
  bool decision_point() const { return timer_.decision_point(); }
  void apply_action(int phase);
  void switch_to(int phase);
  void advance_cycle();

  SimEvents step();

  Observation observe() const;
  SignalState connection_state(int connection) const;
  std::vector<std::uint8_t> lane_green() const;

  const std::deque<Vehicle>& lane(int id) const { return lanes_[id]; }
  std::size_t pending() const;

  std::uint64_t arrived_total() const { return arrived_total_; }
  std::uint64_t inserted_total() const { return inserted_total_; }
  std::uint64_t exited_total() const { return exited_total_; }
  std::uint64_t in_network() const;

  /// Sum of 1 - v/v_max over every in-network vehicle (after the last step).
  double total_delay() const;
  /// Sum of 1 - (v/v_max)^2 over vehicles on incoming lanes.
  double total_squared_delay() const;
  /// Vehicles on incoming lanes slower than 0.1 m/s.
  int queued_vehicles() const;

  const std::vector<SimEvent>& events() const { return events_; }
  void write_event_csv(std::ostream& os) const;

  /// Test hook: place a vehicle directly on a lane (front-to-back order is
  /// kept). The vehicle does not count as an arrival.
  void place_vehicle(Vehicle v);

 private:
  bool try_insert(const Arrival& a);
  void update_outgoing(int lane, SimEvents& ev);
  void update_incoming(int lane, const std::vector<std::uint8_t>& permissive_ok, SimEvents& ev);
  std::vector<std::uint8_t> permissive_clearance() const;
  bool can_cross(const Vehicle& v, const std::vector<std::uint8_t>& permissive_ok) const;
  void log(EventKind kind, const Vehicle* v);

  Intersection x_;
  DemandConfig demand_;
  SimParams params_;
  std::vector<Arrival> arrivals_;
  std::size_t next_arrival_ = 0;
  std::array<std::deque<Arrival>, kApproaches> pending_;
  std::vector<std::deque<Vehicle>> lanes_;
  std::vector<std::vector<int>> lanes_by_movement_;  // [approach*3 + movement]
  PhaseTimer timer_;
  std::vector<std::vector<std::uint8_t>> phase_connections_;  // [phase][connection]
  double time_ = 0.0;
  std::uint64_t arrived_total_ = 0;
  std::uint64_t inserted_total_ = 0;
  std::uint64_t exited_total_ = 0;
  std::vector<SimEvent> events_;
};

}  // namespace crossflow::sim
