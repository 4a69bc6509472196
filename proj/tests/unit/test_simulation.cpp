#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "crossflow/error.hpp"
#include "crossflow/sim/simulation.hpp"

using namespace crossflow;
using namespace crossflow::sim;

namespace {

DemandConfig empty_demand(const Intersection& x) {
  DemandConfig d;
  d.flows = {0, 0, 0, 0};
  d.p_cv = 1.0;
  d.turn_weights = uniform_turn_weights(x);
  return d;
}

DemandConfig busy_demand(const Intersection& x, std::uint64_t seed, double p_cv = 0.5) {
  DemandConfig d;
  d.flows = {700, 500, 900, 400};
  d.p_cv = p_cv;
  d.turn_weights = uniform_turn_weights(x);
  d.seed = seed;
  return d;
}

Vehicle make_vehicle(std::uint32_t id, int lane, double pos, double speed,
                     Movement m = Movement::Through) {
  Vehicle v;
  v.id = id;
  v.lane = lane;
  v.pos = pos;
  v.speed = speed;
  v.movement = m;
  v.is_cv = true;
  return v;
}

// Fixed 30 s cycle through the phases.
void cycle_control(Simulation& sim) {
  if (sim.timer().stage() == Stage::Green && sim.timer().green_elapsed() >= 30.0) sim.advance_cycle();
}

const Vehicle* find(const Simulation& sim, std::uint32_t id) {
  for (int l = 0; l < sim.intersection().lane_count(); ++l) {
    for (const auto& v : sim.lane(l)) {
      if (v.id == id) return &v;
    }
  }
  return nullptr;
}

}  // namespace

TEST(CarFollowing, KraussSafeSpeedHandValue) {
  CarFollowingParams p;
  // v_l + (g - v_l tau) / ((v + v_l)/(2b) + tau) with v = 10, v_l = 5, g = 20.
  const double expect = 5.0 + (20.0 - 5.0) / (15.0 / 9.0 + 1.0);
  EXPECT_DOUBLE_EQ(safe_speed(p, 10.0, {20.0, 5.0}), expect);
  EXPECT_DOUBLE_EQ(next_speed(p, 0.0, std::nullopt, 1.0), 2.6);
  EXPECT_DOUBLE_EQ(next_speed(p, 13.0, std::nullopt, 1.0), 13.89);
  EXPECT_EQ(next_speed(p, 10.0, Obstacle{0.0, 0.0}, 1.0), 0.0);
}

TEST(Simulation, FreeRoadAccelerationThenSpeedLimit) {
  const auto x = build_scenario('a');
  Simulation sim(x, empty_demand(x));
  const int out = x.outgoing_lane(0, 0);
  sim.place_vehicle(make_vehicle(1, out, 290.0, 0.0));
  sim.step();
  EXPECT_DOUBLE_EQ(sim.lane(out).front().speed, 2.6);
  EXPECT_DOUBLE_EQ(sim.lane(out).front().pos, 290.0 - 2.6);
  sim.step();
  EXPECT_DOUBLE_EQ(sim.lane(out).front().speed, 5.2);
  for (int i = 0; i < 6; ++i) sim.step();
  EXPECT_DOUBLE_EQ(sim.lane(out).front().speed, x.speed_limit);
}

TEST(Simulation, VehicleStopsAtRedAndNeverCrosses) {
  const auto x = build_scenario('a');
  Simulation sim(x, empty_demand(x));
  const int east = x.incoming_lane(1, 0);  // phase 0 serves N/S only
  sim.place_vehicle(make_vehicle(1, east, 100.0, x.speed_limit));
  for (int s = 0; s < 60; ++s) {
    if (sim.decision_point()) sim.apply_action(0);
    const auto ev = sim.step();
    EXPECT_TRUE(ev.crossed.empty());
    const auto& v = sim.lane(east).front();
    ASSERT_GE(v.pos, 0.0);
    ASSERT_GE(v.speed, 0.0);
  }
  EXPECT_LT(sim.lane(east).front().speed, 0.1);
  EXPECT_LT(sim.lane(east).front().pos, 10.0);
}

TEST(Simulation, GreenLetsVehicleThroughToOutgoingLane) {
  const auto x = build_scenario('a');
  Simulation sim(x, empty_demand(x));
  const int north = x.incoming_lane(0, 0);
  sim.place_vehicle(make_vehicle(7, north, 50.0, x.speed_limit));
  bool crossed = false;
  for (int s = 0; s < 10 && !crossed; ++s) {
    for (auto id : sim.step().crossed) crossed |= id == 7;
  }
  ASSERT_TRUE(crossed);
  const Vehicle* v = find(sim, 7);
  ASSERT_NE(v, nullptr);
  EXPECT_FALSE(x.is_incoming(v->lane));
  EXPECT_EQ(x.lanes[v->lane].approach, destination(0, Movement::Through));
}

TEST(Simulation, FollowerConvergesBehindStoppedLeader) {
  const auto x = build_scenario('a');
  Simulation sim(x, empty_demand(x));
  const int east = x.incoming_lane(1, 0);
  sim.place_vehicle(make_vehicle(1, east, 2.0, 0.0));
  sim.place_vehicle(make_vehicle(2, east, 150.0, x.speed_limit));
  for (int s = 0; s < 120; ++s) {
    if (sim.decision_point()) sim.apply_action(0);
    sim.step();
    const auto& q = sim.lane(east);
    ASSERT_EQ(q.size(), 2u);
    const double bumper_gap = q[1].pos - q[0].pos - q[0].length;
    ASSERT_GE(bumper_gap, q[1].min_gap - 1e-9);
  }
  const auto& q = sim.lane(east);
  EXPECT_LT(q[1].speed, 0.1);
  EXPECT_NEAR(q[1].pos - q[0].pos - q[0].length, q[1].min_gap, 1.0);
}

TEST(Simulation, FollowerConvergesToMovingLeaderSpeed) {
  const auto x = build_scenario('a');
  SimParams params;
  params.car_following.v_max = x.speed_limit;
  Simulation sim(x, empty_demand(x), params);
  const int out = x.outgoing_lane(2, 0);
  sim.place_vehicle(make_vehicle(1, out, 200.0, x.speed_limit));
  sim.place_vehicle(make_vehicle(2, out, 290.0, 0.0));
  for (int s = 0; s < 14; ++s) sim.step();
  const auto& q = sim.lane(out);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_DOUBLE_EQ(q[1].speed, q[0].speed);
  EXPECT_GE(q[1].pos - q[0].pos - q[0].length, q[1].min_gap);
}

TEST(Simulation, YellowDilemmaRule) {
  const auto x = build_scenario('a');
  Simulation sim(x, empty_demand(x));
  for (int s = 0; s < 10; ++s) sim.step();
  const int near_lane = x.incoming_lane(0, 0), far_lane = x.incoming_lane(2, 0);
  // 13.89^2 = 192.9 > 2 * 4.5 * 5 but < 2 * 4.5 * 100.
  sim.place_vehicle(make_vehicle(1, near_lane, 5.0, x.speed_limit));
  sim.place_vehicle(make_vehicle(2, far_lane, 100.0, x.speed_limit));
  sim.apply_action(1);
  ASSERT_EQ(sim.timer().stage(), Stage::Change);
  bool near_crossed = false, far_crossed = false;
  for (int s = 0; s < 5; ++s) {
    for (auto id : sim.step().crossed) {
      near_crossed |= id == 1;
      far_crossed |= id == 2;
    }
  }
  EXPECT_TRUE(near_crossed);
  EXPECT_FALSE(far_crossed);
  EXPECT_EQ(find(sim, 2)->lane, far_lane);
}

TEST(Simulation, PermissiveLeftWaitsForOpposingGap) {
  const auto x = build_scenario('a');
  const int left = x.incoming_lane(0, 1), opposing = x.incoming_lane(2, 0);
  {
    Simulation sim(x, empty_demand(x));
    sim.place_vehicle(make_vehicle(1, left, 1.0, 0.0, Movement::Left));
    sim.place_vehicle(make_vehicle(2, opposing, 30.0, x.speed_limit));
    const auto ev = sim.step();
    EXPECT_TRUE(std::find(ev.crossed.begin(), ev.crossed.end(), 1u) == ev.crossed.end());
    EXPECT_EQ(find(sim, 1)->lane, left);
  }
  {
    Simulation sim(x, empty_demand(x));
    sim.place_vehicle(make_vehicle(1, left, 1.0, 0.0, Movement::Left));
    sim.place_vehicle(make_vehicle(2, opposing, 200.0, x.speed_limit));
    const auto ev = sim.step();
    EXPECT_FALSE(std::find(ev.crossed.begin(), ev.crossed.end(), 1u) == ev.crossed.end());
  }
}

TEST(Simulation, InvariantsUnderRandomTraffic) {
  for (char tag : {'a', 'b', 'c'}) {
    const auto x = build_scenario(tag);
    Simulation sim(x, busy_demand(x, 31));
    while (!sim.done()) {
      cycle_control(sim);
      std::map<std::uint32_t, int> connection_of;
      std::vector<SignalState> state(x.connections.size());
      for (std::size_t c = 0; c < state.size(); ++c) state[c] = sim.connection_state(static_cast<int>(c));
      for (int l = 0; l < x.incoming_count(); ++l) {
        for (const auto& v : sim.lane(l)) connection_of[v.id] = v.connection;
      }
      const auto ev = sim.step();

      // Only green or yellow movements discharge.
      for (auto id : ev.crossed) ASSERT_NE(state[connection_of.at(id)], SignalState::Red) << tag;

      ASSERT_EQ(sim.arrived_total(), sim.in_network() + sim.exited_total() + sim.pending());
      ASSERT_EQ(sim.inserted_total(), sim.in_network() + sim.exited_total());
      for (int l = 0; l < x.lane_count(); ++l) {
        const auto& q = sim.lane(l);
        for (std::size_t i = 0; i < q.size(); ++i) {
          ASSERT_GE(q[i].speed, 0.0);
          ASSERT_LE(q[i].speed, x.speed_limit + 1e-9);
          ASSERT_GE(q[i].pos, 0.0);
          ASSERT_LE(q[i].pos, x.approach_length + 1e-9);
          if (i > 0) {
            ASSERT_GE(q[i].pos - q[i - 1].pos - q[i - 1].length, 0.0) << "collision on lane " << l;
          }
        }
      }
    }
    EXPECT_GT(sim.exited_total(), 1000u) << tag;
  }
}

TEST(Simulation, GreenConnectionsBelongToOnePhase) {
  const auto x = build_scenario('c');
  Simulation sim(x, busy_demand(x, 2));
  for (int s = 0; s < 600; ++s) {
    cycle_control(sim);
    std::vector<bool> green(x.connections.size());
    int yellow = 0;
    for (std::size_t c = 0; c < green.size(); ++c) {
      const auto st = sim.connection_state(static_cast<int>(c));
      green[c] = st == SignalState::Green;
      yellow += st == SignalState::Yellow;
    }
    if (sim.timer().stage() == Stage::Green) {
      EXPECT_EQ(green, x.phase_connection_mask(sim.timer().phase()));
      EXPECT_EQ(yellow, 0);
    } else {
      for (bool g : green) EXPECT_FALSE(g);
    }
    sim.step();
  }
}

TEST(Simulation, BitIdenticalReplay) {
  const auto x = build_scenario('b');
  SimParams params;
  params.record_events = true;
  std::string csv[2];
  for (auto& out : csv) {
    Simulation sim(x, busy_demand(x, 77), params);
    while (!sim.done()) {
      cycle_control(sim);
      sim.step();
    }
    std::ostringstream os;
    sim.write_event_csv(os);
    out = os.str();
  }
  EXPECT_GT(csv[0].size(), 1000u);
  EXPECT_EQ(csv[0], csv[1]);
  EXPECT_EQ(csv[0].substr(0, csv[0].find('\n')), "t,event,vehicle_id,is_cv,lane,pos,speed,phase,stage");
}

TEST(Simulation, CvViewHidesUnconnectedVehicles) {
  const auto x = build_scenario('a');
  Simulation sim(x, busy_demand(x, 5, 0.4));
  for (int s = 0; s < 300; ++s) {
    cycle_control(sim);
    sim.step();
  }
  const auto obs = sim.observe();
  const auto cv = obs.cv_view();
  std::size_t cvs = 0;
  for (const auto& v : obs.vehicles) cvs += v.is_cv;
  EXPECT_EQ(cv.vehicles().size(), cvs);
  EXPECT_LT(cvs, obs.vehicles.size());
  for (const auto& v : cv.vehicles()) EXPECT_TRUE(v.is_cv);
  EXPECT_EQ(cv.lane_green(), obs.lane_green);
  EXPECT_THROW(CvObservation::from_parts(0.0, {VehicleView{1, 0, 5.0, 0.0, false}}, {}), Error);
}

TEST(Simulation, EmptyDemandHasNoTraffic) {
  const auto x = build_scenario('c');
  Simulation sim(x, empty_demand(x));
  EXPECT_TRUE(sim.arrivals().empty());
  while (!sim.done()) sim.step();
  EXPECT_EQ(sim.in_network(), 0u);
  EXPECT_EQ(sim.total_delay(), 0.0);
}

TEST(Simulation, HorizonCountsSteps) {
  const auto x = build_scenario('a');
  SimParams params;
  params.horizon = 120.0;
  Simulation sim(x, busy_demand(x, 1), params);
  int steps = 0;
  while (!sim.done()) {
    sim.step();
    ++steps;
  }
  EXPECT_EQ(steps, 120);
  for (const auto& a : sim.arrivals()) EXPECT_LT(a.time, 120.0);
}

TEST(Simulation, InsertionAtLaneStartAtSafeSpeed) {
  const auto x = build_scenario('a');
  DemandConfig d = empty_demand(x);
  d.flows = {3600, 0, 0, 0};
  for (auto& c : x.connections) {
    if (x.lanes[c.from_lane].approach == 0) d.turn_weights[c.id] = c.movement == Movement::Through ? 0.98 : 0.01;
  }
  Simulation sim(x, d);
  const auto ev = sim.step();
  for (auto id : ev.inserted) {
    const Vehicle* v = find(sim, id);
    ASSERT_NE(v, nullptr);
    EXPECT_LE(v->pos, x.approach_length);
    EXPECT_GT(v->pos, x.approach_length - x.speed_limit - 1e-9);
  }
  // Saturated entry: pending vehicles queue up but stay conserved.
  for (int s = 0; s < 600; ++s) sim.step();
  EXPECT_EQ(sim.arrived_total(), sim.in_network() + sim.exited_total() + sim.pending());
}
