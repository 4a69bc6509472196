#include "crossflow/controllers.hpp"

#include "crossflow/error.hpp"

namespace crossflow::control {

int pressure(const sim::Intersection& x, const sim::Observation& obs, int phase) {
  int p = 0;
  for (int l : x.phase_incoming_lanes(phase)) p += obs.lane_counts[l];
  for (int l : x.phase_outgoing_lanes(phase)) p -= obs.lane_counts[l];
  return p;
}

std::vector<int> pressures(const sim::Intersection& x, const sim::Observation& obs) {
  std::vector<int> out(x.program.size());
  for (int p = 0; p < x.program.size(); ++p) out[p] = pressure(x, obs, p);
  return out;
}

ControllerDecision max_pressure_decide(const sim::Intersection& x, const sim::Observation& obs) {
  if (!obs.timer.decision_point()) return ControllerDecision::hold();
  const auto ps = pressures(x, obs);
  int best = 0;
  for (int p = 1; p < static_cast<int>(ps.size()); ++p) {
    if (ps[p] > ps[best]) best = p;
  }
  return ControllerDecision::select(best);
}

ControllerDecision sotl_step(const sim::Intersection& x, const sim::Observation& obs,
                             SotlState& state, const SotlParams& params) {
  const auto served = x.phase_lane_mask(obs.timer.phase());
  int red_near = 0;
  int platoon = 0;
  for (const auto& v : obs.vehicles) {
    if (!x.is_incoming(v.lane)) continue;
    if (served[v.lane]) {
      if (v.pos <= params.omega) ++platoon;
    } else if (v.pos <= params.psi) {
      ++red_near;
    }
  }
  state.chi += red_near;
  if (obs.timer.can_switch() && state.chi > params.mu) {
    if (platoon == 0 || platoon > params.nu) {
      state.chi = 0.0;
      return ControllerDecision::advance();
    }
  }
  return ControllerDecision::hold();
}

ControllerDecision fixed_time_decide(const sim::PhaseTimer& timer, double green) {
  if (timer.stage() == sim::Stage::Green && timer.green_elapsed() + 1e-9 >= green &&
      timer.can_switch()) {
    return ControllerDecision::advance();
  }
  return ControllerDecision::hold();
}

ControllerDecision random_decide(int phase_count, RngStream& rng) {
  return ControllerDecision::select(static_cast<int>(rng.uniform_int(phase_count)));
}

void apply(sim::Simulation& sim, const ControllerDecision& d) {
  switch (d.kind) {
    case ControllerDecision::Kind::Hold: break;
    case ControllerDecision::Kind::Select: sim.apply_action(d.phase); break;
    case ControllerDecision::Kind::Advance: sim.advance_cycle(); break;
  }
}

void MaxPressureController::control(sim::Simulation& sim) {
  if (!sim.decision_point()) return;
  apply(sim, max_pressure_decide(sim.intersection(), sim.observe()));
}

void SotlController::control(sim::Simulation& sim) {
  apply(sim, sotl_step(sim.intersection(), sim.observe(), state_, params_));
}

void FixedTimeController::control(sim::Simulation& sim) {
  apply(sim, fixed_time_decide(sim.timer(), green_));
}

void RandomController::reset(std::uint64_t episode_seed) {
  rng_ = RngStream(episode_seed).split("random-controller");
}

void RandomController::control(sim::Simulation& sim) {
  if (!sim.decision_point()) return;
  apply(sim, random_decide(sim.timer().phase_count(), rng_));
}

bool is_baseline(const std::string& name) {
  return name == "maxpressure" || name == "sotl" || name == "fixed" || name == "random";
}

std::unique_ptr<Controller> make_baseline(const std::string& name) {
  if (name == "maxpressure") return std::make_unique<MaxPressureController>();
  if (name == "sotl") return std::make_unique<SotlController>();
  if (name == "fixed") return std::make_unique<FixedTimeController>();
  if (name == "random") return std::make_unique<RandomController>();
  throw Error("unknown controller '" + name + "'");
}

}  // namespace crossflow::control
