#include "crossflow/sim/phase_timer.hpp"

#include "crossflow/error.hpp"

namespace crossflow::sim {

namespace {
constexpr double kEps = 1e-9;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Green: return "green";
    case Stage::Change: return "change";
    case Stage::Clearance: return "clearance";
  }
  return "?";
}

PhaseTimer::PhaseTimer(const SignalProgram& program, int initial_phase)
    : phases_(program.size()),
      green_min_(program.green_min),
      yellow_(program.yellow),
      red_(program.red),
      green_max_(program.green_max),
      phase_(initial_phase),
      previous_(initial_phase) {
  if (initial_phase < 0 || initial_phase >= phases_) throw Error("initial phase out of range");
}

bool PhaseTimer::decision_point() const {
  return stage_ == Stage::Green && since_decision_ + kEps >= green_min_;
}

bool PhaseTimer::can_switch() const {
  return stage_ == Stage::Green && green_elapsed_ + kEps >= green_min_;
}

void PhaseTimer::apply_action(int next) {
  if (next < 0 || next >= phases_) throw Error("phase index out of range");
  if (!decision_point()) throw Error("decision requested outside a legal decision point");
  if (next == phase_) {
    since_decision_ = 0.0;
  } else {
    begin_change(next);
  }
}

void PhaseTimer::switch_to(int next) {
  if (next < 0 || next >= phases_) throw Error("phase index out of range");
  if (!can_switch()) throw Error("phase change requested before minimum green elapsed");
  if (next == phase_) return;
  begin_change(next);
}

void PhaseTimer::begin_change(int next) {
  previous_ = phase_;
  phase_ = next;
  stage_ = Stage::Change;
  stage_elapsed_ = 0.0;
  since_decision_ = 0.0;
}

bool PhaseTimer::advance(double dt) {
  stage_elapsed_ += dt;
  switch (stage_) {
    case Stage::Green:
      green_elapsed_ += dt;
      since_decision_ += dt;
      if (green_max_ && green_elapsed_ + kEps >= *green_max_) {
        begin_change((phase_ + 1) % phases_);
        return true;
      }
      return false;
    case Stage::Change:
      if (stage_elapsed_ + kEps >= yellow_) {
        stage_elapsed_ = 0.0;
        if (red_ > 0.0) {
          stage_ = Stage::Clearance;
        } else {
          stage_ = Stage::Green;
          green_elapsed_ = 0.0;
          since_decision_ = 0.0;
        }
        return true;
      }
      return false;
    case Stage::Clearance:
      if (stage_elapsed_ + kEps >= red_) {
        stage_ = Stage::Green;
        stage_elapsed_ = 0.0;
        green_elapsed_ = 0.0;
        since_decision_ = 0.0;
        return true;
      }
      return false;
  }
  return false;
}

}  // namespace crossflow::sim
