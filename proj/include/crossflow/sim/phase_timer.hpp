#pragma once

#include <optional>

#include "crossflow/sim/scenario.hpp"

namespace crossflow::sim {

enum class Stage : int { Green = 0, Change = 1, Clearance = 2 };
const char* stage_name(Stage s);

/// green -> change (yellow) -> clearance (all red) -> green state machine.
///
/// `phase` is the phase being served: during change and clearance it is
/// already the upcoming phase, and `previous_phase` is the one showing
/// yellow. Decisions are legal only in green once `since_decision` has
/// reached the minimum green.
class PhaseTimer {
 public:
  PhaseTimer() = default;
  explicit PhaseTimer(const SignalProgram& program, int initial_phase = 0);

  int phase() const { return phase_; }
  int previous_phase() const { return previous_; }
  Stage stage() const { return stage_; }
  double stage_elapsed() const { return stage_elapsed_; }
  double green_elapsed() const { return green_elapsed_; }
  double since_decision() const { return since_decision_; }
  int phase_count() const { return phases_; }
  double green_min() const { return green_min_; }
  std::optional<double> green_max() const { return green_max_; }

  /// Acyclic decision point: green and a full minimum green since the last one.
  bool decision_point() const;
  /// Cyclic controllers may end the green once it has lasted the minimum.
  bool can_switch() const;

  /// Agent action: extend the current green by the minimum green, or start
  /// the change to `next`. Throws outside a decision point.
  void apply_action(int next);
  /// Cyclic advance to `next`. Throws unless `can_switch()`.
  void switch_to(int next);
  void advance_cycle() { switch_to((phase_ + 1) % phases_); }

  /// Advances the stage clocks by dt; returns true when the stage changed.
  bool advance(double dt);

 private:
  void begin_change(int next);

  int phases_ = 2;
  double green_min_ = 10.0;
  double yellow_ = 3.0;
  double red_ = 2.0;
  std::optional<double> green_max_;

  int phase_ = 0;
  int previous_ = 0;
  Stage stage_ = Stage::Green;
  double stage_elapsed_ = 0.0;
  double green_elapsed_ = 0.0;
  double since_decision_ = 0.0;
};

}  // namespace crossflow::sim
