#pragma once

#include <memory>
#include <string>
#include <vector>

#include "crossflow/rng.hpp"
#include "crossflow/sim/simulation.hpp"

namespace crossflow::control {

/// Hold keeps the signal as is; Select picks a phase at a decision point
/// (acyclic controllers); Advance moves to the next phase of the cycle.
struct ControllerDecision {
  enum class Kind { Hold, Select, Advance };
  Kind kind = Kind::Hold;
  int phase = -1;

  static ControllerDecision hold() { return {}; }
  static ControllerDecision select(int p) { return {Kind::Select, p}; }
  static ControllerDecision advance() { return {Kind::Advance, -1}; }
};

/// Incoming count minus outgoing count over the lanes a phase serves.
int pressure(const sim::Intersection& x, const sim::Observation& obs, int phase);
std::vector<int> pressures(const sim::Intersection& x, const sim::Observation& obs);

/// Argmax pressure phase, ties to the lowest index. Hold outside decision points.
ControllerDecision max_pressure_decide(const sim::Intersection& x, const sim::Observation& obs);

struct SotlParams {
  double mu = 50.0;    // vehicle-steps threshold
  int nu = 3;          // platoon size that may hold the green
  double psi = 80.0;   // m, red-lane counting range
  double omega = 25.0; // m, platoon range
};

struct SotlState {
  double chi = 0.0;
};

/// One SOTL tick: accumulate red-lane demand, then release the green when
/// chi > mu unless a small platoon (0 < eta <= nu) is about to pass.
ControllerDecision sotl_step(const sim::Intersection& x, const sim::Observation& obs,
                             SotlState& state, const SotlParams& params = {});

/// Cyclic advance once the green has lasted `green` seconds.
ControllerDecision fixed_time_decide(const sim::PhaseTimer& timer, double green = 30.0);

ControllerDecision random_decide(int phase_count, RngStream& rng);

/// Runtime wrapper: `control` is called once before every simulation step.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// Called at the start of every episode.
  virtual void reset(std::uint64_t /*episode_seed*/) {}
  virtual void control(sim::Simulation& sim) = 0;
};

/// Applies a decision to the simulation; Hold is a no-op.
void apply(sim::Simulation& sim, const ControllerDecision& d);

class MaxPressureController final : public Controller {
 public:
  std::string name() const override { return "maxpressure"; }
  void control(sim::Simulation& sim) override;
};

class SotlController final : public Controller {
 public:
  explicit SotlController(SotlParams params = {}) : params_(params) {}
  std::string name() const override { return "sotl"; }
  void reset(std::uint64_t) override { state_ = {}; }
  void control(sim::Simulation& sim) override;
  const SotlState& state() const { return state_; }

 private:
  SotlParams params_;
  SotlState state_;
};

class FixedTimeController final : public Controller {
 public:
  explicit FixedTimeController(double green = 30.0) : green_(green) {}
  std::string name() const override { return "fixed"; }
  void control(sim::Simulation& sim) override;

 private:
  double green_;
};

class RandomController final : public Controller {
 public:
  std::string name() const override { return "random"; }
  void reset(std::uint64_t episode_seed) override;
  void control(sim::Simulation& sim) override;

 private:
  RngStream rng_{0};
};

/// "maxpressure", "sotl", "fixed" or "random".
std::unique_ptr<Controller> make_baseline(const std::string& name);
bool is_baseline(const std::string& name);

}  // namespace crossflow::control
