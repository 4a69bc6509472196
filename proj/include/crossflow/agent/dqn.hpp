#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crossflow/agent/replay.hpp"
#include "crossflow/controllers.hpp"
#include "crossflow/dtse.hpp"
#include "crossflow/nn/adam.hpp"
#include "crossflow/nn/network.hpp"
#include "crossflow/reward.hpp"
#include "crossflow/sim/simulation.hpp"

namespace crossflow::agent {

/// Exploration schedule max(eps_min, exp(-t ln(1/eps_min) / eps_dec)):
/// 1 at t = 0, eps_min from t = eps_dec on.
double epsilon_at(std::uint64_t t, double epsilon_min, double epsilon_decay);

/// Lowest index among the maxima.
int argmax(std::span<const float> q);

/// Uniform random action with probability epsilon, else argmax of q.
int select_action(std::span<const float> q, double epsilon, RngStream& rng);

/// r + gamma * Q_target(s', argmax_a' Q_online(s', a')) - Q(s, a); the
/// bootstrap term is dropped for terminal transitions.
float double_td_error(float reward, float gamma, std::span<const float> q_next_online,
                      std::span<const float> q_next_target, float q_taken, bool terminal);

/// Online and target networks with their optimizer. One `update` is one
/// Adam step on a batch followed by a Polyak step of the target.
class DqnLearner {
 public:
  struct Hyper {
    float gamma = 0.99f;
    float tau = 1e-3f;
    nn::AdamConfig adam{};
  };

  DqnLearner(nn::NetworkParams online, Hyper hyper);

  const nn::NetworkParams& online() const { return online_; }
  const nn::NetworkParams& target() const { return target_; }
  nn::NetworkParams& online_mut() { return online_; }
  nn::NetworkParams& target_mut() { return target_; }
  const nn::AdamState& adam() const { return adam_; }
  const Hyper& hyper() const { return hyper_; }

  /// Per-transition double TD errors for a batch (no parameter change).
  std::vector<float> td_errors(const ReplayBuffer& buffer, std::span<const std::size_t> batch);
  /// Gradient step on the Huber loss of the batch; returns the loss.
  double update(const ReplayBuffer& buffer, std::span<const std::size_t> batch);

  /// Greedy Q values for one state.
  std::vector<float> q_values(const dtse::PartialDtse& s);

 private:
  void gather(const ReplayBuffer& buffer, std::span<const std::size_t> batch);
  void compute_deltas(const ReplayBuffer& buffer, std::span<const std::size_t> batch);

  nn::NetworkParams online_;
  nn::NetworkParams target_;
  Hyper hyper_;
  nn::AdamState adam_;
  nn::Workspace ws_train_, ws_next_online_, ws_next_target_, ws_single_;
  std::vector<float> states_, next_states_, deltas_, dq_, grads_;
};

/// Greedy deployment policy: argmax_a Q(s, a).
int act_greedy(const nn::NetworkParams& params, const dtse::PartialDtse& s);

/// The trained policy as a signal controller. It sees only the CV view.
class DqnController final : public control::Controller {
 public:
  DqnController(std::shared_ptr<const nn::NetworkParams> params, dtse::EncoderConfig enc = {});
  std::string name() const override { return "dqn"; }
  void control(sim::Simulation& sim) override;

 private:
  std::shared_ptr<const nn::NetworkParams> params_;
  dtse::EncoderConfig enc_;
  nn::Workspace ws_;
};

/// Decision-level view of one episode: the agent acts at decision points
/// and the seconds in between are simulated inside `act`.
class DecisionEnv {
 public:
  struct StepResult {
    dtse::PartialDtse next;
    /// Mean total squared delay over the simulated seconds of the interval.
    double tsd = 0.0;
    int seconds = 0;
    bool terminal = false;
  };

  DecisionEnv(sim::Intersection x, sim::SimParams params = {}, dtse::EncoderConfig enc = {});

  /// Starts an episode and runs to its first decision point.
  void reset(const sim::DemandConfig& demand);
  bool active() const { return sim_ != nullptr && !done_; }
  const dtse::PartialDtse& state() const { return state_; }
  StepResult act(int action);

  const sim::Intersection& intersection() const { return x_; }
  const sim::Simulation& simulation() const { return *sim_; }
  int actions() const { return static_cast<int>(x_.program.phases.size()); }
  /// Summed linear delay and step count so far in this episode.
  double delay_sum() const { return delay_sum_; }
  std::uint64_t sim_steps() const { return sim_steps_; }
  double emtd() const { return sim_steps_ ? delay_sum_ / static_cast<double>(sim_steps_) : 0.0; }

 private:
  /// Simulates until a decision point or the horizon; returns summed tsd.
  double run_to_decision(int& seconds);
  dtse::PartialDtse encode_now() const;

  sim::Intersection x_;
  sim::SimParams params_;
  dtse::EncoderConfig enc_;
  std::unique_ptr<sim::Simulation> sim_;
  dtse::PartialDtse state_;
  bool done_ = true;
  double delay_sum_ = 0.0;
  std::uint64_t sim_steps_ = 0;
};

}  // namespace crossflow::agent
