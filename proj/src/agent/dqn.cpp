#include "crossflow/agent/dqn.hpp"

#include <cmath>

#include "crossflow/error.hpp"
#include "crossflow/nn/ops.hpp"

namespace crossflow::agent {

double epsilon_at(std::uint64_t t, double epsilon_min, double epsilon_decay) {
  if (!(epsilon_min > 0.0 && epsilon_min < 1.0)) throw Error("epsilon_min must lie in (0, 1)");
  if (!(epsilon_decay > 0.0)) throw Error("epsilon_decay must be positive");
  const double eps = std::exp(-static_cast<double>(t) * std::log(1.0 / epsilon_min) / epsilon_decay);
  return std::max(epsilon_min, eps);
}

int argmax(std::span<const float> q) {
  if (q.empty()) throw Error("argmax of an empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(q.size()); ++i) {
    if (q[i] > q[best]) best = i;
  }
  return best;
}

int select_action(std::span<const float> q, double epsilon, RngStream& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw Error("epsilon must lie in [0, 1]");
  if (rng.uniform() < epsilon) return static_cast<int>(rng.uniform_int(q.size()));
  return argmax(q);
}

float double_td_error(float reward, float gamma, std::span<const float> q_next_online,
                      std::span<const float> q_next_target, float q_taken, bool terminal) {
  float target = reward;
  if (!terminal) target += gamma * q_next_target[argmax(q_next_online)];
  return target - q_taken;
}

DqnLearner::DqnLearner(nn::NetworkParams online, Hyper hyper)
    : online_(std::move(online)), target_(online_), hyper_(hyper), adam_(online_.size(), hyper.adam) {
  if (hyper.gamma < 0.0f || hyper.gamma > 1.0f) throw Error("gamma must lie in [0, 1]");
  if (hyper.tau < 0.0f || hyper.tau > 1.0f) throw Error("tau must lie in [0, 1]");
}

void DqnLearner::gather(const ReplayBuffer& buffer, std::span<const std::size_t> batch) {
  const auto& shape = online_.arch().input;
  const std::size_t d = static_cast<std::size_t>(shape.size());
  states_.resize(d * batch.size());
  next_states_.resize(d * batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Transition& t = buffer.at(batch[b]);
    t.s.unpack(shape, states_.data() + d * b);
    t.next.unpack(shape, next_states_.data() + d * b);
  }
}

void DqnLearner::compute_deltas(const ReplayBuffer& buffer, std::span<const std::size_t> batch) {
  const int m = static_cast<int>(batch.size());
  const int a = online_.arch().actions;
  gather(buffer, batch);
  nn::forward(online_, next_states_, m, ws_next_online_);
  nn::forward(target_, next_states_, m, ws_next_target_);
  nn::forward(online_, states_, m, ws_train_);
  deltas_.resize(m);
  for (int b = 0; b < m; ++b) {
    const Transition& t = buffer.at(batch[b]);
    const std::span<const float> qn(ws_next_online_.q.data() + b * a, a);
    const std::span<const float> qt(ws_next_target_.q.data() + b * a, a);
    deltas_[b] = double_td_error(t.reward, hyper_.gamma, qn, qt, ws_train_.q[b * a + t.action], t.terminal);
  }
}

std::vector<float> DqnLearner::td_errors(const ReplayBuffer& buffer, std::span<const std::size_t> batch) {
  if (batch.empty()) throw Error("empty batch");
  compute_deltas(buffer, batch);
  return deltas_;
}

double DqnLearner::update(const ReplayBuffer& buffer, std::span<const std::size_t> batch) {
  if (batch.empty()) throw Error("empty batch");
  compute_deltas(buffer, batch);
  const int m = static_cast<int>(batch.size());
  const int a = online_.arch().actions;
  // delta = y - Q(s,a) with y constant, so dL/dQ(s,a) = -dL/ddelta; other
  // actions get no gradient.
  dq_.assign(static_cast<std::size_t>(m) * a, 0.0f);
  for (int b = 0; b < m; ++b) {
    dq_[b * a + buffer.at(batch[b]).action] = -nn::huber_grad(deltas_[b], m);
  }
  nn::backward(online_, ws_train_, dq_, grads_);
  adam_.step(online_.data(), grads_);
  nn::polyak_update(target_.data(), online_.data(), hyper_.tau);
  return nn::huber_loss(deltas_);
}

std::vector<float> DqnLearner::q_values(const dtse::PartialDtse& s) {
  nn::forward(online_, s.values(), 1, ws_single_);
  return ws_single_.q;
}

int act_greedy(const nn::NetworkParams& params, const dtse::PartialDtse& s) {
  return argmax(nn::evaluate(params, s).q);
}

DqnController::DqnController(std::shared_ptr<const nn::NetworkParams> params, dtse::EncoderConfig enc)
    : params_(std::move(params)), enc_(enc) {
  if (!params_) throw Error("DQN controller needs parameters");
}

void DqnController::control(sim::Simulation& sim) {
  if (!sim.decision_point()) return;
  const auto s = dtse::encode(sim.observe().cv_view(), sim.intersection(), enc_);
  if (!(s.shape() == params_->arch().input) ||
      params_->arch().actions != static_cast<int>(sim.intersection().program.phases.size())) {
    throw Error(std::string("checkpoint does not match scenario ") + sim.intersection().tag);
  }
  nn::forward(*params_, s.values(), 1, ws_);
  sim.apply_action(argmax(ws_.q));
}

DecisionEnv::DecisionEnv(sim::Intersection x, sim::SimParams params, dtse::EncoderConfig enc)
    : x_(std::move(x)), params_(params), enc_(enc) {
  x_.validate();
}

dtse::PartialDtse DecisionEnv::encode_now() const {
  return dtse::encode(sim_->observe().cv_view(), x_, enc_);
}

double DecisionEnv::run_to_decision(int& seconds) {
  double tsd = 0.0;
  seconds = 0;
  while (!sim_->done()) {
    sim_->step();
    ++seconds;
    ++sim_steps_;
    delay_sum_ += sim_->total_delay();
    tsd += sim_->total_squared_delay();
    if (sim_->decision_point()) break;
  }
  done_ = sim_->done();
  return tsd;
}

void DecisionEnv::reset(const sim::DemandConfig& demand) {
  sim_ = std::make_unique<sim::Simulation>(x_, demand, params_);
  delay_sum_ = 0.0;
  sim_steps_ = 0;
  done_ = false;
  int seconds = 0;
  run_to_decision(seconds);
  state_ = encode_now();
}

DecisionEnv::StepResult DecisionEnv::act(int action) {
  if (!active()) throw Error("episode is not running");
  if (action < 0 || action >= actions()) throw Error("action out of range");
  sim_->apply_action(action);
  StepResult r;
  const double tsd = run_to_decision(r.seconds);
  r.tsd = r.seconds > 0 ? tsd / r.seconds : 0.0;
  r.terminal = done_;
  r.next = encode_now();
  state_ = r.next;
  return r;
}

}  // namespace crossflow::agent
