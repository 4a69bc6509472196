#include "crossflow/agent/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "crossflow/error.hpp"
#include "crossflow/nn/checkpoint.hpp"

namespace crossflow::agent {

namespace fs = std::filesystem;

PcvMode PcvMode::fixed(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p_cv must lie in [0, 1]");
  return {Kind::Fixed, p};
}

PcvMode PcvMode::parse(const std::string& text) {
  if (text == "uniform") return uniform();
  const std::string prefix = "fixed:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string num = text.substr(prefix.size());
    std::size_t used = 0;
    double p = 0.0;
    try {
      p = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != num.size()) throw ConfigError("bad p_cv value in '" + text + "'");
    return fixed(p);
  }
  throw ConfigError("p_cv mode must be 'uniform' or 'fixed:<p>', got '" + text + "'");
}

std::string PcvMode::to_string() const {
  if (kind == Kind::Uniform) return "uniform";
  char buf[48];
  std::snprintf(buf, sizeof buf, "fixed:%.17g", value);
  return buf;
}

void TrainConfig::validate() const {
  (void)sim::build_scenario(scenario);
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2 must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  if (!(epsilon_min > 0.0 && epsilon_min < 1.0)) throw ConfigError("epsilon_min must lie in (0, 1)");
  if (!(epsilon_decay > 0.0)) throw ConfigError("epsilon_decay must be positive");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be positive");
  if (warmup > buffer_capacity) throw ConfigError("warmup exceeds buffer_capacity");
  if (!(head_scale > 0.0)) throw ConfigError("head_scale must be positive");
  if (green_max && !(*green_max >= 10.0)) throw ConfigError("green_max must be at least the minimum green");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
}

namespace {

sim::Intersection scenario_for(const TrainConfig& cfg) {
  cfg.validate();
  auto x = sim::build_scenario(cfg.scenario);
  x.program.green_max = cfg.green_max;
  return x;
}

sim::SimParams sim_params_for(const TrainConfig& cfg) {
  sim::SimParams p;
  p.horizon = cfg.horizon;
  return p;
}

nn::NetworkParams initial_params(const sim::Intersection& x, const TrainConfig& cfg) {
  const auto arch = nn::Architecture::for_input(dtse::state_shape(x), static_cast<int>(x.program.phases.size()));
  RngStream rng = RngStream(cfg.seed).split("init");
  nn::InitConfig init;
  init.head_scale = static_cast<float>(cfg.head_scale);
  return nn::NetworkParams::initialize(arch, rng, init);
}

DqnLearner::Hyper hyper_for(const TrainConfig& cfg) {
  DqnLearner::Hyper h;
  h.gamma = static_cast<float>(cfg.gamma);
  h.tau = static_cast<float>(cfg.tau);
  h.adam.learning_rate = static_cast<float>(cfg.learning_rate);
  h.adam.beta1 = static_cast<float>(cfg.adam_beta1);
  h.adam.beta2 = static_cast<float>(cfg.adam_beta2);
  h.adam.epsilon = static_cast<float>(cfg.adam_epsilon);
  return h;
}

}  // namespace

Trainer::Trainer(TrainConfig cfg)
    : cfg_(cfg),
      env_(scenario_for(cfg), sim_params_for(cfg)),
      learner_(initial_params(env_.intersection(), cfg), hyper_for(cfg)),
      buffer_(cfg.buffer_capacity, cfg.warmup),
      explore_rng_(RngStream(cfg.seed).split("explore")),
      replay_rng_(RngStream(cfg.seed).split("replay")) {}

sim::DemandConfig Trainer::episode_demand(const std::string& stream, std::uint64_t k) const {
  RngStream rng = RngStream(cfg_.seed).split("demand").split(stream).split(k);
  auto d = sim::sample_demand(env_.intersection(), rng);
  if (cfg_.pcv.kind == PcvMode::Kind::Fixed) d.p_cv = cfg_.pcv.value;
  return d;
}

nn::CheckpointMeta Trainer::checkpoint_meta() const {
  nn::CheckpointMeta m;
  m.scenario = cfg_.scenario;
  m.step = t_;
  m.tsd_max = reward_.tsd_max();
  return m;
}

void Trainer::warmup_fill() {
  if (buffer_.size() != 0) throw Error("warm-up needs an empty replay memory");
  RngStream actions = RngStream(cfg_.seed).split("warmup-actions");
  std::uint64_t k = 0;
  while (buffer_.size() < cfg_.warmup) {
    env_.reset(episode_demand("warmup", k++));
    while (env_.active() && buffer_.size() < cfg_.warmup) {
      const int a = static_cast<int>(actions.uniform_int(env_.actions()));
      auto s = CompactState::pack(env_.state());
      auto res = env_.act(a);
      const double r = reward_.reward(res.tsd);
      buffer_.push({std::move(s), a, CompactState::pack(res.next), static_cast<float>(r), res.terminal});
    }
  }
}

void Trainer::begin_episode() {
  env_.reset(episode_demand("train", episode_));
  ep_loss_ = ep_reward_ = 0.0;
  ep_updates_ = 0;
}

void Trainer::close_episode() {
  EpisodeLog row;
  row.step = t_;
  row.episode = episode_;
  row.loss = ep_updates_ ? ep_loss_ / static_cast<double>(ep_updates_) : 0.0;
  row.mean_reward = ep_updates_ ? ep_reward_ / static_cast<double>(ep_updates_) : 0.0;
  row.epsilon = epsilon_at(t_, cfg_.epsilon_min, cfg_.epsilon_decay);
  row.emtd = env_.emtd();
  log_.push_back(row);
  ++episode_;
  ep_updates_ = 0;
}

StepMetrics Trainer::train_step() {
  if (buffer_.size() < cfg_.warmup) throw Error("replay memory is below its warm-up size; run warmup_fill first");
  if (!env_.active()) begin_episode();

  StepMetrics m;
  m.epsilon = epsilon_at(t_, cfg_.epsilon_min, cfg_.epsilon_decay);
  const auto q = learner_.q_values(env_.state());
  const int a = select_action(q, m.epsilon, explore_rng_);
  auto s = CompactState::pack(env_.state());
  auto res = env_.act(a);
  m.reward = reward_.reward(res.tsd);
  buffer_.push({std::move(s), a, CompactState::pack(res.next), static_cast<float>(m.reward), res.terminal});

  const auto batch = buffer_.sample_indices(static_cast<std::size_t>(cfg_.batch_size), replay_rng_);
  m.loss = learner_.update(buffer_, batch);
  if (!std::isfinite(m.loss)) throw Error("training diverged: non-finite loss");
  ++t_;

  ep_loss_ += m.loss;
  ep_reward_ += m.reward;
  ++ep_updates_;
  if (res.terminal) {
    close_episode();
    m.episode_end = true;
  }
  return m;
}

void Trainer::finish_partial_episode() {
  if (env_.active() && ep_updates_ > 0) close_episode();
}

void write_train_log(const fs::path& path, const std::vector<EpisodeLog>& rows) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw Error("cannot write " + path.string());
  std::fprintf(f, "step,episode,loss,mean_reward,epsilon,emtd\n");
  for (const auto& r : rows) {
    std::fprintf(f, "%llu,%llu,%.9g,%.9g,%.9g,%.9g\n", static_cast<unsigned long long>(r.step),
                 static_cast<unsigned long long>(r.episode), r.loss, r.mean_reward, r.epsilon, r.emtd);
  }
  const bool ok = std::fflush(f) == 0;
  std::fclose(f);
  if (!ok) throw Error("failed writing " + path.string());
}

TrainOutputs train(const TrainConfig& cfg, const fs::path& out,
                   const std::function<void(const EpisodeLog&)>& progress) {
  if (!fs::is_directory(out)) throw Error("output directory does not exist: " + out.string());
  Trainer trainer(cfg);
  TrainOutputs result;
  result.checkpoint = out / "model.tscq";
  result.log = out / "train_log.csv";

  if (cfg.steps > 0) {
    trainer.warmup_fill();
    const fs::path dir = out / "checkpoints";
    if (cfg.checkpoint_every > 0) fs::create_directories(dir);
    while (trainer.steps() < cfg.steps) {
      const auto m = trainer.train_step();
      if (m.episode_end && progress) progress(trainer.log().back());
      if (cfg.checkpoint_every > 0 && trainer.steps() % cfg.checkpoint_every == 0 &&
          trainer.steps() < cfg.steps) {
        char name[48];
        std::snprintf(name, sizeof name, "step_%010llu.tscq", static_cast<unsigned long long>(trainer.steps()));
        nn::write_checkpoint_file(dir / name, trainer.learner().online(), trainer.checkpoint_meta());
        result.intermediate.push_back(dir / name);
      }
    }
    const std::size_t before = trainer.log().size();
    trainer.finish_partial_episode();
    if (trainer.log().size() > before && progress) progress(trainer.log().back());
  }
  nn::write_checkpoint_file(result.checkpoint, trainer.learner().online(), trainer.checkpoint_meta());
  write_train_log(result.log, trainer.log());
  return result;
}

}  // namespace crossflow::agent
