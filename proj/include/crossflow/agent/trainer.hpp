#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crossflow/agent/dqn.hpp"
#include "crossflow/nn/checkpoint.hpp"

namespace crossflow::agent {

/// How p_cv is chosen for each episode: a fixed value (1.0 = full
/// detection) or uniform on [0, 1].
struct PcvMode {
  enum class Kind { Fixed, Uniform };
  Kind kind = Kind::Uniform;
  double value = 1.0;

  static PcvMode fixed(double p);
  static PcvMode uniform() { return {}; }
  /// "fixed:<p>" or "uniform".
  static PcvMode parse(const std::string& text);
  std::string to_string() const;
  bool operator==(const PcvMode&) const = default;
};

struct TrainConfig {
  char scenario = 'a';
  std::uint64_t seed = 1;
  std::uint64_t steps = 4'000'000;  // agent decisions
  double gamma = 0.99;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double epsilon_min = 0.01;
  double epsilon_decay = 2'000'000;
  double tau = 1e-3;
  int batch_size = 64;
  std::uint64_t buffer_capacity = 1'000'000;
  std::uint64_t warmup = 100'000;
  double head_scale = 0.01;
  PcvMode pcv = PcvMode::uniform();
  std::optional<double> green_max;
  double horizon = 3600.0;
  /// Write an intermediate checkpoint every this many steps (0 = never).
  std::uint64_t checkpoint_every = 50'000;

  void validate() const;
};

/// One row of the training log: a finished (or final partial) episode.
struct EpisodeLog {
  std::uint64_t step = 0;  // decisions taken when the episode ended
  std::uint64_t episode = 0;
  double loss = 0.0;  // mean Huber loss of the episode's updates
  double mean_reward = 0.0;
  double epsilon = 0.0;
  double emtd = 0.0;
};

struct StepMetrics {
  double loss = 0.0;
  double epsilon = 0.0;
  double reward = 0.0;
  bool episode_end = false;
};

/// Owns the whole training state; every random draw comes from substreams
/// of `cfg.seed`, so two trainers with equal configs evolve identically.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  const sim::Intersection& intersection() const { return env_.intersection(); }
  const DqnLearner& learner() const { return learner_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const reward::RewardState& reward_state() const { return reward_; }
  std::uint64_t steps() const { return t_; }
  const std::vector<EpisodeLog>& log() const { return log_; }

  /// Demand of the k-th episode of a given stream ("warmup" or "train").
  sim::DemandConfig episode_demand(const std::string& stream, std::uint64_t k) const;

  /// Random-action episodes until the memory holds the warm-up count.
  void warmup_fill();
  /// One agent decision with one gradient update. Throws while the memory
  /// is below its warm-up size.
  StepMetrics train_step();
  /// Closes the running episode early (adds its log row).
  void finish_partial_episode();

  nn::CheckpointMeta checkpoint_meta() const;

 private:
  void begin_episode();
  void close_episode();

  TrainConfig cfg_;
  DecisionEnv env_;
  DqnLearner learner_;
  ReplayBuffer buffer_;
  reward::RewardState reward_;
  RngStream explore_rng_;
  RngStream replay_rng_;
  std::uint64_t t_ = 0;
  std::uint64_t episode_ = 0;
  double ep_loss_ = 0.0, ep_reward_ = 0.0;
  std::uint64_t ep_updates_ = 0;
  std::vector<EpisodeLog> log_;
};

struct TrainOutputs {
  std::filesystem::path checkpoint;  // final model
  std::filesystem::path log;         // CSV
  std::vector<std::filesystem::path> intermediate;
};

/// Warm-up, `cfg.steps` decisions, checkpoints and CSV log under `out`.
/// `progress` (optional) is called after each logged episode.
TrainOutputs train(const TrainConfig& cfg, const std::filesystem::path& out,
                   const std::function<void(const EpisodeLog&)>& progress = {});

void write_train_log(const std::filesystem::path& path, const std::vector<EpisodeLog>& rows);

}  // namespace crossflow::agent
