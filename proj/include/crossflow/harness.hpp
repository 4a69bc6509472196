#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crossflow/controllers.hpp"
#include "crossflow/nn/network.hpp"
#include "crossflow/sim/simulation.hpp"

namespace crossflow::harness {

struct EpisodeStats {
  char scenario = 'a';
  std::string controller;
  std::uint64_t episode = 0;
  std::uint64_t seed = 0;
  double p_cv = 1.0;
  /// Per-second mean of the summed linear delay of all in-network vehicles.
  double emtd = 0.0;
  std::uint64_t throughput = 0;  // vehicles that left the network
  std::uint64_t inserted = 0;
  double mean_queue = 0.0;  // vehicles below 0.1 m/s on incoming lanes
  std::uint64_t steps = 0;
};

/// Runs one full episode. `seed` resets the controller; exogenous traffic
/// comes only from `demand`.
EpisodeStats run_episode(const sim::Intersection& x, control::Controller& controller,
                         const sim::DemandConfig& demand, std::uint64_t seed,
                         const sim::SimParams& params = {});

/// Seed of evaluation episode `i` for a scenario; shared by all controllers.
std::uint64_t episode_seed(std::uint64_t base_seed, char scenario, std::uint64_t i);
/// Demand of an evaluation episode (p_cv as sampled; callers override it).
sim::DemandConfig episode_demand(const sim::Intersection& x, std::uint64_t seed);

/// Runs fn(0..n-1) on up to `jobs` threads (0 = hardware concurrency).
/// The first exception by index is rethrown after all workers stop.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

using ParamsRef = std::shared_ptr<const nn::NetworkParams>;

/// Loads a checkpoint and checks it fits `scenario`.
ParamsRef load_policy(const std::filesystem::path& path, char scenario);

/// Builds a fresh controller by name ("dqn" needs `params`).
std::unique_ptr<control::Controller> make_controller(const std::string& name, const ParamsRef& params);

struct EvalOptions {
  std::vector<char> scenarios{'a', 'b', 'c'};
  std::uint64_t base_seed = 1;
  int jobs = 0;
  std::optional<double> green_max;
  sim::SimParams sim{};
};

struct FdOptions : EvalOptions {
  std::uint64_t episodes = 50;
  std::vector<std::string> controllers{"dqn", "maxpressure", "sotl"};
  std::map<char, ParamsRef> policies;  // FD-trained, per scenario
  int histogram_bins = 20;
};

struct ControllerSummary {
  char scenario = 'a';
  std::string controller;
  std::uint64_t episodes = 0;
  double mean_emtd = 0.0;
  double std_emtd = 0.0;  // sample standard deviation
  double min_emtd = 0.0;
  double max_emtd = 0.0;
  std::uint64_t seed_digest = 0;  // equal across controllers of a scenario
};

struct FdReport {
  std::vector<EpisodeStats> episodes;  // ordered by scenario, controller, episode
  std::vector<ControllerSummary> summary;
};

FdReport compare_fd(const FdOptions& opts);
ControllerSummary summarize(const std::vector<EpisodeStats>& episodes);

struct PdOptions : EvalOptions {
  std::uint64_t episodes_per_bucket = 30;
  int buckets = 10;
  std::map<char, ParamsRef> pd_policies;
  /// FD reference per scenario; when absent the PD policy itself at p_cv = 1.
  std::map<char, ParamsRef> fd_policies;
  /// Extra pairs run at exactly p_cv = 1.
  std::uint64_t full_detection_pairs = 5;
  double acceptable_ceiling = 40.0;
  double optimal_ceiling = 20.0;
};

struct PdPair {
  char scenario = 'a';
  int bucket = -1;  // -1 for the p_cv = 1 check pairs
  std::uint64_t episode = 0;
  std::uint64_t seed = 0;
  double p_cv = 1.0;
  double emtd_pd = 0.0;
  double emtd_fd = 0.0;
  double loss_pct = 0.0;
};

/// 100 * (pd - fd) / fd, and 0 when fd is 0.
double loss_percent(double emtd_pd, double emtd_fd);

struct BucketSummary {
  char scenario = 'a';
  int bucket = 0;
  double lo = 0.0, hi = 0.0;
  std::uint64_t pairs = 0;
  double mean_loss = 0.0;
  double std_loss = 0.0;
  double mean_emtd_pd = 0.0;
  double mean_emtd_fd = 0.0;
};

struct Thresholds {
  std::optional<double> acceptable;
  std::optional<double> optimal;
};

struct ScenarioPd {
  char scenario = 'a';
  Thresholds thresholds;
  double spearman = 0.0;  // bucket lower bound vs mean loss
  double full_detection_loss = 0.0;  // max |loss| over the p_cv = 1 pairs
};

struct PdReport {
  std::vector<PdPair> pairs;
  std::vector<BucketSummary> buckets;
  std::vector<ScenarioPd> scenarios;
  double acceptable_ceiling = 40.0;
  double optimal_ceiling = 20.0;
};

PdReport compare_pd(const PdOptions& opts);

/// Smallest bucket lower bound from which every later bucket's mean loss
/// is strictly below `ceiling`; nullopt when the last bucket is not.
std::optional<double> threshold_scan(const std::vector<double>& lower_bounds,
                                     const std::vector<double>& mean_losses, double ceiling);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Human-readable threshold summary (the contents of thresholds.txt).
std::string threshold_report(const PdReport& report);

void write_episodes_csv(const std::filesystem::path& path, const std::vector<EpisodeStats>& rows);
void write_fd_outputs(const FdReport& report, const std::filesystem::path& dir, int histogram_bins = 20);
void write_pd_outputs(const PdReport& report, const std::filesystem::path& dir);

}  // namespace crossflow::harness
