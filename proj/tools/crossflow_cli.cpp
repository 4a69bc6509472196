// crossflow command-line entry point: train, eval, inspect-state, dump-config.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "crossflow/agent/trainer.hpp"
#include "crossflow/config.hpp"
#include "crossflow/dtse.hpp"
#include "crossflow/error.hpp"
#include "crossflow/harness.hpp"

namespace fs = std::filesystem;
using namespace crossflow;

namespace {

/// Flags of one subcommand, each bound to a config key. Values are kept as
/// text and applied after the config file and environment.
class FlagSet {
 public:
  FlagSet(CLI::App* app, const RunConfig& defaults) : app_(app), defaults_(defaults) {}

  void add(const std::string& key, const std::string& flag = "") {
    const auto& keys = config_keys();
    auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.key == key; });
    if (it == keys.end()) throw std::logic_error("no config key " + key);
    std::string name = flag;
    if (name.empty()) {
      name = "--" + key;
      std::replace(name.begin(), name.end(), '_', '-');
    }
    std::string def = get_config_value(defaults_, key);
    const std::string help = it->help + " [" + it->provenance + "; default: " + (def.empty() ? "none" : def) + "]";
    std::string& slot = values_.emplace_back();
    opts_.push_back({key, app_->add_option(name, slot, help), &slot});
  }

  void apply(RunConfig& cfg) const {
    for (const auto& b : opts_) {
      if (b.option->count() > 0) set_config_value(cfg, b.key, *b.value);
    }
  }

 private:
  CLI::App* app_;
  const RunConfig& defaults_;
  struct Binding {
    std::string key;
    CLI::Option* option;
    const std::string* value;
  };
  std::deque<std::string> values_;
  std::vector<Binding> opts_;
};

/// defaults < config file < CROSSFLOW_SEED < flags.
RunConfig resolve(const std::string& config_path, const FlagSet& flags) {
  RunConfig cfg;
  if (!config_path.empty()) load_config_file(cfg, config_path);
  if (const char* env = std::getenv("CROSSFLOW_SEED"); env && *env) set_config_value(cfg, "seed", env);
  flags.apply(cfg);
  validate(cfg);
  return cfg;
}

fs::path require_out(const RunConfig& cfg) {
  if (cfg.out.empty()) throw ConfigError("--out <dir> is required");
  if (!fs::is_directory(cfg.out)) throw ConfigError("output directory does not exist: " + cfg.out);
  return cfg.out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + p.string());
  f << text;
  if (!f) throw Error("failed writing " + p.string());
}

int cmd_train(const RunConfig& cfg) {
  const fs::path out = require_out(cfg);
  write_text(out / "config.txt", dump_config(cfg));
  std::fprintf(stderr, "training scenario %c for %llu decisions (p_cv %s, seed %llu)\n", cfg.train.scenario,
               static_cast<unsigned long long>(cfg.train.steps), cfg.train.pcv.to_string().c_str(),
               static_cast<unsigned long long>(cfg.train.seed));
  const auto result = agent::train(cfg.train, out, [](const agent::EpisodeLog& e) {
    if (e.episode % 10 == 0) {
      std::fprintf(stderr, "episode %llu step %llu loss %.5f reward %.4f eps %.3f emtd %.2f\n",
                   static_cast<unsigned long long>(e.episode), static_cast<unsigned long long>(e.step), e.loss,
                   e.mean_reward, e.epsilon, e.emtd);
    }
  });
  std::printf("checkpoint: %s\nlog: %s\n", result.checkpoint.string().c_str(), result.log.string().c_str());
  return 0;
}

std::map<char, harness::ParamsRef> load_policies(const std::string& spec, const std::string& scenarios,
                                                 const char* what) {
  std::map<char, harness::ParamsRef> out;
  for (const auto& [tag, path] : parse_checkpoint_map(spec, scenarios)) {
    if (scenarios.find(tag) == std::string::npos) continue;
    if (!fs::exists(path)) throw Error(std::string(what) + " checkpoint not found: " + path);
    out[tag] = harness::load_policy(path, tag);
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_eval(const RunConfig& cfg) {
  const fs::path out = require_out(cfg);
  write_text(out / "config.txt", dump_config(cfg));
  const std::vector<char> scenarios(cfg.scenarios.begin(), cfg.scenarios.end());
  if (cfg.mode == "fd") {
    harness::FdOptions o;
    o.scenarios = scenarios;
    o.base_seed = cfg.train.seed;
    o.jobs = cfg.jobs;
    o.green_max = cfg.train.green_max;
    o.sim.horizon = cfg.train.horizon;
    o.episodes = cfg.episodes;
    o.controllers = split_list(cfg.controllers);
    if (std::find(o.controllers.begin(), o.controllers.end(), "dqn") != o.controllers.end()) {
      o.policies = load_policies(cfg.checkpoint, cfg.scenarios, "FD");
      for (char tag : scenarios) {
        if (!o.policies.count(tag)) {
          throw Error(std::string("missing checkpoint for scenario ") + tag + " (pass --checkpoint " + tag +
                      "=<file>, or drop dqn from --controllers)");
        }
      }
    }
    const auto report = harness::compare_fd(o);
    harness::write_fd_outputs(report, out, o.histogram_bins);
    std::printf("scenario,controller,episodes,mean_emtd,std_emtd\n");
    for (const auto& s : report.summary) {
      std::printf("%c,%s,%llu,%.3f,%.3f\n", s.scenario, s.controller.c_str(),
                  static_cast<unsigned long long>(s.episodes), s.mean_emtd, s.std_emtd);
    }
    return 0;
  }
  harness::PdOptions o;
  o.scenarios = scenarios;
  o.base_seed = cfg.train.seed;
  o.jobs = cfg.jobs;
  o.green_max = cfg.train.green_max;
  o.sim.horizon = cfg.train.horizon;
  o.episodes_per_bucket = cfg.pd_episodes_per_bucket;
  o.full_detection_pairs = cfg.full_detection_pairs;
  o.acceptable_ceiling = cfg.acceptable_ceiling;
  o.optimal_ceiling = cfg.optimal_ceiling;
  o.pd_policies = load_policies(cfg.checkpoint, cfg.scenarios, "PD");
  for (char tag : scenarios) {
    if (!o.pd_policies.count(tag)) {
      throw Error(std::string("missing PD checkpoint for scenario ") + tag + " (pass --checkpoint " + tag + "=<file>)");
    }
  }
  o.fd_policies = load_policies(cfg.fd_checkpoint, cfg.scenarios, "FD");
  const auto report = harness::compare_pd(o);
  harness::write_pd_outputs(report, out);
  std::fputs(harness::threshold_report(report).c_str(), stdout);
  return 0;
}

int cmd_inspect(const RunConfig& cfg) {
  auto x = sim::build_scenario(cfg.train.scenario);
  x.program.green_max = cfg.train.green_max;
  const std::uint64_t seed = harness::episode_seed(cfg.train.seed, x.tag, 0);
  auto demand = harness::episode_demand(x, seed);
  if (cfg.train.pcv.kind == agent::PcvMode::Kind::Fixed) demand.p_cv = cfg.train.pcv.value;
  sim::SimParams params;
  params.horizon = cfg.train.horizon;
  sim::Simulation s(x, demand, params);

  harness::ParamsRef policy;
  if (cfg.controller == "dqn") {
    const auto map = parse_checkpoint_map(cfg.checkpoint, std::string(1, x.tag));
    auto it = map.find(x.tag);
    if (it == map.end()) throw Error("inspect-state with controller dqn needs --checkpoint");
    policy = harness::load_policy(it->second, x.tag);
  }
  auto ctrl = harness::make_controller(cfg.controller, policy);
  ctrl->reset(seed);
  while (s.time() + 1e-9 < cfg.inspect_time && !s.done()) {
    ctrl->control(s);
    s.step();
  }
  const auto state = dtse::encode(s.observe().cv_view(), x);
  const auto& timer = s.timer();
  std::string text;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "scenario %c  t=%.0f s  p_cv=%.3f  controller=%s\n"
                "phase %d (%s)  stage %s  stage_elapsed %.0f s  green_elapsed %.0f s  previous %d\n"
                "state shape (%d, %d, %d)  in network %llu  queued %d\n",
                x.tag, s.time(), demand.p_cv, cfg.controller.c_str(), timer.phase(),
                x.program.phases[timer.phase()].name.c_str(), sim::stage_name(timer.stage()),
                timer.stage_elapsed(), timer.green_elapsed(), timer.previous_phase(), state.shape().channels,
                state.shape().lanes, state.shape().cells, static_cast<unsigned long long>(s.in_network()),
                s.queued_vehicles());
  text += buf;
  text += dtse::render(state);
  std::fputs(text.c_str(), stdout);
  if (!cfg.out.empty()) write_text(require_out(cfg) / "inspect.txt", text);
  return 0;
}

int cmd_dump(const RunConfig& cfg) {
  const std::string text = dump_config(cfg);
  std::fputs(text.c_str(), stdout);
  if (!cfg.out.empty()) write_text(require_out(cfg) / "config.txt", text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const RunConfig defaults;
  CLI::App app{"crossflow: single-intersection signal control with a dueling double DQN on connected-vehicle data"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "flat key = value config file (flags override it)");
  app.footer(
      "Precedence: flags > CROSSFLOW_SEED > --config file > built-in defaults.\n"
      "Provenance tags: [published] = published tuned value, [design] = chosen for this implementation.");

  auto* train = app.add_subcommand("train", "train a DQN policy");
  auto* eval = app.add_subcommand("eval", "compare controllers (fd) or PD vs FD loss (pd)");
  auto* inspect = app.add_subcommand("inspect-state", "print the partial DTSE and signal state at time t");
  auto* dump = app.add_subcommand("dump-config", "print the resolved configuration");
  for (auto* sub : {train, eval, inspect, dump}) sub->add_option("--config", config_path, "config file");

  FlagSet train_flags(train, defaults);
  for (const char* k : {"scenario", "seed", "steps", "gamma", "learning_rate", "adam_beta1", "adam_beta2",
                        "adam_epsilon", "epsilon_min", "epsilon_decay", "tau", "batch_size", "buffer_capacity",
                        "warmup", "head_scale", "pcv", "green_max", "horizon", "checkpoint_every", "out"}) {
    train_flags.add(k);
  }
  FlagSet eval_flags(eval, defaults);
  for (const char* k : {"mode", "episodes", "scenarios", "controllers", "checkpoint", "fd_checkpoint",
                        "pd_episodes_per_bucket", "full_detection_pairs", "acceptable_ceiling", "optimal_ceiling",
                        "jobs", "seed", "green_max", "horizon", "out"}) {
    eval_flags.add(k);
  }
  eval_flags.add("controllers", "--controller");
  FlagSet inspect_flags(inspect, defaults);
  for (const char* k : {"scenario", "seed", "controller", "checkpoint", "pcv", "green_max", "out"}) {
    inspect_flags.add(k);
  }
  inspect_flags.add("inspect_time", "-t,--time");
  FlagSet dump_flags(dump, defaults);
  for (const auto& k : config_keys()) dump_flags.add(k.key);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (train->parsed()) return cmd_train(resolve(config_path, train_flags));
    if (eval->parsed()) return cmd_eval(resolve(config_path, eval_flags));
    if (inspect->parsed()) return cmd_inspect(resolve(config_path, inspect_flags));
    if (dump->parsed()) return cmd_dump(resolve(config_path, dump_flags));
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
