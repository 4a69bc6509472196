#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "crossflow/agent/trainer.hpp"

namespace crossflow {

/// Everything a CLI run needs. Defaults are the published tuned values
/// where one exists.
struct RunConfig {
  agent::TrainConfig train{};
  std::string controller = "maxpressure";  // inspect-state
  std::string out;
  std::uint64_t episodes = 50;
  std::string mode = "fd";             // eval: fd | pd
  std::string scenarios = "abc";       // eval: scenario tags
  std::string controllers = "dqn,maxpressure,sotl";  // eval --mode fd
  std::string checkpoint;              // "a=path,b=path" or a single path
  std::string fd_checkpoint;           // PD reference, same syntax
  std::uint64_t pd_episodes_per_bucket = 30;
  std::uint64_t full_detection_pairs = 5;
  double acceptable_ceiling = 40.0;
  double optimal_ceiling = 20.0;
  int jobs = 0;
  double inspect_time = 0.0;

  bool operator==(const RunConfig&) const;
};

/// One documented key of the flat config format.
struct ConfigKey {
  std::string key;
  std::string help;
  std::string provenance;  // "published" or "design"
};
const std::vector<ConfigKey>& config_keys();

/// Sets one key from its text value; throws ConfigError on unknown keys or
/// unparsable values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

/// Flat "key = value" text, '#' starts a comment.
void apply_config_text(RunConfig& cfg, const std::string& text);
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);
/// Every key, one per line, in config_keys() order; loads back to an equal config.
std::string dump_config(const RunConfig& cfg);

void validate(const RunConfig& cfg);

/// Parses "a=path,b=path" (or a bare path applied to `fallback` scenarios).
std::map<char, std::string> parse_checkpoint_map(const std::string& spec, const std::string& fallback);

}  // namespace crossflow
