#include "crossflow/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "crossflow/controllers.hpp"
#include "crossflow/error.hpp"

namespace crossflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

// Shortest text that parses back to the same double, in plain decimal
// notation unless that gets long.
std::string fmt_double(double v) {
  char buf[400];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  if (res.ec == std::errc() && res.ptr - buf <= 12) return std::string(buf, res.ptr);
  res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

char parse_scenario(const std::string& key, const std::string& v) {
  if (v.size() != 1 || (v[0] != 'a' && v[0] != 'b' && v[0] != 'c')) {
    throw ConfigError("'" + key + "' expects a, b or c, got '" + v + "'");
  }
  return v[0];
}

struct Field {
  ConfigKey doc;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define U64_FIELD(name, member, help, prov)                                                     \
  Field {                                                                                      \
    {name, help, prov}, [](RunConfig& c, const std::string& v) { c.member = parse_u64(name, v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                            \
  }
#define DOUBLE_FIELD(name, member, help, prov)                                                       \
  Field {                                                                                           \
    {name, help, prov}, [](RunConfig& c, const std::string& v) { c.member = parse_double(name, v); }, \
        [](const RunConfig& c) { return fmt_double(c.member); }                                     \
  }
#define STRING_FIELD(name, member, help, prov)                                                 \
  Field {                                                                                     \
    {name, help, prov}, [](RunConfig& c, const std::string& v) { c.member = v; },              \
        [](const RunConfig& c) { return c.member; }                                           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{{"scenario", "scenario tag a, b or c", "published"},
            [](RunConfig& c, const std::string& v) { c.train.scenario = parse_scenario("scenario", v); },
            [](const RunConfig& c) { return std::string(1, c.train.scenario); }},
      U64_FIELD("seed", train.seed, "base seed (CROSSFLOW_SEED overrides)", "design"),
      U64_FIELD("steps", train.steps, "training length in agent decisions", "published"),
      DOUBLE_FIELD("gamma", train.gamma, "discount factor", "published"),
      DOUBLE_FIELD("learning_rate", train.learning_rate, "Adam learning rate", "published"),
      DOUBLE_FIELD("adam_beta1", train.adam_beta1, "Adam first-moment decay", "design"),
      DOUBLE_FIELD("adam_beta2", train.adam_beta2, "Adam second-moment decay", "design"),
      DOUBLE_FIELD("adam_epsilon", train.adam_epsilon, "Adam denominator epsilon", "design"),
      DOUBLE_FIELD("epsilon_min", train.epsilon_min, "exploration floor", "published"),
      DOUBLE_FIELD("epsilon_decay", train.epsilon_decay, "decisions until epsilon reaches its floor", "published"),
      DOUBLE_FIELD("tau", train.tau, "Polyak rate of the target network", "published"),
      Field{{"batch_size", "replay batch size", "design"},
            [](RunConfig& c, const std::string& v) { c.train.batch_size = parse_int("batch_size", v); },
            [](const RunConfig& c) { return std::to_string(c.train.batch_size); }},
      U64_FIELD("buffer_capacity", train.buffer_capacity, "replay memory capacity", "published"),
      U64_FIELD("warmup", train.warmup, "random transitions before learning starts", "published"),
      DOUBLE_FIELD("head_scale", train.head_scale, "init scale of the value/advantage heads", "design"),
      Field{{"pcv", "p_cv per training episode: uniform or fixed:<p>", "published"},
            [](RunConfig& c, const std::string& v) { c.train.pcv = agent::PcvMode::parse(v); },
            [](const RunConfig& c) { return c.train.pcv.to_string(); }},
      Field{{"green_max", "maximum green in seconds, empty for none", "published"},
            [](RunConfig& c, const std::string& v) {
              if (v.empty() || v == "none") {
                c.train.green_max.reset();
              } else {
                c.train.green_max = parse_double("green_max", v);
              }
            },
            [](const RunConfig& c) { return c.train.green_max ? fmt_double(*c.train.green_max) : std::string(); }},
      DOUBLE_FIELD("horizon", train.horizon, "episode length in seconds", "published"),
      U64_FIELD("checkpoint_every", train.checkpoint_every, "intermediate checkpoint period, 0 = off", "design"),
      STRING_FIELD("controller", controller, "controller for inspect-state", "design"),
      STRING_FIELD("out", out, "output directory", "design"),
      U64_FIELD("episodes", episodes, "evaluation episodes per scenario and controller", "design"),
      STRING_FIELD("mode", mode, "evaluation mode fd or pd", "published"),
      STRING_FIELD("scenarios", scenarios, "scenario tags to evaluate, e.g. abc", "published"),
      STRING_FIELD("controllers", controllers, "comma list for fd evaluation", "published"),
      STRING_FIELD("checkpoint", checkpoint, "DQN checkpoints: a=path,b=path or one path", "design"),
      STRING_FIELD("fd_checkpoint", fd_checkpoint, "FD reference checkpoints for pd mode", "design"),
      U64_FIELD("pd_episodes_per_bucket", pd_episodes_per_bucket, "episode pairs per p_cv bucket", "design"),
      U64_FIELD("full_detection_pairs", full_detection_pairs, "extra pairs at p_cv = 1 in pd mode", "design"),
      DOUBLE_FIELD("acceptable_ceiling", acceptable_ceiling, "loss % below which PD is acceptable", "design"),
      DOUBLE_FIELD("optimal_ceiling", optimal_ceiling, "loss % below which PD is near-optimal", "design"),
      Field{{"jobs", "parallel evaluation episodes, 0 = all cores", "design"},
            [](RunConfig& c, const std::string& v) { c.jobs = parse_int("jobs", v); },
            [](const RunConfig& c) { return std::to_string(c.jobs); }},
      DOUBLE_FIELD("inspect_time", inspect_time, "simulated second shown by inspect-state", "design"),
  };
  return table;
}

#undef U64_FIELD
#undef DOUBLE_FIELD
#undef STRING_FIELD

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.doc.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

bool RunConfig::operator==(const RunConfig& o) const { return dump_config(*this) == dump_config(o); }

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& f : fields()) k.push_back(f.doc);
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, trim(value));
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) { return field(key).get(cfg); }

void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    set_config_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  apply_config_text(cfg, ss.str());
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.doc.key + " = " + f.get(cfg) + "\n";
  return out;
}

void validate(const RunConfig& cfg) {
  cfg.train.validate();
  if (cfg.mode != "fd" && cfg.mode != "pd") throw ConfigError("mode must be fd or pd");
  if (cfg.scenarios.empty()) throw ConfigError("scenarios must not be empty");
  for (char c : cfg.scenarios) parse_scenario("scenarios", std::string(1, c));
  if (cfg.controller != "dqn" && !control::is_baseline(cfg.controller)) {
    throw ConfigError("unknown controller '" + cfg.controller + "'");
  }
  if (cfg.episodes == 0) throw ConfigError("episodes must be positive");
  if (cfg.pd_episodes_per_bucket == 0) throw ConfigError("pd_episodes_per_bucket must be positive");
  if (cfg.jobs < 0) throw ConfigError("jobs must be >= 0");
  if (cfg.inspect_time < 0.0 || cfg.inspect_time > cfg.train.horizon) {
    throw ConfigError("inspect_time must lie within the episode");
  }
}

std::map<char, std::string> parse_checkpoint_map(const std::string& spec, const std::string& fallback) {
  std::map<char, std::string> out;
  if (spec.empty()) return out;
  std::stringstream ss(spec);
  std::string item;
  bool keyed = false, bare = false;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    if (item.size() > 2 && item[1] == '=') {
      out[parse_scenario("checkpoint", item.substr(0, 1))] = item.substr(2);
      keyed = true;
    } else {
      for (char c : fallback) out[c] = item;
      bare = true;
    }
  }
  if (keyed && bare) throw ConfigError("mix of keyed and bare checkpoint paths in '" + spec + "'");
  return out;
}

}  // namespace crossflow
