#include "crossflow/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "crossflow/agent/dqn.hpp"
#include "crossflow/error.hpp"
#include "crossflow/nn/checkpoint.hpp"
#include "crossflow/rng.hpp"

namespace crossflow::harness {

namespace fs = std::filesystem;

EpisodeStats run_episode(const sim::Intersection& x, control::Controller& controller,
                         const sim::DemandConfig& demand, std::uint64_t seed,
                         const sim::SimParams& params) {
  sim::Simulation s(x, demand, params);
  controller.reset(seed);
  double delay = 0.0, queue = 0.0;
  std::uint64_t steps = 0;
  while (!s.done()) {
    controller.control(s);
    s.step();
    delay += s.total_delay();
    queue += s.queued_vehicles();
    ++steps;
  }
  EpisodeStats st;
  st.scenario = x.tag;
  st.controller = controller.name();
  st.seed = seed;
  st.p_cv = demand.p_cv;
  st.emtd = steps ? delay / static_cast<double>(steps) : 0.0;
  st.throughput = s.exited_total();
  st.inserted = s.inserted_total();
  st.mean_queue = steps ? queue / static_cast<double>(steps) : 0.0;
  st.steps = steps;
  return st;
}

std::uint64_t episode_seed(std::uint64_t base_seed, char scenario, std::uint64_t i) {
  return RngStream(base_seed).split(std::string("eval-") + scenario).split(i).seed();
}

sim::DemandConfig episode_demand(const sim::Intersection& x, std::uint64_t seed) {
  RngStream rng = RngStream(seed).split("demand");
  return sim::sample_demand(x, rng);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs) : std::thread::hardware_concurrency();
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; !failed && (i = next++) < n;) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
            failed = true;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

ParamsRef load_policy(const fs::path& path, char scenario) {
  auto ck = nn::read_checkpoint_file(path, scenario);
  return std::make_shared<const nn::NetworkParams>(std::move(ck.params));
}

std::unique_ptr<control::Controller> make_controller(const std::string& name, const ParamsRef& params) {
  if (name == "dqn") {
    if (!params) throw Error("controller 'dqn' needs a checkpoint");
    return std::make_unique<agent::DqnController>(params);
  }
  return control::make_baseline(name);
}

namespace {

sim::Intersection eval_scenario(char tag, const EvalOptions& opts) {
  auto x = sim::build_scenario(tag);
  x.program.green_max = opts.green_max;
  return x;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

ParamsRef policy_for(const std::map<char, ParamsRef>& m, char scenario, const char* what) {
  auto it = m.find(scenario);
  if (it == m.end() || !it->second) {
    throw Error(std::string("missing ") + what + " checkpoint for scenario " + scenario);
  }
  return it->second;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

std::FILE* open_out(const fs::path& p) {
  std::FILE* f = std::fopen(p.string().c_str(), "wb");
  if (!f) throw Error("cannot write " + p.string());
  return f;
}

void close_out(std::FILE* f, const fs::path& p) {
  const bool ok = std::fflush(f) == 0;
  std::fclose(f);
  if (!ok) throw Error("failed writing " + p.string());
}

std::string fmt_threshold(const std::optional<double>& t) {
  if (!t) return "not reached";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *t);
  return buf;
}

}  // namespace

ControllerSummary summarize(const std::vector<EpisodeStats>& episodes) {
  if (episodes.empty()) throw Error("nothing to summarize");
  ControllerSummary s;
  s.scenario = episodes.front().scenario;
  s.controller = episodes.front().controller;
  s.episodes = episodes.size();
  std::vector<double> v;
  std::uint64_t digest = 0xcbf29ce484222325ull;
  for (const auto& e : episodes) {
    v.push_back(e.emtd);
    digest = mix64(digest ^ e.seed);
  }
  s.mean_emtd = mean_of(v);
  s.std_emtd = sample_std(v);
  s.min_emtd = *std::min_element(v.begin(), v.end());
  s.max_emtd = *std::max_element(v.begin(), v.end());
  s.seed_digest = digest;
  return s;
}

FdReport compare_fd(const FdOptions& opts) {
  if (opts.episodes == 0) throw Error("need at least one episode");
  if (opts.controllers.empty()) throw Error("need at least one controller");
  for (const auto& c : opts.controllers) {
    if (c != "dqn" && !control::is_baseline(c)) throw Error("unknown controller '" + c + "'");
  }
  struct Task {
    char scenario;
    std::size_t controller;
    std::uint64_t episode;
  };
  std::vector<Task> tasks;
  std::map<char, sim::Intersection> scenarios;
  std::map<char, ParamsRef> policies;
  for (char tag : opts.scenarios) {
    scenarios.emplace(tag, eval_scenario(tag, opts));
    for (std::size_t c = 0; c < opts.controllers.size(); ++c) {
      if (opts.controllers[c] == "dqn") policies[tag] = policy_for(opts.policies, tag, "FD");
      for (std::uint64_t e = 0; e < opts.episodes; ++e) tasks.push_back({tag, c, e});
    }
  }

  FdReport report;
  report.episodes.resize(tasks.size());
  parallel_for(tasks.size(), opts.jobs, [&](std::size_t i) {
    const Task& t = tasks[i];
    const auto& x = scenarios.at(t.scenario);
    const std::uint64_t seed = episode_seed(opts.base_seed, t.scenario, t.episode);
    auto demand = episode_demand(x, seed);
    demand.p_cv = 1.0;
    const auto& name = opts.controllers[t.controller];
    auto ctrl = make_controller(name, name == "dqn" ? policies.at(t.scenario) : nullptr);
    auto st = run_episode(x, *ctrl, demand, seed, opts.sim);
    st.episode = t.episode;
    report.episodes[i] = st;
  });

  for (std::size_t start = 0; start < report.episodes.size(); start += opts.episodes) {
    std::vector<EpisodeStats> group(report.episodes.begin() + start,
                                    report.episodes.begin() + start + opts.episodes);
    report.summary.push_back(summarize(group));
  }
  return report;
}

double loss_percent(double emtd_pd, double emtd_fd) {
  if (emtd_fd == 0.0) return 0.0;
  return 100.0 * (emtd_pd - emtd_fd) / emtd_fd;
}

std::optional<double> threshold_scan(const std::vector<double>& lower_bounds,
                                     const std::vector<double>& mean_losses, double ceiling) {
  if (lower_bounds.size() != mean_losses.size()) throw Error("threshold scan size mismatch");
  std::optional<double> found;
  for (std::size_t i = mean_losses.size(); i-- > 0;) {
    if (!(mean_losses[i] < ceiling)) break;
    found = lower_bounds[i];
  }
  return found;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("spearman needs two equal-length series");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double mx = mean_of(rx), my = mean_of(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

PdReport compare_pd(const PdOptions& opts) {
  if (opts.buckets < 1) throw Error("need at least one bucket");
  if (opts.episodes_per_bucket == 0) throw Error("need at least one episode per bucket");
  struct Task {
    char scenario;
    int bucket;
    std::uint64_t episode;
  };
  std::vector<Task> tasks;
  std::map<char, sim::Intersection> scenarios;
  std::map<char, ParamsRef> pd, fd;
  for (char tag : opts.scenarios) {
    scenarios.emplace(tag, eval_scenario(tag, opts));
    pd[tag] = policy_for(opts.pd_policies, tag, "PD");
    fd[tag] = opts.fd_policies.count(tag) ? policy_for(opts.fd_policies, tag, "FD") : pd[tag];
    for (int b = 0; b < opts.buckets; ++b) {
      for (std::uint64_t e = 0; e < opts.episodes_per_bucket; ++e) tasks.push_back({tag, b, e});
    }
    for (std::uint64_t e = 0; e < opts.full_detection_pairs; ++e) tasks.push_back({tag, -1, e});
  }

  PdReport report;
  report.acceptable_ceiling = opts.acceptable_ceiling;
  report.optimal_ceiling = opts.optimal_ceiling;
  report.pairs.resize(tasks.size());
  const double width = 1.0 / opts.buckets;
  parallel_for(tasks.size(), opts.jobs, [&](std::size_t i) {
    const Task& t = tasks[i];
    const auto& x = scenarios.at(t.scenario);
    // Bucketed pairs and the p_cv = 1 pairs draw from disjoint seed lists.
    const std::uint64_t index = t.bucket < 0 ? (1ull << 40) + t.episode
                                             : static_cast<std::uint64_t>(t.bucket) * (1ull << 20) + t.episode;
    const std::uint64_t seed = episode_seed(opts.base_seed, t.scenario, (1ull << 48) + index);
    auto demand = episode_demand(x, seed);
    double p = 1.0;
    if (t.bucket >= 0) {
      RngStream prng = RngStream(seed).split("pcv");
      p = (t.bucket + prng.uniform()) * width;
    }
    PdPair pair;
    pair.scenario = t.scenario;
    pair.bucket = t.bucket;
    pair.episode = t.episode;
    pair.seed = seed;
    pair.p_cv = p;

    agent::DqnController pd_ctrl(pd.at(t.scenario));
    demand.p_cv = p;
    pair.emtd_pd = run_episode(x, pd_ctrl, demand, seed, opts.sim).emtd;
    agent::DqnController fd_ctrl(fd.at(t.scenario));
    demand.p_cv = 1.0;
    pair.emtd_fd = run_episode(x, fd_ctrl, demand, seed, opts.sim).emtd;
    pair.loss_pct = loss_percent(pair.emtd_pd, pair.emtd_fd);
    report.pairs[i] = pair;
  });

  for (char tag : opts.scenarios) {
    std::vector<double> lows, means;
    ScenarioPd sp;
    sp.scenario = tag;
    for (int b = 0; b < opts.buckets; ++b) {
      std::vector<double> loss, epd, efd;
      for (const auto& p : report.pairs) {
        if (p.scenario == tag && p.bucket == b) {
          loss.push_back(p.loss_pct);
          epd.push_back(p.emtd_pd);
          efd.push_back(p.emtd_fd);
        }
      }
      BucketSummary bs;
      bs.scenario = tag;
      bs.bucket = b;
      bs.lo = b * width;
      bs.hi = (b + 1) * width;
      bs.pairs = loss.size();
      bs.mean_loss = mean_of(loss);
      bs.std_loss = sample_std(loss);
      bs.mean_emtd_pd = mean_of(epd);
      bs.mean_emtd_fd = mean_of(efd);
      report.buckets.push_back(bs);
      lows.push_back(bs.lo);
      means.push_back(bs.mean_loss);
    }
    sp.thresholds.acceptable = threshold_scan(lows, means, opts.acceptable_ceiling);
    sp.thresholds.optimal = threshold_scan(lows, means, opts.optimal_ceiling);
    sp.spearman = lows.size() >= 2 ? spearman(lows, means) : 0.0;
    for (const auto& p : report.pairs) {
      if (p.scenario == tag && p.bucket < 0) sp.full_detection_loss = std::max(sp.full_detection_loss, std::abs(p.loss_pct));
    }
    report.scenarios.push_back(sp);
  }
  return report;
}

std::string threshold_report(const PdReport& report) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "ceilings: acceptable < %.1f%% loss, optimal < %.1f%% loss\n",
                report.acceptable_ceiling, report.optimal_ceiling);
  os << buf;
  for (const auto& sp : report.scenarios) {
    os << "scenario " << sp.scenario << ": acceptability from p_cv >= " << fmt_threshold(sp.thresholds.acceptable)
       << ", optimality from p_cv >= " << fmt_threshold(sp.thresholds.optimal);
    std::snprintf(buf, sizeof buf, ", spearman(bucket, loss) = %.3f, loss at p_cv = 1: %.3g%%\n", sp.spearman,
                  sp.full_detection_loss);
    os << buf;
  }
  return os.str();
}

void write_episodes_csv(const fs::path& path, const std::vector<EpisodeStats>& rows) {
  std::FILE* f = open_out(path);
  std::fprintf(f, "scenario,controller,episode,seed,p_cv,emtd,throughput,inserted,mean_queue,steps\n");
  for (const auto& e : rows) {
    std::fprintf(f, "%c,%s,%llu,%llu,%.17g,%.17g,%llu,%llu,%.17g,%llu\n", e.scenario, e.controller.c_str(),
                 static_cast<unsigned long long>(e.episode), static_cast<unsigned long long>(e.seed), e.p_cv,
                 e.emtd, static_cast<unsigned long long>(e.throughput),
                 static_cast<unsigned long long>(e.inserted), e.mean_queue,
                 static_cast<unsigned long long>(e.steps));
  }
  close_out(f, path);
}

void write_fd_outputs(const FdReport& report, const fs::path& dir, int histogram_bins) {
  if (histogram_bins < 1) throw Error("histogram needs at least one bin");
  write_episodes_csv(dir / "episodes.csv", report.episodes);

  const fs::path sp = dir / "fd_summary.csv";
  std::FILE* f = open_out(sp);
  std::fprintf(f, "scenario,controller,episodes,mean_emtd,std_emtd,min_emtd,max_emtd,seed_digest\n");
  for (const auto& s : report.summary) {
    std::fprintf(f, "%c,%s,%llu,%.17g,%.17g,%.17g,%.17g,%016llx\n", s.scenario, s.controller.c_str(),
                 static_cast<unsigned long long>(s.episodes), s.mean_emtd, s.std_emtd, s.min_emtd, s.max_emtd,
                 static_cast<unsigned long long>(s.seed_digest));
  }
  close_out(f, sp);

  // One set of equal-width bins per scenario, shared by its controllers.
  const fs::path hp = dir / "fd_histogram.csv";
  f = open_out(hp);
  std::fprintf(f, "scenario,controller,bin_lo,bin_hi,count\n");
  std::map<char, std::pair<double, double>> range;
  for (const auto& s : report.summary) {
    auto [it, fresh] = range.try_emplace(s.scenario, s.min_emtd, s.max_emtd);
    if (!fresh) {
      it->second.first = std::min(it->second.first, s.min_emtd);
      it->second.second = std::max(it->second.second, s.max_emtd);
    }
  }
  for (const auto& s : report.summary) {
    const auto [lo, hi0] = range.at(s.scenario);
    const double hi = hi0 > lo ? hi0 : lo + 1.0;
    const double w = (hi - lo) / histogram_bins;
    std::vector<std::uint64_t> counts(histogram_bins, 0);
    for (const auto& e : report.episodes) {
      if (e.scenario != s.scenario || e.controller != s.controller) continue;
      int b = static_cast<int>((e.emtd - lo) / w);
      counts[std::clamp(b, 0, histogram_bins - 1)]++;
    }
    for (int b = 0; b < histogram_bins; ++b) {
      std::fprintf(f, "%c,%s,%.17g,%.17g,%llu\n", s.scenario, s.controller.c_str(), lo + b * w, lo + (b + 1) * w,
                   static_cast<unsigned long long>(counts[b]));
    }
  }
  close_out(f, hp);
}

void write_pd_outputs(const PdReport& report, const fs::path& dir) {
  const fs::path pp = dir / "pd_pairs.csv";
  std::FILE* f = open_out(pp);
  std::fprintf(f, "scenario,bucket,episode,seed,p_cv,emtd_pd,emtd_fd,loss_pct\n");
  for (const auto& p : report.pairs) {
    std::fprintf(f, "%c,%d,%llu,%llu,%.17g,%.17g,%.17g,%.17g\n", p.scenario, p.bucket,
                 static_cast<unsigned long long>(p.episode), static_cast<unsigned long long>(p.seed), p.p_cv,
                 p.emtd_pd, p.emtd_fd, p.loss_pct);
  }
  close_out(f, pp);

  const fs::path bp = dir / "pd_loss_by_bucket.csv";
  f = open_out(bp);
  std::fprintf(f, "scenario,bucket,lo,hi,pairs,mean_loss_pct,std_loss_pct,mean_emtd_pd,mean_emtd_fd\n");
  for (const auto& b : report.buckets) {
    std::fprintf(f, "%c,%d,%.1f,%.1f,%llu,%.17g,%.17g,%.17g,%.17g\n", b.scenario, b.bucket, b.lo, b.hi,
                 static_cast<unsigned long long>(b.pairs), b.mean_loss, b.std_loss, b.mean_emtd_pd,
                 b.mean_emtd_fd);
  }
  close_out(f, bp);

  const fs::path tp = dir / "thresholds.txt";
  f = open_out(tp);
  const auto text = threshold_report(report);
  std::fputs(text.c_str(), f);
  close_out(f, tp);
}

}  // namespace crossflow::harness
