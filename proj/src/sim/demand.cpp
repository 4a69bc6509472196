#include "crossflow/sim/demand.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crossflow/error.hpp"

namespace crossflow::sim {

double DemandConfig::mean_headway(int approach) const {
  const double q = flows.at(approach);
  if (q <= 0.0) return std::numeric_limits<double>::infinity();
  return 3600.0 / q;
}

void DemandConfig::validate(const Intersection& x) const {
  for (double q : flows) {
    if (!(q >= 0.0) || q > 3600.0) throw Error("flow out of range");
  }
  if (!(p_cv >= 0.0 && p_cv <= 1.0)) throw Error("p_cv must lie in [0, 1]");
  if (turn_weights.size() != x.connections.size()) throw Error("turn weight count mismatch");
  std::array<double, kApproaches> sums{};
  for (const auto& c : x.connections) {
    const double w = turn_weights[c.id];
    if (!(w > 0.0)) throw Error("turn weights must be positive");
    sums[x.lanes[c.from_lane].approach] += w;
  }
  for (double s : sums) {
    if (std::abs(s - 1.0) > 1e-9) throw Error("turn weights must sum to 1 per approach");
  }
}

namespace {

void normalize_per_approach(const Intersection& x, std::vector<double>& w) {
  std::array<double, kApproaches> sums{};
  for (const auto& c : x.connections) sums[x.lanes[c.from_lane].approach] += w[c.id];
  for (const auto& c : x.connections) w[c.id] /= sums[x.lanes[c.from_lane].approach];
}

}  // namespace

DemandConfig sample_demand(const Intersection& x, RngStream& rng) {
  DemandConfig cfg;
  cfg.p_cv = rng.uniform();
  for (auto& q : cfg.flows) q = rng.uniform(kMinFlow, kMaxFlow);
  cfg.turn_weights.resize(x.connections.size());
  for (auto& w : cfg.turn_weights) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    w = u;
  }
  normalize_per_approach(x, cfg.turn_weights);
  cfg.seed = rng.next_u64();
  return cfg;
}

std::vector<double> uniform_turn_weights(const Intersection& x) {
  std::vector<double> w(x.connections.size(), 1.0);
  normalize_per_approach(x, w);
  return w;
}

std::vector<Arrival> generate_arrivals(const Intersection& x, const DemandConfig& cfg,
                                       double horizon) {
  cfg.validate(x);
  const RngStream base(cfg.seed);
  std::vector<Arrival> out;
  for (int e = 0; e < kApproaches; ++e) {
    const double mean = cfg.mean_headway(e);
    if (!std::isfinite(mean)) continue;
    RngStream headway = base.split("headway").split(e);
    RngStream route = base.split("route").split(e);
    RngStream cv = base.split("cv").split(e);

    std::vector<const Connection*> conns;
    for (const auto& c : x.connections) {
      if (x.lanes[c.from_lane].approach == e) conns.push_back(&c);
    }
    double t = headway.exponential(mean);
    while (t < horizon) {
      Arrival a;
      a.time = t;
      a.approach = e;
      double u = route.uniform();
      const Connection* pick = conns.back();
      for (const Connection* c : conns) {
        u -= cfg.turn_weights[c->id];
        if (u < 0.0) {
          pick = c;
          break;
        }
      }
      a.movement = pick->movement;
      a.is_cv = cv.uniform() < cfg.p_cv;
      out.push_back(a);
      t += headway.exponential(mean);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Arrival& l, const Arrival& r) {
    if (l.time != r.time) return l.time < r.time;
    return l.approach < r.approach;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].vehicle_id = static_cast<std::uint32_t>(i);
  return out;
}

}  // namespace crossflow::sim
