#include "crossflow/sim/simulation.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>

#include "crossflow/error.hpp"

namespace crossflow::sim {

const char* event_name(EventKind k) {
  switch (k) {
    case EventKind::Insert: return "insert";
    case EventKind::Cross: return "cross";
    case EventKind::Exit: return "exit";
    case EventKind::Stage: return "stage";
    case EventKind::State: return "state";
  }
  return "?";
}

CvObservation Observation::cv_view() const {
  CvObservation out;
  out.time_ = time;
  out.lane_green_ = lane_green;
  for (const auto& v : vehicles) {
    if (v.is_cv) out.vehicles_.push_back(v);
  }
  return out;
}

CvObservation CvObservation::from_parts(double time, std::vector<VehicleView> cvs,
                                        std::vector<std::uint8_t> lane_green) {
  for (const auto& v : cvs) {
    if (!v.is_cv) throw Error("CV observation given a non-connected vehicle");
  }
  CvObservation out;
  out.time_ = time;
  out.vehicles_ = std::move(cvs);
  out.lane_green_ = std::move(lane_green);
  return out;
}

Simulation::Simulation(Intersection intersection, DemandConfig demand, SimParams params)
    : x_(std::move(intersection)),
      demand_(std::move(demand)),
      params_(params),
      timer_(x_.program) {
  x_.validate();
  if (params_.dt <= 0.0) throw Error("dt must be positive");
  params_.car_following.v_max = x_.speed_limit;
  arrivals_ = generate_arrivals(x_, demand_, params_.horizon);
  lanes_.resize(x_.lanes.size());
  lanes_by_movement_.resize(kApproaches * 3);
  for (int l = 0; l < x_.incoming_count(); ++l) {
    for (int c : x_.lanes[l].connections) {
      auto& bucket = lanes_by_movement_[x_.lanes[l].approach * 3 +
                                        static_cast<int>(x_.connections[c].movement)];
      if (std::find(bucket.begin(), bucket.end(), l) == bucket.end()) bucket.push_back(l);
    }
  }
  for (int p = 0; p < x_.program.size(); ++p) {
    const auto mask = x_.phase_connection_mask(p);
    phase_connections_.emplace_back(mask.begin(), mask.end());
  }
}

void Simulation::apply_action(int phase) {
  timer_.apply_action(phase);
  if (timer_.stage() != Stage::Green) log(EventKind::Stage, nullptr);
}

void Simulation::switch_to(int phase) {
  const int before = timer_.phase();
  timer_.switch_to(phase);
  if (timer_.phase() != before) log(EventKind::Stage, nullptr);
}

void Simulation::advance_cycle() { switch_to((timer_.phase() + 1) % timer_.phase_count()); }

SignalState Simulation::connection_state(int connection) const {
  auto in_phase = [&](int p) { return phase_connections_[p][connection] != 0; };
  switch (timer_.stage()) {
    case Stage::Green: return in_phase(timer_.phase()) ? SignalState::Green : SignalState::Red;
    case Stage::Change:
      return in_phase(timer_.previous_phase()) ? SignalState::Yellow : SignalState::Red;
    case Stage::Clearance: return SignalState::Red;
  }
  return SignalState::Red;
}

std::vector<std::uint8_t> Simulation::lane_green() const {
  std::vector<std::uint8_t> out(x_.incoming_count(), 0);
  if (timer_.stage() != Stage::Green) return out;
  for (int c : x_.program.phases[timer_.phase()].connections) out[x_.connections[c].from_lane] = 1;
  return out;
}

std::size_t Simulation::pending() const {
  std::size_t n = 0;
  for (const auto& q : pending_) n += q.size();
  return n;
}

std::uint64_t Simulation::in_network() const {
  std::uint64_t n = 0;
  for (const auto& l : lanes_) n += l.size();
  return n;
}

bool Simulation::try_insert(const Arrival& a) {
  const double L = x_.approach_length;
  const double need = params_.vehicle_length + params_.min_gap;
  int best = -1;
  for (int l : lanes_by_movement_[a.approach * 3 + static_cast<int>(a.movement)]) {
    const auto& q = lanes_[l];
    if (!q.empty() && q.back().pos + need > L + 1e-9) continue;
    if (best < 0 || q.size() < lanes_[best].size()) best = l;
  }
  if (best < 0) return false;

  Vehicle v;
  v.id = a.vehicle_id;
  v.is_cv = a.is_cv;
  v.approach = a.approach;
  v.lane = best;
  v.movement = a.movement;
  for (int c : x_.lanes[best].connections) {
    if (x_.connections[c].movement == a.movement) v.connection = c;
  }
  v.pos = L;
  v.arrival_time = a.time;
  v.inserted_at = time_;
  v.length = params_.vehicle_length;
  v.min_gap = params_.min_gap;
  const auto& cf = params_.car_following;
  v.speed = cf.v_max;
  if (!lanes_[best].empty()) {
    const Vehicle& last = lanes_[best].back();
    const Obstacle ob{L - last.pos - last.length - v.min_gap, last.speed};
    v.speed = std::clamp(safe_speed(cf, last.speed, ob), 0.0, cf.v_max);
  }
  lanes_[best].push_back(v);
  ++inserted_total_;
  log(EventKind::Insert, &lanes_[best].back());
  return true;
}

std::vector<std::uint8_t> Simulation::permissive_clearance() const {
  // Computed once per step from pre-update states so lane order does not
  // leak into gap acceptance.
  std::vector<std::uint8_t> ok(x_.connections.size(), 1);
  const auto& cf = params_.car_following;
  for (const auto& c : x_.connections) {
    if (!c.permissive) continue;
    const int opposing = (x_.lanes[c.from_lane].approach + 2) % kApproaches;
    for (int k = 0; k < x_.lanes_per_approach && ok[c.id]; ++k) {
      for (const auto& v : lanes_[x_.incoming_lane(opposing, k)]) {
        if (v.movement == Movement::Left) continue;
        if (connection_state(v.connection) == SignalState::Red) continue;
        if (v.pos < free_reach(cf, v.speed, params_.permissive_gap, params_.dt)) {
          ok[c.id] = 0;
          break;
        }
      }
    }
  }
  return ok;
}

bool Simulation::can_cross(const Vehicle& v, const std::vector<std::uint8_t>& permissive_ok) const {
  switch (connection_state(v.connection)) {
    case SignalState::Green: return permissive_ok[v.connection] != 0;
    case SignalState::Yellow:
      // Dilemma zone: proceed only if a comfortable stop is impossible.
      return v.speed * v.speed > 2.0 * params_.car_following.decel * v.pos;
    case SignalState::Red: return false;
  }
  return false;
}

void Simulation::update_outgoing(int lane, SimEvents& ev) {
  auto& q = lanes_[lane];
  const auto& cf = params_.car_following;
  const double dt = params_.dt;
  const Vehicle* leader = nullptr;
  for (auto& v : q) {
    std::optional<Obstacle> ahead;
    if (leader) ahead = Obstacle{v.pos - leader->pos - leader->length - v.min_gap, leader->speed};
    v.speed = next_speed(cf, v.speed, ahead, dt);
    v.pos -= v.speed * dt;
    leader = &v;
  }
  while (!q.empty() && q.front().pos <= 0.0) {
    Vehicle& v = q.front();
    v.exited_at = time_ + dt;
    ++exited_total_;
    ev.exited.push_back(v.id);
    log(EventKind::Exit, &v);
    q.pop_front();
  }
}

void Simulation::update_incoming(int lane, const std::vector<std::uint8_t>& permissive_ok,
                                 SimEvents& ev) {
  auto& q = lanes_[lane];
  const auto& cf = params_.car_following;
  const double dt = params_.dt;
  const double L = x_.approach_length;

  std::size_t crossed = 0;
  // Most recent vehicle of this lane that crossed during this step, in this
  // lane's coordinates (negative position past the stop line).
  bool have_virtual = false;
  double virtual_pos = 0.0, virtual_speed = 0.0, virtual_len = 0.0;

  for (std::size_t i = 0; i < q.size(); ++i) {
    Vehicle& v = q[i];
    const bool head = i == crossed;
    double vn;
    bool may_cross = false;
    if (!head) {
      const Vehicle& lead = q[i - 1];
      vn = next_speed(cf, v.speed,
                      Obstacle{v.pos - lead.pos - lead.length - v.min_gap, lead.speed}, dt);
    } else if (can_cross(v, permissive_ok)) {
      may_cross = true;
      vn = next_speed(cf, v.speed, std::nullopt, dt);
      const auto& out = lanes_[x_.connections[v.connection].to_lane];
      if (!out.empty()) {
        const Vehicle& last = out.back();
        const double lp = last.pos - L;
        vn = std::min(vn, next_speed(cf, v.speed,
                                     Obstacle{v.pos - lp - last.length - v.min_gap, last.speed}, dt));
      }
      if (have_virtual) {
        vn = std::min(vn, next_speed(cf, v.speed,
                                     Obstacle{v.pos - virtual_pos - virtual_len - v.min_gap,
                                              virtual_speed},
                                     dt));
      }
    } else {
      vn = next_speed(cf, v.speed, Obstacle{v.pos, 0.0}, dt);
    }
    v.speed = vn;
    v.pos -= vn * dt;

    if (may_cross && v.pos < 0.0) {
      const int to = x_.connections[v.connection].to_lane;
      have_virtual = true;
      virtual_pos = v.pos;
      virtual_speed = v.speed;
      virtual_len = v.length;
      Vehicle moved = v;
      moved.lane = to;
      moved.pos = L + v.pos;
      moved.crossed_at = time_ + dt;
      lanes_[to].push_back(moved);
      ev.crossed.push_back(moved.id);
      log(EventKind::Cross, &lanes_[to].back());
      ++crossed;
    }
  }
  q.erase(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(crossed));
}

SimEvents Simulation::step() {
  SimEvents ev;
  const double dt = params_.dt;

  while (next_arrival_ < arrivals_.size() && arrivals_[next_arrival_].time < time_ + dt) {
    const Arrival& a = arrivals_[next_arrival_++];
    pending_[a.approach].push_back(a);
    ++arrived_total_;
  }
  for (int e = 0; e < kApproaches; ++e) {
    while (!pending_[e].empty() && try_insert(pending_[e].front())) {
      ev.inserted.push_back(pending_[e].front().vehicle_id);
      pending_[e].pop_front();
    }
  }

  const auto permissive_ok = permissive_clearance();
  for (int l = x_.incoming_count(); l < x_.lane_count(); ++l) update_outgoing(l, ev);
  for (int l = 0; l < x_.incoming_count(); ++l) update_incoming(l, permissive_ok, ev);

  if (timer_.advance(dt)) {
    time_ += dt;
    log(EventKind::Stage, nullptr);
  } else {
    time_ += dt;
  }

  if (params_.record_states) {
    for (const auto& q : lanes_) {
      for (const auto& v : q) log(EventKind::State, &v);
    }
  }
  return ev;
}

Observation Simulation::observe() const {
  Observation obs;
  obs.time = time_;
  obs.timer = timer_;
  obs.lane_green = lane_green();
  obs.lane_counts.resize(lanes_.size());
  for (std::size_t l = 0; l < lanes_.size(); ++l) {
    obs.lane_counts[l] = static_cast<int>(lanes_[l].size());
    for (const auto& v : lanes_[l]) {
      obs.vehicles.push_back({v.id, v.lane, v.pos, v.speed, v.is_cv});
    }
  }
  return obs;
}

double Simulation::total_delay() const {
  const double vmax = params_.car_following.v_max;
  double sum = 0.0;
  for (const auto& q : lanes_) {
    for (const auto& v : q) sum += 1.0 - v.speed / vmax;
  }
  return sum;
}

double Simulation::total_squared_delay() const {
  const double vmax = params_.car_following.v_max;
  double sum = 0.0;
  for (int l = 0; l < x_.incoming_count(); ++l) {
    for (const auto& v : lanes_[l]) {
      const double r = v.speed / vmax;
      sum += 1.0 - r * r;
    }
  }
  return sum;
}

int Simulation::queued_vehicles() const {
  int n = 0;
  for (int l = 0; l < x_.incoming_count(); ++l) {
    for (const auto& v : lanes_[l]) n += v.speed < 0.1 ? 1 : 0;
  }
  return n;
}

void Simulation::place_vehicle(Vehicle v) {
  if (v.lane < 0 || v.lane >= x_.lane_count()) throw Error("lane out of range");
  if (x_.is_incoming(v.lane)) {
    bool found = false;
    for (int c : x_.lanes[v.lane].connections) {
      if (x_.connections[c].movement == v.movement) {
        v.connection = c;
        found = true;
      }
    }
    if (!found) v.connection = x_.lanes[v.lane].connections.front();
    v.movement = x_.connections[v.connection].movement;
  }
  v.approach = x_.lanes[v.lane].approach;
  auto& q = lanes_[v.lane];
  auto it = std::find_if(q.begin(), q.end(), [&](const Vehicle& o) { return o.pos > v.pos; });
  q.insert(it, v);
  ++inserted_total_;
}

void Simulation::log(EventKind kind, const Vehicle* v) {
  if (!params_.record_events && !(kind == EventKind::State && params_.record_states)) return;
  SimEvent e;
  e.t = time_;
  e.kind = kind;
  e.phase = timer_.phase();
  e.stage = timer_.stage();
  if (v) {
    e.vehicle_id = v->id;
    e.is_cv = v->is_cv;
    e.lane = v->lane;
    e.pos = v->pos;
    e.speed = v->speed;
  }
  events_.push_back(e);
}

void Simulation::write_event_csv(std::ostream& os) const {
  os << "t,event,vehicle_id,is_cv,lane,pos,speed,phase,stage\n";
  char buf[256];
  for (const auto& e : events_) {
    if (e.vehicle_id >= 0) {
      std::snprintf(buf, sizeof buf, "%.3f,%s,%lld,%d,%d,%.9g,%.9g,%d,%s\n", e.t, event_name(e.kind),
                    static_cast<long long>(e.vehicle_id), e.is_cv ? 1 : 0, e.lane, e.pos, e.speed,
                    e.phase, stage_name(e.stage));
    } else {
      std::snprintf(buf, sizeof buf, "%.3f,%s,,,,,,%d,%s\n", e.t, event_name(e.kind), e.phase,
                    stage_name(e.stage));
    }
    os << buf;
  }
}

}  // namespace crossflow::sim
