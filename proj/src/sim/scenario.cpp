#include "crossflow/sim/scenario.hpp"

#include <algorithm>
#include <set>

#include "crossflow/error.hpp"

namespace crossflow::sim {

char approach_letter(int approach) { return "NESW"[approach & 3]; }

const char* movement_name(Movement m) {
  switch (m) {
    case Movement::Left: return "left";
    case Movement::Through: return "through";
    case Movement::Right: return "right";
  }
  return "?";
}

int destination(int approach, Movement m) {
  switch (m) {
    case Movement::Left: return (approach + 1) % kApproaches;
    case Movement::Through: return (approach + 2) % kApproaches;
    case Movement::Right: return (approach + 3) % kApproaches;
  }
  return approach;
}

namespace {

struct LaneTemplate {
  std::vector<Movement> movements;
};

// Curb-to-median lane plans. Through lane k feeds outgoing lane k, right
// turns feed the curb lane, and left turns keep their median offset so that
// simultaneous movements never merge into the same outgoing lane.
std::vector<LaneTemplate> lane_plan(char tag) {
  using M = Movement;
  switch (tag) {
    case 'a': return {{{M::Through, M::Right}}, {{M::Left}}};
    case 'b': return {{{M::Through, M::Right}}, {{M::Through}}, {{M::Left}}};
    case 'c': return {{{M::Through, M::Right}}, {{M::Through}}, {{M::Left}}, {{M::Left}}};
    default: throw Error(std::string("unknown scenario tag '") + tag + "'");
  }
}

}  // namespace

Intersection build_scenario(char tag) {
  const auto plan = lane_plan(tag);
  Intersection x;
  x.tag = tag;
  x.lanes_per_approach = static_cast<int>(plan.size());
  const int n = x.lanes_per_approach;
  const bool permissive = tag == 'a';

  for (int dir = 0; dir < 2; ++dir) {
    for (int a = 0; a < kApproaches; ++a) {
      for (int k = 0; k < n; ++k) {
        Lane lane;
        lane.id = static_cast<int>(x.lanes.size());
        lane.direction = dir == 0 ? LaneDirection::Incoming : LaneDirection::Outgoing;
        lane.approach = a;
        lane.index_from_curb = k;
        x.lanes.push_back(lane);
      }
    }
  }

  for (int a = 0; a < kApproaches; ++a) {
    for (int k = 0; k < n; ++k) {
      const int from = x.incoming_lane(a, k);
      for (Movement m : plan[k].movements) {
        Connection c;
        c.id = static_cast<int>(x.connections.size());
        c.from_lane = from;
        c.movement = m;
        c.permissive = permissive && m == Movement::Left;
        const int to_leg = destination(a, m);
        int to_index = k;
        if (m == Movement::Right) to_index = 0;
        c.to_lane = x.outgoing_lane(to_leg, to_index);
        x.lanes[from].connections.push_back(c.id);
        x.connections.push_back(c);
      }
    }
  }

  auto collect = [&](std::initializer_list<int> legs, std::initializer_list<Movement> moves) {
    std::vector<int> ids;
    for (const auto& c : x.connections) {
      const int leg = x.lanes[c.from_lane].approach;
      if (std::find(legs.begin(), legs.end(), leg) != legs.end() &&
          std::find(moves.begin(), moves.end(), c.movement) != moves.end()) {
        ids.push_back(c.id);
      }
    }
    return ids;
  };

  using M = Movement;
  constexpr int N = 0, E = 1, S = 2, W = 3;
  if (tag == 'a') {
    x.program.phases = {
        {"NS", collect({N, S}, {M::Left, M::Through, M::Right})},
        {"EW", collect({E, W}, {M::Left, M::Through, M::Right})},
    };
  } else {
    x.program.phases = {
        {"NS-through", collect({N, S}, {M::Through, M::Right})},
        {"NS-left", collect({N, S}, {M::Left})},
        {"EW-through", collect({E, W}, {M::Through, M::Right})},
        {"EW-left", collect({E, W}, {M::Left})},
    };
  }
  x.validate();
  return x;
}

Intersection build_scenario(const std::string& tag) {
  if (tag.size() != 1) throw Error("unknown scenario tag '" + tag + "'");
  return build_scenario(tag[0]);
}

std::vector<int> Intersection::phase_incoming_lanes(int phase) const {
  std::set<int> out;
  for (int c : program.phases.at(phase).connections) out.insert(connections[c].from_lane);
  return {out.begin(), out.end()};
}

std::vector<int> Intersection::phase_outgoing_lanes(int phase) const {
  std::set<int> out;
  for (int c : program.phases.at(phase).connections) out.insert(connections[c].to_lane);
  return {out.begin(), out.end()};
}

std::vector<bool> Intersection::phase_lane_mask(int phase) const {
  std::vector<bool> mask(incoming_count(), false);
  for (int c : program.phases.at(phase).connections) mask[connections[c].from_lane] = true;
  return mask;
}

std::vector<bool> Intersection::phase_connection_mask(int phase) const {
  std::vector<bool> mask(connections.size(), false);
  for (int c : program.phases.at(phase).connections) mask[c] = true;
  return mask;
}

void Intersection::validate() const {
  if (lane_count() != 2 * incoming_count()) throw Error("incoming and outgoing lane counts differ");
  for (int l = 0; l < incoming_count(); ++l) {
    if (lanes[l].connections.empty()) {
      throw Error("incoming lane " + std::to_string(l) + " has no connection");
    }
  }
  if (program.size() != 2 && program.size() != 4) throw Error("signal program must have 2 or 4 phases");
  if (program.yellow <= 0.0 || program.red < 0.0 || program.green_min <= 0.0) {
    throw Error("invalid signal intervals");
  }
  if (program.green_max && *program.green_max < program.green_min) {
    throw Error("maximum green shorter than minimum green");
  }
  std::vector<int> owner(connections.size(), 0);
  for (const auto& p : program.phases) {
    for (int c : p.connections) ++owner[c];
  }
  for (std::size_t c = 0; c < owner.size(); ++c) {
    if (owner[c] != 1) throw Error("connection " + std::to_string(c) + " is not in exactly one phase");
  }
}

}  // namespace crossflow::sim
