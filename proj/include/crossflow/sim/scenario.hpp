#pragma once

#include <optional>
#include <string>
#include <vector>

namespace crossflow::sim {

/// Legs of the intersection, clockwise. Incoming lanes are always laid out
/// in this order, which fixes the row order of the state encoding.
enum class Approach : int { North = 0, East = 1, South = 2, West = 3 };
inline constexpr int kApproaches = 4;

enum class Movement : int { Left = 0, Through = 1, Right = 2 };
enum class LaneDirection : int { Incoming = 0, Outgoing = 1 };

char approach_letter(int approach);
const char* movement_name(Movement m);

/// Destination leg for a movement starting on `approach` (right-hand traffic).
int destination(int approach, Movement m);

struct Connection {
  int id = 0;
  int from_lane = 0;  // incoming lane id
  int to_lane = 0;    // outgoing lane id
  Movement movement = Movement::Through;
  /// Left turn that must yield to opposing through/right traffic.
  bool permissive = false;
};

struct Lane {
  int id = 0;
  LaneDirection direction = LaneDirection::Incoming;
  int approach = 0;
  int index_from_curb = 0;
  std::vector<int> connections;  // ids; empty for outgoing lanes
};

struct Phase {
  std::string name;
  std::vector<int> connections;
};

struct SignalProgram {
  std::vector<Phase> phases;
  double green_min = 10.0;
  double yellow = 3.0;
  double red = 2.0;
  std::optional<double> green_max;

  int size() const { return static_cast<int>(phases.size()); }
};

/// One isolated four-way intersection. Lane ids are dense: incoming lanes
/// first (N, E, S, W; curb to median within an approach), then outgoing
/// lanes in the same order.
struct Intersection {
  char tag = 'a';
  int lanes_per_approach = 2;
  double approach_length = 300.0;
  double speed_limit = 13.89;
  std::vector<Lane> lanes;
  std::vector<Connection> connections;
  SignalProgram program;

  int incoming_count() const { return kApproaches * lanes_per_approach; }
  int lane_count() const { return static_cast<int>(lanes.size()); }
  int incoming_lane(int approach, int index_from_curb) const {
    return approach * lanes_per_approach + index_from_curb;
  }
  int outgoing_lane(int approach, int index_from_curb) const {
    return incoming_count() + approach * lanes_per_approach + index_from_curb;
  }
  bool is_incoming(int lane) const { return lane < incoming_count(); }

  /// Incoming lanes that own at least one connection of `phase`, ascending.
  std::vector<int> phase_incoming_lanes(int phase) const;
  /// Outgoing lanes reached by the connections of `phase`, ascending.
  std::vector<int> phase_outgoing_lanes(int phase) const;
  /// Per-incoming-lane flag: lane has a connection in `phase`.
  std::vector<bool> phase_lane_mask(int phase) const;
  /// Per-connection flag for `phase`.
  std::vector<bool> phase_connection_mask(int phase) const;

  /// Throws crossflow::Error when a structural invariant is violated.
  void validate() const;
};

/// Scenarios (a) 2 lanes / 2 phases permissive, (b) 3 lanes / 4 phases,
/// (c) 4 lanes / 4 phases with two left-turn lanes.
Intersection build_scenario(char tag);
Intersection build_scenario(const std::string& tag);

}  // namespace crossflow::sim
