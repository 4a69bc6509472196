#pragma once

#include <array>
#include <string>
#include <vector>

#include "crossflow/sim/scenario.hpp"
#include "crossflow/sim/simulation.hpp"

namespace crossflow::dtse {

inline constexpr int kChannels = 3;
enum Channel : int { kPresence = 0, kSpeed = 1, kSignal = 2 };

struct EncoderConfig {
  double cell_length = 8.0;
  double detection_range = 160.0;

  int cells() const;
};

struct StateShape {
  int channels = kChannels;
  int lanes = 0;
  int cells = 0;

  int size() const { return channels * lanes * cells; }
  bool operator==(const StateShape&) const = default;
};

/// Image-like state over connected vehicles: presence, normalized speed and
/// per-lane green flag, each an L x C plane. Rows are incoming lanes
/// (N, E, S, W; curb to median), columns are cells counted from the stop
/// line. Stored channel-major, row-major within a plane.
class PartialDtse {
 public:
  PartialDtse() = default;
  explicit PartialDtse(StateShape shape) : shape_(shape), data_(shape.size(), 0.0f) {}

  const StateShape& shape() const { return shape_; }
  float& at(int channel, int lane, int cell) {
    return data_[(channel * shape_.lanes + lane) * shape_.cells + cell];
  }
  float at(int channel, int lane, int cell) const {
    return data_[(channel * shape_.lanes + lane) * shape_.cells + cell];
  }
  const std::vector<float>& values() const { return data_; }
  std::vector<float>& values() { return data_; }

  bool operator==(const PartialDtse&) const = default;

 private:
  StateShape shape_{};
  std::vector<float> data_;
};

StateShape state_shape(const sim::Intersection& x, const EncoderConfig& cfg = {});
StateShape state_shape(char scenario, const EncoderConfig& cfg = {});

/// A CV at distance d < range from its stop line marks cell floor(d/cell)
/// and writes speed / v_max there; when two CVs share a cell the one nearer
/// the stop line wins the speed slot. Vehicles on outgoing lanes and beyond
/// range are ignored.
PartialDtse encode(const sim::CvObservation& obs, const sim::Intersection& x,
                   const EncoderConfig& cfg = {});

/// Three aligned text grids, one per channel.
std::string render(const PartialDtse& s);

}  // namespace crossflow::dtse
