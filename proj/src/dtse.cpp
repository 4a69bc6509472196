#include "crossflow/dtse.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "crossflow/error.hpp"

namespace crossflow::dtse {

int EncoderConfig::cells() const {
  if (cell_length <= 0.0) throw Error("cell length must be positive");
  return static_cast<int>(std::ceil(detection_range / cell_length - 1e-9));
}

StateShape state_shape(const sim::Intersection& x, const EncoderConfig& cfg) {
  return {kChannels, x.incoming_count(), cfg.cells()};
}

StateShape state_shape(char scenario, const EncoderConfig& cfg) {
  return state_shape(sim::build_scenario(scenario), cfg);
}

PartialDtse encode(const sim::CvObservation& obs, const sim::Intersection& x,
                   const EncoderConfig& cfg) {
  if (cfg.detection_range > x.approach_length) throw Error("detection range exceeds approach length");
  const StateShape shape = state_shape(x, cfg);
  PartialDtse s(shape);
  // Distance of the CV currently owning each speed slot.
  std::vector<double> owner(static_cast<std::size_t>(shape.lanes) * shape.cells,
                            std::numeric_limits<double>::infinity());
  const double vmax = x.speed_limit;
  for (const auto& v : obs.vehicles()) {
    if (!x.is_incoming(v.lane)) continue;
    const double d = v.pos;
    if (d < 0.0 || d >= cfg.detection_range) continue;
    const int cell = std::min(static_cast<int>(std::floor(d / cfg.cell_length)), shape.cells - 1);
    s.at(kPresence, v.lane, cell) = 1.0f;
    auto& o = owner[static_cast<std::size_t>(v.lane) * shape.cells + cell];
    if (d < o) {
      o = d;
      s.at(kSpeed, v.lane, cell) = static_cast<float>(std::clamp(v.speed / vmax, 0.0, 1.0));
    }
  }
  const auto& green = obs.lane_green();
  for (int l = 0; l < shape.lanes && l < static_cast<int>(green.size()); ++l) {
    if (!green[l]) continue;
    for (int c = 0; c < shape.cells; ++c) s.at(kSignal, l, c) = 1.0f;
  }
  return s;
}

std::string render(const PartialDtse& s) {
  static const char* names[kChannels] = {"P (presence)", "V (speed / v_max)", "S (green)"};
  std::string out;
  char buf[32];
  const auto& sh = s.shape();
  for (int ch = 0; ch < sh.channels; ++ch) {
    out += names[ch];
    out += '\n';
    for (int l = 0; l < sh.lanes; ++l) {
      std::snprintf(buf, sizeof buf, "%c%d |", sim::approach_letter(l / (sh.lanes / 4)),
                    l % (sh.lanes / 4));
      out += buf;
      for (int c = 0; c < sh.cells; ++c) {
        const float v = s.at(ch, l, c);
        if (ch == kSpeed) {
          std::snprintf(buf, sizeof buf, " %4.2f", v);
        } else {
          std::snprintf(buf, sizeof buf, " %d", v != 0.0f ? 1 : 0);
        }
        out += buf;
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace crossflow::dtse
