#include "crossflow/agent/replay.hpp"

#include <algorithm>

#include "crossflow/error.hpp"

namespace crossflow::agent {

CompactState CompactState::pack(const dtse::PartialDtse& s) {
  const auto& shape = s.shape();
  if (shape.lanes > 32) throw Error("compact state supports at most 32 lanes");
  if (shape.lanes * shape.cells > 65535) throw Error("state too large for compact storage");
  CompactState c;
  for (int lane = 0; lane < shape.lanes; ++lane) {
    for (int cell = 0; cell < shape.cells; ++cell) {
      if (s.at(dtse::kPresence, lane, cell) != 0.0f) {
        c.cells.push_back(static_cast<std::uint16_t>(lane * shape.cells + cell));
        c.speeds.push_back(s.at(dtse::kSpeed, lane, cell));
      }
    }
    if (s.at(dtse::kSignal, lane, 0) != 0.0f) c.green |= 1u << lane;
  }
  return c;
}

void CompactState::unpack(const dtse::StateShape& shape, float* out) const {
  const int plane = shape.lanes * shape.cells;
  std::fill(out, out + shape.size(), 0.0f);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out[dtse::kPresence * plane + cells[i]] = 1.0f;
    out[dtse::kSpeed * plane + cells[i]] = speeds[i];
  }
  float* sig = out + dtse::kSignal * plane;
  for (int lane = 0; lane < shape.lanes; ++lane) {
    if (green & (1u << lane)) std::fill(sig + lane * shape.cells, sig + (lane + 1) * shape.cells, 1.0f);
  }
}

dtse::PartialDtse CompactState::unpack(const dtse::StateShape& shape) const {
  dtse::PartialDtse s(shape);
  unpack(shape, s.values().data());
  return s;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t warmup)
    : capacity_(capacity), warmup_(warmup) {
  if (capacity == 0) throw Error("replay capacity must be positive");
  if (warmup > capacity) throw Error("replay warm-up exceeds capacity");
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= data_.size()) throw Error("replay index out of range");
  return data_[(head_ + i) % data_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, RngStream& rng) const {
  if (!ready()) throw Error("replay memory is below its warm-up size");
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_int(data_.size()));
  return idx;
}

}  // namespace crossflow::agent
