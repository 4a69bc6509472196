#pragma once

#include <cstdint>
#include <vector>

#include "crossflow/dtse.hpp"
#include "crossflow/rng.hpp"

namespace crossflow::agent {

/// Lossless sparse form of a PartialDtse: the occupied cells with their
/// speed value, plus one green bit per lane. A dense state of scenario (c)
/// is 3.8 kB; a typical compact one is a few hundred bytes, which is what
/// makes a million-transition memory fit in desktop RAM.
struct CompactState {
  std::vector<std::uint16_t> cells;  // lane * cells + cell, ascending
  std::vector<float> speeds;         // V channel at those cells
  std::uint32_t green = 0;           // bit per lane

  static CompactState pack(const dtse::PartialDtse& s);
  /// Writes the dense values into `out` (shape.size() floats).
  void unpack(const dtse::StateShape& shape, float* out) const;
  dtse::PartialDtse unpack(const dtse::StateShape& shape) const;
  bool operator==(const CompactState&) const = default;
};

struct Transition {
  CompactState s;
  int action = 0;
  CompactState next;
  float reward = 0.0f;
  bool terminal = false;
};

/// FIFO ring of the most recent `capacity` transitions with uniform
/// sampling (with replacement).
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t warmup);

  std::size_t capacity() const { return capacity_; }
  std::size_t warmup() const { return warmup_; }
  std::size_t size() const { return data_.size(); }
  bool ready() const { return size() >= warmup_ && size() > 0; }

  void push(Transition t);
  /// i = 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;
  /// Indices for `at()` of a uniform batch; throws below the warm-up size.
  std::vector<std::size_t> sample_indices(std::size_t batch, RngStream& rng) const;

 private:
  std::size_t capacity_;
  std::size_t warmup_;
  std::size_t head_ = 0;  // oldest element once full
  std::vector<Transition> data_;
};

}  // namespace crossflow::agent
