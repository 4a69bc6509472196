#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crossflow/nn/network.hpp"

namespace crossflow::nn {

/// Checkpoint layout (all integers and floats little-endian):
///
///   "TSCQ"            4 bytes magic
///   version           u16 (currently 1)
///   scenario          u8  ASCII tag
///   actions           u16
///   channels, lanes, cells   u16 each
///   training step     u64
///   tsd_max           f64 reward normalizer at save time
///   parameter count   u32
///   parameters        f32 x count, blocks in order conv1 w/b, conv2 w/b,
///                     fc1 w/b, fc2 w/b, value w/b, advantage w/b
struct CheckpointMeta {
  char scenario = 'a';
  std::uint64_t step = 0;
  double tsd_max = 1.0;
};

struct Checkpoint {
  CheckpointMeta meta;
  NetworkParams params;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> save_checkpoint(const NetworkParams& params, const CheckpointMeta& meta);
/// Throws CheckpointError on bad magic/version, truncation, or when
/// `expected_scenario` is given and the stored input shape differs from it.
Checkpoint load_checkpoint(const std::vector<std::uint8_t>& bytes,
                           std::optional<char> expected_scenario = std::nullopt);

void write_checkpoint_file(const std::filesystem::path& path, const NetworkParams& params,
                           const CheckpointMeta& meta);
Checkpoint read_checkpoint_file(const std::filesystem::path& path,
                                std::optional<char> expected_scenario = std::nullopt);

}  // namespace crossflow::nn
