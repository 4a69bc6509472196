#include "crossflow/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "crossflow/error.hpp"
#include "crossflow/sim/scenario.hpp"

namespace crossflow::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'T', 'S', 'C', 'Q'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw CheckpointError("checkpoint is truncated");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const NetworkParams& params, const CheckpointMeta& meta) {
  const Architecture& a = params.arch();
  std::vector<std::uint8_t> out;
  out.reserve(40 + params.size() * 4);
  out.insert(out.end(), kMagic, kMagic + 4);
  put<std::uint16_t>(out, kCheckpointVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(meta.scenario));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(a.actions));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(a.input.channels));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(a.input.lanes));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(a.input.cells));
  put<std::uint64_t>(out, meta.step);
  put<double>(out, meta.tsd_max);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (float w : params.data()) put<float>(out, w);
  return out;
}

Checkpoint load_checkpoint(const std::vector<std::uint8_t>& bytes, std::optional<char> expected_scenario) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  Reader r(bytes);
  (void)r.get<std::uint32_t>();
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.meta.scenario = static_cast<char>(r.get<std::uint8_t>());
  const int actions = r.get<std::uint16_t>();
  dtse::StateShape shape;
  shape.channels = r.get<std::uint16_t>();
  shape.lanes = r.get<std::uint16_t>();
  shape.cells = r.get<std::uint16_t>();
  ck.meta.step = r.get<std::uint64_t>();
  ck.meta.tsd_max = r.get<double>();
  const auto count = r.get<std::uint32_t>();

  if (expected_scenario) {
    const auto x = sim::build_scenario(*expected_scenario);
    const auto want = dtse::state_shape(x);
    if (!(want == shape) || actions != static_cast<int>(x.program.phases.size())) {
      throw CheckpointError(std::string("checkpoint was trained for scenario '") + ck.meta.scenario +
                            "' and does not fit scenario '" + *expected_scenario + "'");
    }
  }

  Architecture arch;
  try {
    arch = Architecture::for_input(shape, actions);
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint header is invalid: ") + e.what());
  }
  NetworkParams params(arch);
  if (count != params.size()) throw CheckpointError("checkpoint parameter count does not match its shape");
  if (r.remaining() != static_cast<std::size_t>(count) * sizeof(float)) {
    throw CheckpointError("checkpoint is truncated or has trailing bytes");
  }
  for (auto& w : params.data()) w = r.get<float>();
  ck.params = std::move(params);
  return ck;
}

void write_checkpoint_file(const std::filesystem::path& path, const NetworkParams& params,
                           const CheckpointMeta& meta) {
  const auto bytes = save_checkpoint(params, meta);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("failed writing " + path.string());
}

Checkpoint read_checkpoint_file(const std::filesystem::path& path, std::optional<char> expected_scenario) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return load_checkpoint(bytes, expected_scenario);
}

}  // namespace crossflow::nn
