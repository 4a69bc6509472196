#pragma once

#include <array>
#include <span>
#include <vector>

#include "crossflow/dtse.hpp"
#include "crossflow/nn/tensor.hpp"
#include "crossflow/rng.hpp"

namespace crossflow::nn {

struct ConvSpec {
  int channels = 0;
  int kernel = 0;
  int stride = 1;
  bool operator==(const ConvSpec&) const = default;
};

/// Output extent of an unpadded convolution along one axis.
int conv_out_extent(int extent, int kernel, int stride);

/// Fixed topology: conv(16,4,2) -> conv(32,2,1) -> fc 128 -> fc 64, all
/// ELU, then a scalar value head and an |A|-wide advantage head.
struct Architecture {
  dtse::StateShape input{};
  int actions = 2;
  ConvSpec conv1{16, 4, 2};
  ConvSpec conv2{32, 2, 1};
  int fc1 = 128;
  int fc2 = 64;

  static Architecture for_input(const dtse::StateShape& input, int actions);

  int h1() const { return conv_out_extent(input.lanes, conv1.kernel, conv1.stride); }
  int w1() const { return conv_out_extent(input.cells, conv1.kernel, conv1.stride); }
  int h2() const { return conv_out_extent(h1(), conv2.kernel, conv2.stride); }
  int w2() const { return conv_out_extent(w1(), conv2.kernel, conv2.stride); }
  int flat() const { return h2() * w2() * conv2.channels; }
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

/// Parameter blocks, in storage and checkpoint order.
enum class Block : int {
  Conv1W, Conv1B, Conv2W, Conv2B, Fc1W, Fc1B, Fc2W, Fc2B, ValueW, ValueB, AdvW, AdvB
};
inline constexpr int kBlocks = 12;

struct InitConfig {
  /// Output heads are scaled down so initial Q values are near uniform.
  float head_scale = 0.01f;
};

/// All weights of the dueling network in one flat buffer.
///
/// Layouts: conv weights are [kh][kw][c_in][c_out]; dense weights are
/// [in][out]; the fc1 input is the conv2 output flattened as (row, col,
/// channel).
class NetworkParams {
 public:
  NetworkParams() = default;
  explicit NetworkParams(const Architecture& arch);

  static NetworkParams initialize(const Architecture& arch, RngStream& rng, InitConfig init = {});

  const Architecture& arch() const { return arch_; }
  std::span<float> block(Block b);
  std::span<const float> block(Block b) const;
  std::size_t block_offset(Block b) const { return offsets_[static_cast<int>(b)]; }
  std::size_t block_size(Block b) const;

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }
  std::size_t size() const { return data_.size(); }

 private:
  Architecture arch_{};
  std::array<std::size_t, kBlocks + 1> offsets_{};
  std::vector<float> data_;
};

/// Activations of one batched forward pass, kept for backprop.
template <class T>
struct BasicWorkspace {
  int batch = 0;
  std::vector<T> input;  // channel-last [b][h][w][c]
  std::vector<T> col1, a1, col2, a2, a3, a4;
  std::vector<T> g1, g2, g3, g4;  // ELU derivatives at a1..a4
  std::vector<T> value, adv, q;   // [b], [b][a], [b][a]
  std::vector<T> weights;         // double-precision copy of the parameters
};
using Workspace = BasicWorkspace<float>;
using WorkspaceD = BasicWorkspace<double>;

/// Forward pass over `batch` states laid out as consecutive PartialDtse
/// value arrays (channel-major). Q values end up in `ws.q`.
void forward(const NetworkParams& params, std::span<const float> states, int batch, Workspace& ws);

/// Gradient of a loss whose derivative w.r.t. Q is `dq` ([b][a]) back to
/// every parameter; overwrites `grads` (same layout as params.data()).
void backward(const NetworkParams& params, const Workspace& ws, std::span<const float> dq,
              std::vector<float>& grads);

/// The same two passes evaluated in double precision. Training never uses
/// these; they let tests separate the backprop algebra from float32
/// rounding.
void forward(const NetworkParams& params, std::span<const double> states, int batch, WorkspaceD& ws);
void backward(const NetworkParams& params, const WorkspaceD& ws, std::span<const double> dq,
              std::vector<double>& grads);

struct QOutput {
  float value = 0.0f;
  std::vector<float> advantage;
  std::vector<float> q;
};

QOutput evaluate(const NetworkParams& params, const dtse::PartialDtse& state);

/// Q = V + (A - mean A) for one sample.
std::vector<float> dueling_aggregate(float value, std::span<const float> advantage);

/// Single unpadded cross-correlation on a (C, H, W) tensor. Weights are
/// [kh][kw][c_in][c_out], bias has c_out entries. Output is (c_out, H', W').
Tensor conv2d_forward(const Tensor& input, std::span<const float> weights,
                      std::span<const float> bias, const ConvSpec& spec);

}  // namespace crossflow::nn
