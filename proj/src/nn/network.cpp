#include "crossflow/nn/network.hpp"

#include <Eigen/Core>
#include <cmath>

#include "crossflow/error.hpp"
#include "crossflow/nn/ops.hpp"

namespace crossflow::nn {

namespace {

template <class T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Map = Eigen::Map<MatRM<T>>;
template <class T>
using CMap = Eigen::Map<const MatRM<T>>;
template <class T>
using RowVec = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

template <class T>
Map<T> mat(std::vector<T>& v, Eigen::Index rows, Eigen::Index cols) {
  return Map<T>(v.data(), rows, cols);
}
template <class T>
CMap<T> cmat(const std::vector<T>& v, Eigen::Index rows, Eigen::Index cols) {
  return CMap<T>(v.data(), rows, cols);
}
template <class T>
CMap<T> cmat(const T* v, Eigen::Index rows, Eigen::Index cols) {
  return CMap<T>(v, rows, cols);
}

// Patch matrix of an unpadded convolution over channel-last images:
// row (b, oh, ow), column (kh, kw, c).
template <class T>
void im2col(const T* in, int batch, int h, int w, int c, const ConvSpec& spec, int oh, int ow,
            std::vector<T>& col) {
  const int k = spec.kernel;
  const int row_len = k * k * c;
  col.resize(static_cast<std::size_t>(batch) * oh * ow * row_len);
  T* dst = col.data();
  for (int b = 0; b < batch; ++b) {
    const T* img = in + static_cast<std::size_t>(b) * h * w * c;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        for (int ky = 0; ky < k; ++ky) {
          const T* src = img + ((y * spec.stride + ky) * w + x * spec.stride) * c;
          std::copy(src, src + k * c, dst);
          dst += k * c;
        }
      }
    }
  }
}

// Scatter-add inverse of im2col.
template <class T>
void col2im(const T* col, int batch, int h, int w, int c, const ConvSpec& spec, int oh, int ow,
            std::vector<T>& out) {
  const int k = spec.kernel;
  out.assign(static_cast<std::size_t>(batch) * h * w * c, T(0));
  const T* src = col;
  for (int b = 0; b < batch; ++b) {
    T* img = out.data() + static_cast<std::size_t>(b) * h * w * c;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        for (int ky = 0; ky < k; ++ky) {
          T* dst = img + ((y * spec.stride + ky) * w + x * spec.stride) * c;
          for (int i = 0; i < k * c; ++i) dst[i] += src[i];
          src += k * c;
        }
      }
    }
  }
}

// Applies ELU in place and records its derivative, taken from the
// pre-activation since elu(x) + 1 cancels badly for strongly negative x.
template <class T>
void elu_inplace(std::vector<T>& v, std::vector<T>& deriv) {
  deriv.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const T x = v[i];
    deriv[i] = x > T(0) ? T(1) : std::exp(x);
    v[i] = x > T(0) ? x : std::expm1(x);
  }
}

template <class T>
void elu_backward(const std::vector<T>& deriv, std::vector<T>& grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= deriv[i];
}

template <class T>
void forward_impl(const NetworkParams& params, const T* weights, std::span<const T> states, int batch,
                  BasicWorkspace<T>& ws) {
  const Architecture& a = params.arch();
  const int C = a.input.channels, H = a.input.lanes, W = a.input.cells;
  const std::size_t per = static_cast<std::size_t>(C) * H * W;
  if (batch < 1 || states.size() != per * batch) throw Error("state batch does not match network input");
  ws.batch = batch;
  auto blk = [&](Block b) { return weights + params.block_offset(b); };

  // channel-major -> channel-last
  ws.input.resize(per * batch);
  for (int b = 0; b < batch; ++b) {
    const T* src = states.data() + per * b;
    T* dst = ws.input.data() + per * b;
    for (int c = 0; c < C; ++c) {
      for (int i = 0; i < H * W; ++i) dst[i * C + c] = src[c * H * W + i];
    }
  }

  const int h1 = a.h1(), w1 = a.w1(), h2 = a.h2(), w2 = a.w2();
  const int c1 = a.conv1.channels, c2 = a.conv2.channels;
  const int k1 = a.conv1.kernel * a.conv1.kernel * C;
  const int k2 = a.conv2.kernel * a.conv2.kernel * c1;
  const Eigen::Index r1 = static_cast<Eigen::Index>(batch) * h1 * w1;
  const Eigen::Index r2 = static_cast<Eigen::Index>(batch) * h2 * w2;

  im2col(ws.input.data(), batch, H, W, C, a.conv1, h1, w1, ws.col1);
  ws.a1.resize(r1 * c1);
  mat(ws.a1, r1, c1).noalias() = cmat(ws.col1, r1, k1) * cmat(blk(Block::Conv1W), k1, c1);
  mat(ws.a1, r1, c1).rowwise() += RowVec<T>(blk(Block::Conv1B), c1);
  elu_inplace(ws.a1, ws.g1);

  im2col(ws.a1.data(), batch, h1, w1, c1, a.conv2, h2, w2, ws.col2);
  ws.a2.resize(r2 * c2);
  mat(ws.a2, r2, c2).noalias() = cmat(ws.col2, r2, k2) * cmat(blk(Block::Conv2W), k2, c2);
  mat(ws.a2, r2, c2).rowwise() += RowVec<T>(blk(Block::Conv2B), c2);
  elu_inplace(ws.a2, ws.g2);

  const int F = a.flat();
  ws.a3.resize(static_cast<std::size_t>(batch) * a.fc1);
  mat(ws.a3, batch, a.fc1).noalias() = cmat(ws.a2, batch, F) * cmat(blk(Block::Fc1W), F, a.fc1);
  mat(ws.a3, batch, a.fc1).rowwise() += RowVec<T>(blk(Block::Fc1B), a.fc1);
  elu_inplace(ws.a3, ws.g3);

  ws.a4.resize(static_cast<std::size_t>(batch) * a.fc2);
  mat(ws.a4, batch, a.fc2).noalias() = cmat(ws.a3, batch, a.fc1) * cmat(blk(Block::Fc2W), a.fc1, a.fc2);
  mat(ws.a4, batch, a.fc2).rowwise() += RowVec<T>(blk(Block::Fc2B), a.fc2);
  elu_inplace(ws.a4, ws.g4);

  const int A = a.actions;
  ws.value.resize(batch);
  ws.adv.resize(static_cast<std::size_t>(batch) * A);
  ws.q.resize(static_cast<std::size_t>(batch) * A);
  mat(ws.value, batch, 1).noalias() = cmat(ws.a4, batch, a.fc2) * cmat(blk(Block::ValueW), a.fc2, 1);
  mat(ws.adv, batch, A).noalias() = cmat(ws.a4, batch, a.fc2) * cmat(blk(Block::AdvW), a.fc2, A);
  const T vb = blk(Block::ValueB)[0];
  const T* ab = blk(Block::AdvB);
  for (int b = 0; b < batch; ++b) {
    ws.value[b] += vb;
    T* adv = ws.adv.data() + static_cast<std::size_t>(b) * A;
    T mean = T(0);
    for (int i = 0; i < A; ++i) {
      adv[i] += ab[i];
      mean += adv[i];
    }
    mean /= static_cast<T>(A);
    T* q = ws.q.data() + static_cast<std::size_t>(b) * A;
    for (int i = 0; i < A; ++i) q[i] = ws.value[b] + (adv[i] - mean);
  }
}

template <class T>
void backward_impl(const NetworkParams& params, const T* weights, const BasicWorkspace<T>& ws,
                   std::span<const T> dq, std::vector<T>& grads) {
  const Architecture& a = params.arch();
  const int batch = ws.batch;
  const int A = a.actions;
  if (dq.size() != static_cast<std::size_t>(batch) * A) throw Error("dq size mismatch");
  grads.assign(params.size(), T(0));
  auto g = [&](Block b) { return grads.data() + params.block_offset(b); };
  auto blk = [&](Block b) { return weights + params.block_offset(b); };

  // Dueling aggregation: dV = sum_a dQ, dA_a = dQ_a - mean(dQ).
  std::vector<T> dvalue(batch), dadv(static_cast<std::size_t>(batch) * A);
  for (int b = 0; b < batch; ++b) {
    const T* d = dq.data() + static_cast<std::size_t>(b) * A;
    T sum = T(0);
    for (int i = 0; i < A; ++i) sum += d[i];
    dvalue[b] = sum;
    for (int i = 0; i < A; ++i) dadv[static_cast<std::size_t>(b) * A + i] = d[i] - sum / A;
  }

  const int fc1 = a.fc1, fc2 = a.fc2, F = a.flat();
  Map<T>(g(Block::ValueW), fc2, 1).noalias() = cmat(ws.a4, batch, fc2).transpose() * cmat(dvalue, batch, 1);
  g(Block::ValueB)[0] = cmat(dvalue, batch, 1).sum();
  Map<T>(g(Block::AdvW), fc2, A).noalias() = cmat(ws.a4, batch, fc2).transpose() * cmat(dadv, batch, A);
  Map<T>(g(Block::AdvB), 1, A).noalias() = cmat(dadv, batch, A).colwise().sum();

  std::vector<T> d4(static_cast<std::size_t>(batch) * fc2);
  mat(d4, batch, fc2).noalias() = cmat(dvalue, batch, 1) * cmat(blk(Block::ValueW), fc2, 1).transpose();
  mat(d4, batch, fc2).noalias() += cmat(dadv, batch, A) * cmat(blk(Block::AdvW), fc2, A).transpose();
  elu_backward(ws.g4, d4);

  Map<T>(g(Block::Fc2W), fc1, fc2).noalias() = cmat(ws.a3, batch, fc1).transpose() * cmat(d4, batch, fc2);
  Map<T>(g(Block::Fc2B), 1, fc2).noalias() = cmat(d4, batch, fc2).colwise().sum();
  std::vector<T> d3(static_cast<std::size_t>(batch) * fc1);
  mat(d3, batch, fc1).noalias() = cmat(d4, batch, fc2) * cmat(blk(Block::Fc2W), fc1, fc2).transpose();
  elu_backward(ws.g3, d3);

  Map<T>(g(Block::Fc1W), F, fc1).noalias() = cmat(ws.a2, batch, F).transpose() * cmat(d3, batch, fc1);
  Map<T>(g(Block::Fc1B), 1, fc1).noalias() = cmat(d3, batch, fc1).colwise().sum();
  std::vector<T> d2(static_cast<std::size_t>(batch) * F);
  mat(d2, batch, F).noalias() = cmat(d3, batch, fc1) * cmat(blk(Block::Fc1W), F, fc1).transpose();
  elu_backward(ws.g2, d2);

  const int h1 = a.h1(), w1 = a.w1(), h2 = a.h2(), w2 = a.w2();
  const int c1 = a.conv1.channels, c2 = a.conv2.channels;
  const int k1 = a.conv1.kernel * a.conv1.kernel * a.input.channels;
  const int k2 = a.conv2.kernel * a.conv2.kernel * c1;
  const Eigen::Index r1 = static_cast<Eigen::Index>(batch) * h1 * w1;
  const Eigen::Index r2 = static_cast<Eigen::Index>(batch) * h2 * w2;

  Map<T>(g(Block::Conv2W), k2, c2).noalias() = cmat(ws.col2, r2, k2).transpose() * cmat(d2, r2, c2);
  Map<T>(g(Block::Conv2B), 1, c2).noalias() = cmat(d2, r2, c2).colwise().sum();
  std::vector<T> dcol2(static_cast<std::size_t>(r2) * k2);
  mat(dcol2, r2, k2).noalias() = cmat(d2, r2, c2) * cmat(blk(Block::Conv2W), k2, c2).transpose();
  std::vector<T> d1;
  col2im(dcol2.data(), batch, h1, w1, c1, a.conv2, h2, w2, d1);
  elu_backward(ws.g1, d1);

  Map<T>(g(Block::Conv1W), k1, c1).noalias() = cmat(ws.col1, r1, k1).transpose() * cmat(d1, r1, c1);
  Map<T>(g(Block::Conv1B), 1, c1).noalias() = cmat(d1, r1, c1).colwise().sum();
}

}  // namespace

int conv_out_extent(int extent, int kernel, int stride) {
  if (kernel <= 0 || stride <= 0) throw Error("invalid convolution spec");
  if (extent < kernel) throw Error("input smaller than convolution kernel");
  return (extent - kernel) / stride + 1;
}

Architecture Architecture::for_input(const dtse::StateShape& input, int actions) {
  Architecture a;
  a.input = input;
  a.actions = actions;
  a.validate();
  return a;
}

void Architecture::validate() const {
  if (input.channels <= 0 || input.lanes <= 0 || input.cells <= 0) throw Error("empty input shape");
  if (actions < 1) throw Error("action count must be positive");
  (void)h2();
  (void)w2();
}

NetworkParams::NetworkParams(const Architecture& arch) : arch_(arch) {
  arch_.validate();
  const std::size_t k1 = static_cast<std::size_t>(arch.conv1.kernel) * arch.conv1.kernel *
                         arch.input.channels;
  const std::size_t k2 = static_cast<std::size_t>(arch.conv2.kernel) * arch.conv2.kernel *
                         arch.conv1.channels;
  const std::array<std::size_t, kBlocks> sizes = {
      k1 * arch.conv1.channels,
      static_cast<std::size_t>(arch.conv1.channels),
      k2 * arch.conv2.channels,
      static_cast<std::size_t>(arch.conv2.channels),
      static_cast<std::size_t>(arch.flat()) * arch.fc1,
      static_cast<std::size_t>(arch.fc1),
      static_cast<std::size_t>(arch.fc1) * arch.fc2,
      static_cast<std::size_t>(arch.fc2),
      static_cast<std::size_t>(arch.fc2),
      1,
      static_cast<std::size_t>(arch.fc2) * arch.actions,
      static_cast<std::size_t>(arch.actions),
  };
  offsets_[0] = 0;
  for (int i = 0; i < kBlocks; ++i) offsets_[i + 1] = offsets_[i] + sizes[i];
  data_.assign(offsets_[kBlocks], 0.0f);
}

std::size_t NetworkParams::block_size(Block b) const {
  const int i = static_cast<int>(b);
  return offsets_[i + 1] - offsets_[i];
}

std::span<float> NetworkParams::block(Block b) {
  return {data_.data() + block_offset(b), block_size(b)};
}

std::span<const float> NetworkParams::block(Block b) const {
  return {data_.data() + block_offset(b), block_size(b)};
}

NetworkParams NetworkParams::initialize(const Architecture& arch, RngStream& rng, InitConfig init) {
  NetworkParams p(arch);
  auto fill = [&](Block b, std::size_t fan_in, float scale) {
    const float limit = scale * std::sqrt(6.0f / static_cast<float>(fan_in));
    for (auto& w : p.block(b)) w = static_cast<float>(rng.uniform(-limit, limit));
  };
  const std::size_t k1 = static_cast<std::size_t>(arch.conv1.kernel) * arch.conv1.kernel *
                         arch.input.channels;
  const std::size_t k2 = static_cast<std::size_t>(arch.conv2.kernel) * arch.conv2.kernel *
                         arch.conv1.channels;
  fill(Block::Conv1W, k1, 1.0f);
  fill(Block::Conv2W, k2, 1.0f);
  fill(Block::Fc1W, arch.flat(), 1.0f);
  fill(Block::Fc2W, arch.fc1, 1.0f);
  fill(Block::ValueW, arch.fc2, init.head_scale);
  fill(Block::AdvW, arch.fc2, init.head_scale);
  return p;
}

void forward(const NetworkParams& params, std::span<const float> states, int batch, Workspace& ws) {
  forward_impl(params, params.data().data(), states, batch, ws);
}

void backward(const NetworkParams& params, const Workspace& ws, std::span<const float> dq,
              std::vector<float>& grads) {
  backward_impl(params, params.data().data(), ws, dq, grads);
}

void forward(const NetworkParams& params, std::span<const double> states, int batch, WorkspaceD& ws) {
  ws.weights.assign(params.data().begin(), params.data().end());
  forward_impl(params, ws.weights.data(), states, batch, ws);
}

void backward(const NetworkParams& params, const WorkspaceD& ws, std::span<const double> dq,
              std::vector<double>& grads) {
  if (ws.weights.size() != params.size()) throw Error("double workspace was not filled by forward");
  backward_impl(params, ws.weights.data(), ws, dq, grads);
}

std::vector<float> dueling_aggregate(float value, std::span<const float> advantage) {
  float mean = 0.0f;
  for (float x : advantage) mean += x;
  mean /= static_cast<float>(advantage.size());
  std::vector<float> q(advantage.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = value + (advantage[i] - mean);
  return q;
}

QOutput evaluate(const NetworkParams& params, const dtse::PartialDtse& state) {
  if (!(state.shape() == params.arch().input)) throw Error("state shape does not match network input");
  Workspace ws;
  forward(params, state.values(), 1, ws);
  QOutput out;
  out.value = ws.value[0];
  out.advantage = ws.adv;
  out.q = ws.q;
  return out;
}

Tensor conv2d_forward(const Tensor& input, std::span<const float> weights,
                      std::span<const float> bias, const ConvSpec& spec) {
  if (input.shape.size() != 3) throw Error("conv2d expects a (C, H, W) tensor");
  const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const int oh = conv_out_extent(H, spec.kernel, spec.stride);
  const int ow = conv_out_extent(W, spec.kernel, spec.stride);
  const int K = spec.kernel * spec.kernel * C;
  if (weights.size() != static_cast<std::size_t>(K) * spec.channels ||
      bias.size() != static_cast<std::size_t>(spec.channels)) {
    throw Error("conv2d weight shape mismatch");
  }
  std::vector<float> hwc(input.size());
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < H * W; ++i) hwc[i * C + c] = input.values[c * H * W + i];
  }
  std::vector<float> col;
  im2col(hwc.data(), 1, H, W, C, spec, oh, ow, col);
  MatRM<float> out = cmat(col, oh * ow, K) * cmat(weights.data(), K, spec.channels);
  out.rowwise() += RowVec<float>(bias.data(), spec.channels);
  Tensor result({spec.channels, oh, ow});
  for (int p = 0; p < oh * ow; ++p) {
    for (int c = 0; c < spec.channels; ++c) result.values[c * oh * ow + p] = out(p, c);
  }
  return result;
}

}  // namespace crossflow::nn
