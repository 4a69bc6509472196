#include "crossflow/nn/ops.hpp"

#include "crossflow/error.hpp"

namespace crossflow::nn {

double huber_loss(std::span<const float> deltas) {
  if (deltas.empty()) throw Error("huber loss of an empty batch");
  double sum = 0.0;
  for (float d : deltas) {
    const double a = std::abs(static_cast<double>(d));
    sum += a < 1.0 ? a * a : 2.0 * a - 1.0;
  }
  return sum / (2.0 * static_cast<double>(deltas.size()));
}

float huber_grad(float delta, int batch_size) {
  const float clipped = std::abs(delta) < 1.0f ? delta : (delta > 0.0f ? 1.0f : -1.0f);
  return clipped / static_cast<float>(batch_size);
}

void polyak_update(std::span<float> target, std::span<const float> online, float tau) {
  if (target.size() != online.size()) throw Error("polyak update size mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    target[i] = (1.0f - tau) * target[i] + tau * online[i];
  }
}

}  // namespace crossflow::nn
