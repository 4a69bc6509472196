#include "crossflow/nn/adam.hpp"

#include <cmath>

#include "crossflow/error.hpp"

namespace crossflow::nn {

void AdamState::step(std::span<float> params, std::span<const float> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw Error("adam size mismatch");
  ++t_;
  const double t = static_cast<double>(t_);
  const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(cfg_.beta1), t));
  const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(cfg_.beta2), t));
  const float b1 = cfg_.beta1, b2 = cfg_.beta2;
  const float lr = cfg_.learning_rate, eps = cfg_.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const float g = grads[i];
    m_[i] = b1 * m_[i] + (1.0f - b1) * g;
    v_[i] = b2 * v_[i] + (1.0f - b2) * g * g;
    const float mhat = m_[i] / c1;
    const float vhat = v_[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace crossflow::nn
