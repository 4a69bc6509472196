#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace crossflow::nn {

struct AdamConfig {
  float learning_rate = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

/// Bias-corrected Adam over a flat parameter vector.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg = {}) : cfg_(cfg), m_(n, 0.0f), v_(n, 0.0f) {}

  void step(std::span<float> params, std::span<const float> grads);

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<float>& first_moment() const { return m_; }
  const std::vector<float>& second_moment() const { return v_; }

 private:
  AdamConfig cfg_{};
  std::vector<float> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace crossflow::nn
