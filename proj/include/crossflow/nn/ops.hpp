#pragma once

#include <cmath>
#include <span>

namespace crossflow::nn {

inline float elu(float x) { return x > 0.0f ? x : std::expm1(x); }
/// Derivative at the pre-activation x.
inline float elu_grad(float x) { return x > 0.0f ? 1.0f : std::exp(x); }

/// (1/2M) * sum of (d^2 if |d| < 1 else 2|d| - 1). Throws on an empty batch.
double huber_loss(std::span<const float> deltas);

/// d loss / d delta_m for a batch of size M: (delta if |delta| < 1 else
/// sign(delta)) / M.
float huber_grad(float delta, int batch_size);

/// target <- (1 - tau) * target + tau * online, elementwise.
void polyak_update(std::span<float> target, std::span<const float> online, float tau);

}  // namespace crossflow::nn
