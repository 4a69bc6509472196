#pragma once

// Central finite-difference oracle for the Huber-loss gradient of the
// network. The loss is re-evaluated in double precision with the reference
// network; perturbations of a dense unit only recompute what that unit
// feeds, which keeps a full sweep over every parameter fast.
//
// Each derivative is the Richardson combination (4 D(h/2) - D(h)) / 3 of
// two central differences, which cancels their O(h^2) truncation error;
// without it, the error of a plain step-h difference on gradients far
// below the largest one already exceeds 1e-4 relative.
//
// The analytic side is the engine's double-precision pass, so the check
// measures the backprop algebra rather than float32 rounding; the float
// pass is compared against it separately. ELU has a jump in its second
// derivative at zero, which makes a central difference whose stencil
// straddles a pre-activation sign change only first-order accurate. Those
// parameters are re-differenced with a step shrunk by 10x until no sign
// flips.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "crossflow/nn/network.hpp"
#include "crossflow/nn/ops.hpp"
#include "crossflow/rng.hpp"
#include "reference_net.hpp"

namespace crossflow::oracle {

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t refined = 0;  // parameters whose step had to be shrunk
  double max_rel = 0.0;
  std::size_t worst = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  /// max |float grad - double grad| / max |double grad|
  double float_vs_double = 0.0;
};

/// Random 0/1 presence, speeds on occupied cells, random green rows.
inline std::vector<float> random_states(const dtse::StateShape& shape, int batch, RngStream& rng) {
  std::vector<float> out(static_cast<std::size_t>(shape.size()) * batch, 0.0f);
  const int plane = shape.lanes * shape.cells;
  for (int b = 0; b < batch; ++b) {
    float* s = out.data() + static_cast<std::size_t>(shape.size()) * b;
    for (int i = 0; i < plane; ++i) {
      if (rng.bernoulli(0.3)) {
        s[i] = 1.0f;
        s[plane + i] = static_cast<float>(rng.uniform());
      }
    }
    for (int l = 0; l < shape.lanes; ++l) {
      const float g = rng.bernoulli(0.5) ? 1.0f : 0.0f;
      for (int c = 0; c < shape.cells; ++c) s[2 * plane + l * shape.cells + c] = g;
    }
  }
  return out;
}

/// Relative error |a - n| / max(|a|, |n|, floor); `floor` keeps gradients
/// that are zero up to rounding from dominating the statistic.
inline double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

inline bool sign_flip(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    if ((a[i] > 0.0) != (b[i] > 0.0)) return true;
  }
  return false;
}

inline GradCheckResult gradient_check(std::uint64_t seed, const dtse::StateShape& shape, int actions,
                                      int batch = 4, double h = 1e-3, double floor_fraction = 1e-6) {
  const auto arch = nn::Architecture::for_input(shape, actions);
  RngStream rng(seed);
  nn::InitConfig init;
  init.head_scale = 1.0f;
  auto params = nn::NetworkParams::initialize(arch, rng, init);
  // Nonzero biases so both ELU branches are exercised.
  for (auto b : {nn::Block::Conv1B, nn::Block::Conv2B, nn::Block::Fc1B, nn::Block::Fc2B, nn::Block::ValueB,
                 nn::Block::AdvB}) {
    for (auto& w : params.block(b)) w = static_cast<float>(rng.uniform(-0.2, 0.2));
  }
  const auto states = random_states(shape, batch, rng);
  std::vector<int> act(batch);
  for (auto& a : act) a = static_cast<int>(rng.uniform_int(actions));

  ReferenceNet ref(params);
  std::vector<std::vector<double>> xs(batch);
  std::vector<ReferenceNet::Acts> cached(batch);
  for (int b = 0; b < batch; ++b) {
    xs[b].assign(states.begin() + static_cast<std::ptrdiff_t>(shape.size()) * b,
                 states.begin() + static_cast<std::ptrdiff_t>(shape.size()) * (b + 1));
    cached[b] = ref.forward(xs[b]);
  }
  // Targets sit at fixed offsets from the reference Q so TD errors land on
  // both sides of the Huber kink and away from it.
  const double offsets[] = {0.3, -2.5, 1.7, -0.4, 0.8, -1.6};
  std::vector<double> y(batch);
  for (int b = 0; b < batch; ++b) y[b] = cached[b].q[act[b]] + offsets[b % 6];

  // Analytic gradients from the engine, in double and in float.
  const std::vector<double> states_d(states.begin(), states.end());
  nn::WorkspaceD wsd;
  nn::forward(params, states_d, batch, wsd);
  std::vector<double> dqd(static_cast<std::size_t>(batch) * actions, 0.0);
  for (int b = 0; b < batch; ++b) {
    const double delta = y[b] - wsd.q[b * actions + act[b]];
    const double clipped = std::abs(delta) < 1.0 ? delta : (delta > 0.0 ? 1.0 : -1.0);
    dqd[b * actions + act[b]] = -clipped / batch;
  }
  std::vector<double> grads;
  nn::backward(params, wsd, dqd, grads);

  nn::Workspace ws;
  nn::forward(params, states, batch, ws);
  std::vector<float> dq(static_cast<std::size_t>(batch) * actions, 0.0f);
  for (int b = 0; b < batch; ++b) {
    const float delta = static_cast<float>(y[b]) - ws.q[b * actions + act[b]];
    dq[b * actions + act[b]] = -nn::huber_grad(delta, batch);
  }
  std::vector<float> grads_f;
  nn::backward(params, ws, dq, grads_f);

  auto loss_of = [&](const std::vector<ReferenceNet::Acts>& acts) {
    std::vector<double> d(batch);
    for (int b = 0; b < batch; ++b) d[b] = y[b] - acts[b].q[act[b]];
    return ref_huber(d);
  };

  struct Eval {
    double loss;
    bool flipped;
  };

  // Loss after adding dz to fc1 pre-activation j of every sample.
  const int fc1 = arch.fc1, fc2 = arch.fc2;
  auto fc1_unit_loss = [&](int j, const std::vector<double>& dz) {
    const auto& W2 = ref.block(nn::Block::Fc2W);
    std::vector<ReferenceNet::Acts> acts(batch);
    bool flipped = false;
    for (int b = 0; b < batch; ++b) {
      const auto& c = cached[b];
      auto& a = acts[b];
      const double z = c.z3[j] + dz[b];
      flipped |= (z > 0.0) != (c.z3[j] > 0.0);
      const double da3 = ref_elu(z) - c.a3[j];
      a.a4.resize(fc2);
      for (int k = 0; k < fc2; ++k) a.a4[k] = ref_elu(c.z4[k] + W2[j * fc2 + k] * da3);
      flipped |= sign_flip(a.a4, c.a4);
      ref.heads(a);
    }
    return Eval{loss_of(acts), flipped};
  };
  auto fc2_unit_loss = [&](int j, const std::vector<double>& dz) {
    std::vector<ReferenceNet::Acts> acts(batch);
    bool flipped = false;
    for (int b = 0; b < batch; ++b) {
      const double z = cached[b].z4[j] + dz[b];
      flipped |= (z > 0.0) != (cached[b].z4[j] > 0.0);
      acts[b].a4 = cached[b].a4;
      acts[b].a4[j] = ref_elu(z);
      ref.heads(acts[b]);
    }
    return Eval{loss_of(acts), flipped};
  };

  std::vector<std::vector<double>> flats(batch);
  for (int b = 0; b < batch; ++b) flats[b] = ref.flat(cached[b]);

  // Loss with parameter i of block `blk` shifted by `step`.
  auto shifted = [&](nn::Block blk, std::size_t i, double step) {
    if (blk == nn::Block::Fc1W || blk == nn::Block::Fc1B) {
      const int j = static_cast<int>(blk == nn::Block::Fc1W ? i % fc1 : i);
      const std::size_t in = blk == nn::Block::Fc1W ? i / fc1 : 0;
      std::vector<double> dz(batch);
      for (int b = 0; b < batch; ++b) dz[b] = step * (blk == nn::Block::Fc1W ? flats[b][in] : 1.0);
      return fc1_unit_loss(j, dz);
    }
    if (blk == nn::Block::Fc2W || blk == nn::Block::Fc2B) {
      const int j = static_cast<int>(blk == nn::Block::Fc2W ? i % fc2 : i);
      const std::size_t in = blk == nn::Block::Fc2W ? i / fc2 : 0;
      std::vector<double> dz(batch);
      for (int b = 0; b < batch; ++b) dz[b] = step * (blk == nn::Block::Fc2W ? cached[b].a3[in] : 1.0);
      return fc2_unit_loss(j, dz);
    }
    auto& w = ref.block(blk);
    const double keep = w[i];
    w[i] = keep + step;
    std::vector<ReferenceNet::Acts> acts = cached;
    bool flipped = false;
    for (int b = 0; b < batch; ++b) {
      switch (blk) {
        case nn::Block::Conv1W:
        case nn::Block::Conv1B:
          acts[b] = ref.forward(xs[b]);
          flipped |= sign_flip(acts[b].a1, cached[b].a1);
          break;
        case nn::Block::Conv2W:
        case nn::Block::Conv2B: ref.from_conv2(acts[b]); break;
        default: ref.heads(acts[b]); break;
      }
      flipped |= sign_flip(acts[b].a2, cached[b].a2) || sign_flip(acts[b].a3, cached[b].a3) ||
                 sign_flip(acts[b].a4, cached[b].a4);
    }
    w[i] = keep;
    return Eval{loss_of(acts), flipped};
  };

  GradCheckResult r;
  std::vector<double> numeric(params.size(), 0.0);
  for (int bi = 0; bi < nn::kBlocks; ++bi) {
    const auto blk = static_cast<nn::Block>(bi);
    const std::size_t off = params.block_offset(blk);
    for (std::size_t i = 0; i < params.block_size(blk); ++i) {
      double step = h;
      for (int tries = 0;; ++tries) {
        bool flipped = false;
        auto central = [&](double dx) {
          const Eval plus = shifted(blk, i, dx), minus = shifted(blk, i, -dx);
          flipped |= plus.flipped || minus.flipped;
          return (plus.loss - minus.loss) / (2.0 * dx);
        };
        const double coarse = central(step), fine = central(step / 2.0);
        numeric[off + i] = (4.0 * fine - coarse) / 3.0;
        if (!flipped || tries == 4) break;
        if (tries == 0) ++r.refined;
        step /= 10.0;
      }
    }
  }

  double max_abs = 0.0, max_float_err = 0.0;
  for (double v : numeric) max_abs = std::max(max_abs, std::abs(v));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    max_float_err = std::max(max_float_err, std::abs(static_cast<double>(grads_f[i]) - grads[i]));
  }
  const double floor = floor_fraction * max_abs;
  r.checked = numeric.size();
  r.float_vs_double = max_abs > 0.0 ? max_float_err / max_abs : 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double e = relative_error(grads[i], numeric[i], floor);
    if (e > r.max_rel) {
      r.max_rel = e;
      r.worst = i;
      r.worst_analytic = grads[i];
      r.worst_numeric = numeric[i];
    }
  }
  return r;
}

}  // namespace crossflow::oracle
