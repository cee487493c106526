#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fgb/common.hpp"
#include "fgb/nn/model.hpp"

namespace fgb::nn {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Standard Adam with bias correction over the flat parameter vector.
inline void adam_step(ModelState& state, const std::vector<double>& grads, double lr) {
    check(grads.size() == state.params.size(), "adam_step: gradient size mismatch");
    for (double g : grads) check(std::isfinite(g), "adam_step: non-finite gradient");

    state.adam_step += 1;
    const double t = static_cast<double>(state.adam_step);
    const double m_corr = 1.0 - std::pow(kAdamBeta1, t);
    const double v_corr = 1.0 - std::pow(kAdamBeta2, t);
    for (std::size_t i = 0; i < grads.size(); ++i) {
        double m = state.adam_m[i] = kAdamBeta1 * state.adam_m[i] + (1.0 - kAdamBeta1) * grads[i];
        double v = state.adam_v[i] =
            kAdamBeta2 * state.adam_v[i] + (1.0 - kAdamBeta2) * grads[i] * grads[i];
        state.params[i] -= lr * (m / m_corr) / (std::sqrt(v / v_corr) + kAdamEps);
        check(std::isfinite(state.params[i]), "adam_step: parameter diverged");
    }
}

// One-cycle schedule: linear ramp 0 -> max_lr over the first 30% of steps,
// then linear decay back to 0 by step total_steps. The peak value is exactly
// max_lr at the boundary step.
inline double one_cycle_lr(std::uint64_t step, std::uint64_t total_steps, double max_lr) {
    check(total_steps >= 1, "one_cycle_lr: total_steps must be >= 1");
    check(step < total_steps, "one_cycle_lr: step out of range");
    check(max_lr > 0.0, "one_cycle_lr: max_lr must be > 0");
    const std::uint64_t warm = (3 * total_steps) / 10;
    if (step < warm)
        return max_lr * (static_cast<double>(step) / static_cast<double>(warm));
    return max_lr * (static_cast<double>(total_steps - step) /
                     static_cast<double>(total_steps - warm));
}

}  // namespace fgb::nn
