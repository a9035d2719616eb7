// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/error.hpp"
#include "gsavatar/core/parallel.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace gsavatar {

struct AdamConfig {
    double learning_rate = 5e-4;
    double beta1         = 0.9;
    double beta2         = 0.999;
    double epsilon       = 1e-8;
};

template <class S> struct AdamState {
    std::vector<S> m, v;
    long step = 0;
};

/// One bias-corrected Adam update. Returns false, leaving params and state untouched, when any
/// gradient entry is non-finite. `lr_scale`, if non-empty, multiplies the step of each parameter.
template <class S>
inline bool
adam_step(std::vector<S> &params, const std::vector<S> &grads, AdamState<S> &state, const AdamConfig &cfg,
          std::span<const S> lr_scale = {}) {
    GSAVATAR_CHECK(params.size() == grads.size(), ContractError, "parameter/gradient size mismatch");
    GSAVATAR_CHECK(lr_scale.empty() || lr_scale.size() == params.size(), ContractError,
                   "learning-rate scale size mismatch");
    GSAVATAR_CHECK(cfg.learning_rate > 0, ConfigError, "learning rate must be positive");
    for (const S g : grads) {
        if (!std::isfinite(g)) {
            return false;
        }
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), S(0));
        state.v.assign(params.size(), S(0));
        state.step = 0;
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
    const S b1 = S(cfg.beta1), b2 = S(cfg.beta2);
    const S step_size = S(cfg.learning_rate / bc1);
    const S inv_bc2   = S(1.0 / std::sqrt(bc2));
    const S eps       = S(cfg.epsilon);
    parallel_for_blocks(params.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const S g  = grads[i];
            state.m[i] = b1 * state.m[i] + (S(1) - b1) * g;
            state.v[i] = b2 * state.v[i] + (S(1) - b2) * g * g;
            const S step = step_size * state.m[i] / (std::sqrt(state.v[i]) * inv_bc2 + eps);
            params[i] -= lr_scale.empty() ? step : step * lr_scale[i];
        }
    });
    return true;
}

} // namespace gsavatar
