// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/parallel.hpp"
#include "gsavatar/maps/gaussian_map.hpp"

#include <cmath>
#include <type_traits>
#include <vector>

namespace gsavatar {

/// Per-sample linear map from the pose conditioning to Gaussian-map attributes:
///
///   attr_i = base_i + C_i·β̃ + [0 … 0, V_i·v̄]
///
/// where β̃ is the (normalized) PCA coefficient vector, C_i is 14×N, and V_i is a 3×3 color
/// coupling on the mean view direction v̄. All entries live in one flat parameter vector:
/// [base: M×14][coupling: M×14×N][view: M×3×3], each block row-major per sample.
template <class S> struct LinearGaussianPredictor {
    int num_samples    = 0;
    int num_components = 0;
    std::vector<S> params;

    LinearGaussianPredictor() = default;
    LinearGaussianPredictor(int samples, int components)
        : num_samples(samples), num_components(components),
          params(static_cast<std::size_t>(samples) * per_sample(components), S(0)) {
        GSAVATAR_CHECK(samples > 0 && components >= 0, ContractError, "invalid predictor shape");
    }

    static std::size_t
    per_sample(int components) {
        return gmap::kChannels + static_cast<std::size_t>(gmap::kChannels) * components + 9;
    }

    std::size_t
    size() const {
        return params.size();
    }

    std::size_t
    base_offset(int i) const {
        return static_cast<std::size_t>(i) * gmap::kChannels;
    }
    std::size_t
    coupling_offset(int i) const {
        return static_cast<std::size_t>(num_samples) * gmap::kChannels +
               static_cast<std::size_t>(i) * gmap::kChannels * num_components;
    }
    std::size_t
    view_offset(int i) const {
        return static_cast<std::size_t>(num_samples) * gmap::kChannels * (1 + num_components) +
               static_cast<std::size_t>(i) * 9;
    }

    S *
    base(int i) {
        return params.data() + base_offset(i);
    }
    const S *
    base(int i) const {
        return params.data() + base_offset(i);
    }
};

/// Normalizes PCA coefficients by their training deviations (zero where σ = 0).
template <class S>
inline Eigen::Matrix<S, Eigen::Dynamic, 1>
normalize_coefficients(const Eigen::VectorXd &beta, const Eigen::VectorXd &sigmas) {
    GSAVATAR_CHECK(beta.size() == sigmas.size(), ContractError, "coefficient length mismatch");
    Eigen::Matrix<S, Eigen::Dynamic, 1> out(beta.size());
    for (Eigen::Index i = 0; i < beta.size(); ++i) {
        out[i] = sigmas[i] > 0 ? static_cast<S>(beta[i] / sigmas[i]) : S(0);
    }
    return out;
}

template <class S>
inline GaussianMaps<S>
predict_maps(const LinearGaussianPredictor<S> &pred,
             const std::type_identity_t<Eigen::Matrix<S, Eigen::Dynamic, 1>> &beta,
             const std::type_identity_t<Vec3<S>> &view_mean) {
    GSAVATAR_CHECK(beta.size() == pred.num_components, ContractError,
                   "conditioning vector has length " + std::to_string(beta.size()) +
                       ", predictor expects " + std::to_string(pred.num_components));
    const int N = pred.num_components;
    GaussianMaps<S> out;
    out.values.resize(pred.num_samples, gmap::kChannels);
    parallel_for_blocks(pred.num_samples, [&](std::size_t b, std::size_t e) {
        for (std::size_t ii = b; ii < e; ++ii) {
            const int i   = static_cast<int>(ii);
            S *row        = out.values.row(i).data();
            const S *base = pred.base(i);
            const S *C    = pred.params.data() + pred.coupling_offset(i);
            for (int c = 0; c < gmap::kChannels; ++c) {
                S acc = base[c];
                for (int k = 0; k < N; ++k) {
                    acc += C[c * N + k] * beta[k];
                }
                row[c] = acc;
            }
            const S *V = pred.params.data() + pred.view_offset(i);
            for (int c = 0; c < 3; ++c) {
                row[gmap::kColor + c] += V[3 * c] * view_mean[0] + V[3 * c + 1] * view_mean[1] +
                                         V[3 * c + 2] * view_mean[2];
            }
        }
    });
    return out;
}

/// Accumulates dL/dparams given dL/dmaps.
template <class S>
inline void
predict_maps_backward(const LinearGaussianPredictor<S> &pred,
                      const std::type_identity_t<Eigen::Matrix<S, Eigen::Dynamic, 1>> &beta,
                      const std::type_identity_t<Vec3<S>> &view_mean,
                      const typename GaussianMaps<S>::Rows &d_maps, std::vector<S> &grad) {
    GSAVATAR_CHECK(d_maps.rows() == pred.num_samples && grad.size() == pred.size(), ContractError,
                   "predictor gradient shape mismatch");
    const int N = pred.num_components;
    parallel_for_blocks(pred.num_samples, [&](std::size_t b, std::size_t e) {
        for (std::size_t ii = b; ii < e; ++ii) {
            const int i  = static_cast<int>(ii);
            const S *d   = d_maps.row(i).data();
            S *gb        = grad.data() + pred.base_offset(i);
            S *gC        = grad.data() + pred.coupling_offset(i);
            S *gV        = grad.data() + pred.view_offset(i);
            for (int c = 0; c < gmap::kChannels; ++c) {
                gb[c] += d[c];
                if (d[c] != S(0)) {
                    for (int k = 0; k < N; ++k) {
                        gC[c * N + k] += d[c] * beta[k];
                    }
                }
            }
            for (int c = 0; c < 3; ++c) {
                for (int k = 0; k < 3; ++k) {
                    gV[3 * c + k] += d[gmap::kColor + c] * view_mean[k];
                }
            }
        }
    });
}

/// Initial base maps: zero offsets, identity rotations, opacity 0.5, mid-gray color, and
/// scales matching the map pixel footprint. Along the viewing axis the scale grows where the
/// surface is steep in the map, so side regions sampled sparsely by both views stay covered.
template <class S>
inline void
initialize_base_maps(LinearGaussianPredictor<S> &pred, const CanonicalTemplate &ct) {
    GSAVATAR_CHECK(pred.num_samples == ct.num_valid(), ContractError,
                   "predictor sample count differs from template");
    const double p = ct.pixel_size();
    for (int i = 0; i < pred.num_samples; ++i) {
        S *b = pred.base(i);
        std::fill(b, b + gmap::kChannels, S(0));
        b[gmap::kRotation] = S(1);
        const Vec3d n      = ct.base_normal(i);
        const double slope = 0.5 * (std::abs(n.x()) + std::abs(n.y())) / std::max(std::abs(n.z()), 0.05);
        const double sz    = std::min(std::max(p, p * slope), 12.0 * p);
        b[gmap::kLogScale + 0] = static_cast<S>(std::log(p));
        b[gmap::kLogScale + 1] = static_cast<S>(std::log(p));
        b[gmap::kLogScale + 2] = static_cast<S>(std::log(sz));
        b[gmap::kOpacity]      = S(0);
        for (int c = 0; c < 3; ++c) {
            b[gmap::kColor + c] = S(0.5);
        }
    }
}

} // namespace gsavatar
