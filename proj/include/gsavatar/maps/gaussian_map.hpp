// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/gaussian.hpp"
#include "gsavatar/maps/map_image.hpp"

#include <vector>

namespace gsavatar {

/// Channel layout of a Gaussian map pixel.
namespace gmap {
inline constexpr int kOffset   = 0; // 3
inline constexpr int kRotation = 3; // 4, quaternion wxyz
inline constexpr int kLogScale = 7; // 3
inline constexpr int kOpacity  = 10;
inline constexpr int kColor    = 11; // 3
inline constexpr int kChannels = 14;
} // namespace gmap

/// Front and back Gaussian maps stored compactly, one row per valid template sample.
template <class S> struct GaussianMaps {
    using Rows = Eigen::Matrix<S, Eigen::Dynamic, gmap::kChannels, Eigen::RowMajor>;
    Rows values;

    int
    size() const {
        return static_cast<int>(values.rows());
    }

    Vec3<S>
    offset(int i) const {
        return values.row(i).template segment<3>(gmap::kOffset).transpose();
    }

    MapImage<float>
    dense(const CanonicalTemplate &ct, MapSide side) const {
        GSAVATAR_CHECK(size() == ct.num_valid(), ContractError,
                       "Gaussian map sample count differs from template");
        return scatter_view<float>(ct, side, [&](int i, int c) { return values(i, c); },
                                   gmap::kChannels);
    }
};

/// Color channels are clamped to [0, 1] at extraction; gradients are masked where clamped.
template <class S>
inline S
clamp_color(S c) {
    return std::min(std::max(c, S(0)), S(1));
}

/// One Gaussian per valid sample (front row-major, then back): position = base + offset. The
/// skinning weights of Gaussian i are `ct.weights(i)`.
template <class S>
inline std::vector<Gaussian3D<S>>
extract_gaussians(const CanonicalTemplate &ct, const GaussianMaps<S> &maps) {
    GSAVATAR_CHECK(maps.size() == ct.num_valid(), ContractError,
                   "Gaussian map sample count differs from template");
    std::vector<Gaussian3D<S>> out(maps.size());
    for (int i = 0; i < maps.size(); ++i) {
        const auto row  = maps.values.row(i);
        Gaussian3D<S> &g = out[i];
        g.position      = ct.base_position(i).template cast<S>() +
                     row.template segment<3>(gmap::kOffset).transpose();
        g.rotation      = row.template segment<4>(gmap::kRotation).transpose();
        g.log_scale     = row.template segment<3>(gmap::kLogScale).transpose();
        g.opacity_logit = row(gmap::kOpacity);
        for (int c = 0; c < 3; ++c) {
            g.color[c] = clamp_color(row(gmap::kColor + c));
        }
    }
    return out;
}

} // namespace gsavatar
