// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/gaussian.hpp"

#include <span>

namespace gsavatar {

/// Linear blend of joint transforms: sum_k w_k [R_k | t_k].
struct BlendedTransform {
    Mat3d linear      = Mat3d::Zero();
    Vec3d translation = Vec3d::Zero();

    Vec3d
    apply(const Vec3d &x) const {
        return linear * x + translation;
    }
};

template <class W>
inline BlendedTransform
blend_transforms(std::span<const W> weights, std::span<const RigidTransform<double>> transforms) {
    GSAVATAR_CHECK(weights.size() == transforms.size(), ContractError,
                   "weight vector length differs from joint count");
    BlendedTransform b;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const double w = static_cast<double>(weights[k]);
        if (w == 0.0) {
            continue;
        }
        b.linear += w * transforms[k].rotation;
        b.translation += w * transforms[k].translation;
    }
    return b;
}

template <class W>
inline Vec3d
lbs_point(const Vec3d &x, std::span<const W> weights,
          std::span<const RigidTransform<double>> transforms) {
    return blend_transforms(weights, transforms).apply(x);
}

/// Skins a Gaussian: the mean goes through the full blended transform, the covariance is
/// rotated by the polar rotation of the blended linear part, so scales are preserved.
template <class S, class W>
inline Gaussian3D<S>
lbs_gaussian(const Gaussian3D<S> &g, std::span<const W> weights,
             std::span<const RigidTransform<double>> transforms) {
    const BlendedTransform b = blend_transforms(weights, transforms);
    const Mat3d R            = polar_rotation(b.linear);
    Gaussian3D<S> out        = g;
    out.position             = b.apply(g.position.template cast<double>()).template cast<S>();
    const Vec4<double> q =
        quat_multiply(matrix_to_quat(R), normalize_quat(g.rotation.template cast<double>()));
    out.rotation = q.normalized().template cast<S>();
    return out;
}

} // namespace gsavatar
