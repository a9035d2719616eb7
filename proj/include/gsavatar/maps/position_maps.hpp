// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/parallel.hpp"
#include "gsavatar/kinematics/lbs.hpp"
#include "gsavatar/kinematics/skeleton.hpp"
#include "gsavatar/maps/map_image.hpp"

namespace gsavatar {

/// Posed surface coordinates of every valid template sample (front then back).
struct PositionMaps {
    std::vector<Vec3d> points;

    /// 3M-vector [x0 y0 z0 x1 ...] in sample order.
    Eigen::VectorXd
    flatten() const {
        Eigen::VectorXd x(3 * points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            x.segment<3>(3 * i) = points[i];
        }
        return x;
    }

    static PositionMaps
    unflatten(const Eigen::VectorXd &x) {
        GSAVATAR_CHECK(x.size() % 3 == 0, ContractError, "flattened positions not a multiple of 3");
        PositionMaps m;
        m.points.resize(x.size() / 3);
        for (std::size_t i = 0; i < m.points.size(); ++i) {
            m.points[i] = x.segment<3>(3 * i);
        }
        return m;
    }

    MapImage<double>
    dense(const CanonicalTemplate &ct, MapSide side) const {
        GSAVATAR_CHECK(static_cast<int>(points.size()) == ct.num_valid(), ContractError,
                       "position map sample count differs from template");
        return scatter_view<double>(ct, side,
                                    [&](int i, int c) { return points[i][c]; }, 3);
    }

    /// Gathers a front/back pair of dense maps; nonzero data outside the mask is a mask mismatch.
    static PositionMaps
    from_dense(const CanonicalTemplate &ct, const MapImage<double> &front, const MapImage<double> &back) {
        PositionMaps m;
        m.points.reserve(ct.num_valid());
        for (int s = 0; s < 2; ++s) {
            const TemplateView &v  = ct.views[s];
            const MapImage<double> &img = s == 0 ? front : back;
            GSAVATAR_CHECK(img.height == v.height() && img.width == v.width() && img.channels == 3,
                           ContractError, "position map shape differs from template");
            for (int p = 0; p < v.height() * v.width(); ++p) {
                const double *px = img.pixel(p);
                if (v.mask[p]) {
                    m.points.push_back(Vec3d(px[0], px[1], px[2]));
                } else {
                    GSAVATAR_CHECK(px[0] == 0 && px[1] == 0 && px[2] == 0, ContractError,
                                   "position map has data outside the template mask");
                }
            }
        }
        return m;
    }
};

/// Skins every base sample with its interpolated weights; the global transform is excluded.
inline PositionMaps
render_position_maps(const CanonicalTemplate &ct, std::span<const RigidTransform<double>> transforms) {
    GSAVATAR_CHECK(static_cast<int>(transforms.size()) == ct.num_joints(), ContractError,
                   "transform count differs from template joint count");
    PositionMaps m;
    m.points.resize(ct.num_valid());
    parallel_for_blocks(m.points.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const int s = static_cast<int>(i);
            m.points[i] = lbs_point(ct.base_position(s), ct.weights(s), transforms);
        }
    });
    return m;
}

inline PositionMaps
render_position_maps(const CanonicalTemplate &ct, const Skeleton &skel, const Pose &pose) {
    const auto T = forward_kinematics(skel, pose);
    return render_position_maps(ct, std::span<const RigidTransform<double>>(T));
}

} // namespace gsavatar
