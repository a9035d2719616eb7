// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/camera.hpp"
#include "gsavatar/maps/position_maps.hpp"

namespace gsavatar {

/// Per valid sample: unit vector from the posed surface point (global transform applied)
/// toward the camera center, rotated back into the canonical frame by the inverse global
/// rotation. `posed` must come from render_position_maps for the same pose.
inline std::vector<Vec3d>
build_view_direction_map(const PositionMaps &posed, const Pose &pose,
                         const PerspectiveCamera<double> &cam) {
    const RigidTransform<double> G = pose.global_transform();
    const Vec3d eye                = cam.position();
    std::vector<Vec3d> dirs(posed.points.size());
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        const Vec3d d = eye - G.apply(posed.points[i]);
        const double n = d.norm();
        GSAVATAR_CHECK(n > 0, DegenerateError, "camera center coincides with a surface point");
        dirs[i] = G.rotation.transpose() * (d / n);
    }
    return dirs;
}

inline std::vector<Vec3d>
build_view_direction_map(const CanonicalTemplate &ct, const Skeleton &skel, const Pose &pose,
                         const PerspectiveCamera<double> &cam) {
    return build_view_direction_map(render_position_maps(ct, skel, pose), pose, cam);
}

/// Mean of the per-sample view directions (the predictor's color-coupling input).
inline Vec3d
mean_view_direction(const std::vector<Vec3d> &dirs) {
    Vec3d m = Vec3d::Zero();
    for (const auto &d : dirs) {
        m += d;
    }
    return dirs.empty() ? m : Vec3d(m / static_cast<double>(dirs.size()));
}

} // namespace gsavatar
