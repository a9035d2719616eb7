// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/camera.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace gsavatar::synthetic {

struct CameraRingSpec {
    int count       = 8;
    double radius   = 3.0;
    double height   = 1.0;  // eye height
    Vec3d target    = Vec3d(0.0, 0.85, 0.0);
    double focal    = 300.0;
    int width       = 256;
    int height_px   = 256;
};

/// `count` cameras evenly spaced on a horizontal circle around the y axis, all looking at
/// `target`. Camera 0 sits on +z, in front of the body; angles increase counter-clockwise seen
/// from above.
inline std::vector<PerspectiveCamera<double>>
make_camera_ring(const CameraRingSpec &spec) {
    std::vector<PerspectiveCamera<double>> cams;
    for (int k = 0; k < spec.count; ++k) {
        const double a = 2.0 * std::numbers::pi * k / spec.count;
        const Vec3d eye(spec.radius * std::sin(a), spec.height, spec.radius * std::cos(a));
        cams.push_back(PerspectiveCamera<double>::look_at(eye, spec.target, Vec3d::UnitY(), spec.focal, spec.width,
                                                           spec.height_px));
    }
    return cams;
}

} // namespace gsavatar::synthetic
