// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/math.hpp"

namespace gsavatar {

// Image conventions: x to the right, y down, camera looks along +z. Pixel (i, j) has its
// center at (i + 0.5, j + 0.5).

/// Orthographic camera. `center` is the world point that lands on the image center.
template <class S> struct OrthoCamera {
    Mat3<S> rotation = Mat3<S>::Identity(); // world -> camera
    Vec3<S> center   = Vec3<S>::Zero();
    S pixels_per_meter = S(1);
    int width          = 1;
    int height         = 1;

    Vec3<S>
    to_camera(const Vec3<S> &p) const {
        return rotation * (p - center);
    }

    Vec2<S>
    to_pixel(const Vec3<S> &p) const {
        const Vec3<S> c = to_camera(p);
        return Vec2<S>(pixels_per_meter * c[0] + S(0.5) * width,
                       pixels_per_meter * c[1] + S(0.5) * height);
    }

    /// World position of a pixel-space point on the camera plane through `center`.
    Vec3<S>
    from_pixel(S u, S v, S depth = S(0)) const {
        const Vec3<S> c((u - S(0.5) * width) / pixels_per_meter,
                        (v - S(0.5) * height) / pixels_per_meter, depth);
        return rotation.transpose() * c + center;
    }

    /// Unit vector the camera looks along, in world space.
    Vec3<S>
    forward() const {
        return rotation.row(2).transpose();
    }
};

/// Pinhole camera with world -> camera extrinsics x_c = R x + t.
template <class S> struct PerspectiveCamera {
    Mat3<S> rotation    = Mat3<S>::Identity();
    Vec3<S> translation = Vec3<S>::Zero();
    S fx = S(1), fy = S(1), cx = S(0.5), cy = S(0.5);
    int width  = 1;
    int height = 1;

    Vec3<S>
    to_camera(const Vec3<S> &p) const {
        return rotation * p + translation;
    }

    Vec3<S>
    position() const {
        return -(rotation.transpose() * translation);
    }

    template <class T>
    PerspectiveCamera<T>
    cast() const {
        PerspectiveCamera<T> c;
        c.rotation    = rotation.template cast<T>();
        c.translation = translation.template cast<T>();
        c.fx          = static_cast<T>(fx);
        c.fy          = static_cast<T>(fy);
        c.cx          = static_cast<T>(cx);
        c.cy          = static_cast<T>(cy);
        c.width       = width;
        c.height      = height;
        return c;
    }

    /// Camera at `eye` looking at `target` with world `up` roughly pointing to -y in the image.
    static PerspectiveCamera
    look_at(const Vec3<S> &eye, const Vec3<S> &target, const Vec3<S> &up, S focal, int w, int h) {
        const Vec3<S> z = (target - eye).normalized();
        const Vec3<S> x = z.cross(up).normalized();
        const Vec3<S> y = z.cross(x);
        PerspectiveCamera cam;
        cam.rotation.row(0) = x.transpose();
        cam.rotation.row(1) = y.transpose();
        cam.rotation.row(2) = z.transpose();
        cam.translation     = -(cam.rotation * eye);
        cam.fx = cam.fy = focal;
        cam.cx          = S(0.5) * w;
        cam.cy          = S(0.5) * h;
        cam.width       = w;
        cam.height      = h;
        return cam;
    }
};

} // namespace gsavatar
