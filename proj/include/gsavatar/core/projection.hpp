// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/camera.hpp"
#include "gsavatar/core/gaussian.hpp"

#include <optional>

namespace gsavatar {

/// Screen-space footprint of one Gaussian. cov2d holds (xx, xy, yy) of the symmetric 2x2
/// covariance in pixels^2, before the rasterizer's anti-aliasing dilation.
template <class S> struct Gaussian2DSplat {
    Vec2<S> mean2d = Vec2<S>::Zero();
    Vec3<S> cov2d  = Vec3<S>(1, 0, 1);
    S depth        = S(0);
    S opacity      = S(0);
    Vec3<S> color  = Vec3<S>::Zero();
};

/// Smallest camera-space depth a perspective projection accepts.
inline constexpr double kNearPlane = 1e-2;

template <class S>
inline Vec3<S>
sym2_from_matrix(const Mat2<S> &m) {
    return Vec3<S>(m(0, 0), S(0.5) * (m(0, 1) + m(1, 0)), m(1, 1));
}

/// Orthographic EWA projection: the depth row/column of W Sigma W^T is dropped and scaled by
/// the constant pixel Jacobian.
template <class S>
inline Gaussian2DSplat<S>
project_orthographic(const Gaussian3D<S> &g, const OrthoCamera<S> &cam) {
    Gaussian2DSplat<S> out;
    const Vec3<S> pc = cam.to_camera(g.position);
    out.mean2d       = cam.to_pixel(g.position);
    out.depth        = pc[2];
    const Mat3<S> camcov = cam.rotation * g.covariance() * cam.rotation.transpose();
    const S s2           = cam.pixels_per_meter * cam.pixels_per_meter;
    out.cov2d   = Vec3<S>(s2 * camcov(0, 0), s2 * camcov(0, 1), s2 * camcov(1, 1));
    out.opacity = g.opacity();
    out.color   = g.color;
    return out;
}

/// Local affine Jacobian of the pinhole map at camera-space point t.
template <class S>
inline Eigen::Matrix<S, 2, 3>
perspective_jacobian(const Vec3<S> &t, const PerspectiveCamera<S> &cam) {
    Eigen::Matrix<S, 2, 3> J;
    const S iz = S(1) / t[2];
    J << cam.fx * iz, 0, -cam.fx * t[0] * iz * iz, 0, cam.fy * iz, -cam.fy * t[1] * iz * iz;
    return J;
}

/// Projects a world-space mean and covariance. Returns nullopt when behind the near plane.
template <class S>
inline std::optional<Gaussian2DSplat<S>>
project_mean_cov_perspective(const Vec3<S> &position, const Mat3<S> &cov,
                             const PerspectiveCamera<S> &cam) {
    const Vec3<S> t = cam.to_camera(position);
    if (!(t[2] > S(kNearPlane))) {
        return std::nullopt;
    }
    Gaussian2DSplat<S> out;
    out.mean2d = Vec2<S>(cam.fx * t[0] / t[2] + cam.cx, cam.fy * t[1] / t[2] + cam.cy);
    out.depth  = t[2];
    const Eigen::Matrix<S, 2, 3> A = perspective_jacobian(t, cam) * cam.rotation;
    out.cov2d                      = sym2_from_matrix<S>(A * cov * A.transpose());
    return out;
}

template <class S>
inline std::optional<Gaussian2DSplat<S>>
project_perspective(const Gaussian3D<S> &g, const PerspectiveCamera<S> &cam) {
    auto out = project_mean_cov_perspective(g.position, g.covariance(), cam);
    if (out) {
        out->opacity = g.opacity();
        out->color   = g.color;
    }
    return out;
}

/// Adjoint of project_mean_cov_perspective. `d_cov2d` follows the (xx, xy, yy) convention with
/// xy treated as a single scalar parameter. Accumulates into d_position and d_cov.
template <class S>
inline void
project_mean_cov_perspective_backward(const Vec3<S> &position, const Mat3<S> &cov,
                                      const PerspectiveCamera<S> &cam, const Vec2<S> &d_mean2d,
                                      const Vec3<S> &d_cov2d, Vec3<S> &d_position,
                                      Mat3<S> &d_cov) {
    const Vec3<S> t = cam.to_camera(position);
    const S iz      = S(1) / t[2];
    const Eigen::Matrix<S, 2, 3> J = perspective_jacobian(t, cam);
    const Eigen::Matrix<S, 2, 3> A = J * cam.rotation;

    Mat2<S> G;
    G << d_cov2d[0], S(0.5) * d_cov2d[1], S(0.5) * d_cov2d[1], d_cov2d[2];

    d_cov += A.transpose() * G * A;

    // cov2d = J T J^T with T the camera-space covariance
    const Mat3<S> T                 = cam.rotation * cov * cam.rotation.transpose();
    const Eigen::Matrix<S, 2, 3> dJ = S(2) * G * J * T;

    Vec3<S> dt = J.transpose() * d_mean2d;
    const S iz2 = iz * iz, iz3 = iz2 * iz;
    dt[0] += -cam.fx * iz2 * dJ(0, 2);
    dt[1] += -cam.fy * iz2 * dJ(1, 2);
    dt[2] += -cam.fx * iz2 * dJ(0, 0) + S(2) * cam.fx * t[0] * iz3 * dJ(0, 2) -
             cam.fy * iz2 * dJ(1, 1) + S(2) * cam.fy * t[1] * iz3 * dJ(1, 2);
    d_position += cam.rotation.transpose() * dt;
}

} // namespace gsavatar
