// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/error.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace gsavatar {

template <class S> using Vec2 = Eigen::Matrix<S, 2, 1>;
template <class S> using Vec3 = Eigen::Matrix<S, 3, 1>;
template <class S> using Vec4 = Eigen::Matrix<S, 4, 1>;
template <class S> using Mat2 = Eigen::Matrix<S, 2, 2>;
template <class S> using Mat3 = Eigen::Matrix<S, 3, 3>;
template <class S> using Mat4 = Eigen::Matrix<S, 4, 4>;

using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;

template <class S>
inline S
sigmoid(S x) {
    return S(1) / (S(1) + std::exp(-x));
}

/// Rotation matrix of a unit quaternion stored as (w, x, y, z).
template <class S>
inline Mat3<S>
quat_to_matrix(const Vec4<S> &q) {
    const S w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3<S> R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

template <class S>
inline Vec4<S>
normalize_quat(const Vec4<S> &q) {
    const S n = q.norm();
    GSAVATAR_CHECK(n > S(0) && std::isfinite(static_cast<double>(n)), DegenerateError,
                   "quaternion has zero or non-finite norm");
    return q / n;
}

/// Hamilton product a*b, both (w, x, y, z).
template <class S>
inline Vec4<S>
quat_multiply(const Vec4<S> &a, const Vec4<S> &b) {
    return Vec4<S>(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                   a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                   a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                   a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

/// Unit quaternion (w >= 0) of a proper rotation matrix.
template <class S>
inline Vec4<S>
matrix_to_quat(const Mat3<S> &R) {
    Eigen::Quaternion<S> q(R);
    q.normalize();
    Vec4<S> out(q.w(), q.x(), q.y(), q.z());
    if (out[0] < S(0)) {
        out = -out;
    }
    return out;
}

template <class S>
inline Mat3<S>
axis_angle_to_matrix(const Vec3<S> &aa) {
    const S angle = aa.norm();
    if (angle < S(1e-12)) {
        Mat3<S> K;
        K << 0, -aa[2], aa[1], aa[2], 0, -aa[0], -aa[1], aa[0], 0;
        return Mat3<S>::Identity() + K;
    }
    return Eigen::AngleAxis<S>(angle, aa / angle).toRotationMatrix();
}

/// Rotation factor of the polar decomposition A = R * P. Throws when A is (near) singular.
template <class S>
inline Mat3<S>
polar_rotation(const Mat3<S> &A) {
    const S det = A.determinant();
    GSAVATAR_CHECK(std::abs(static_cast<double>(det)) > 1e-12, DegenerateError,
                   "blended skinning matrix is singular");
    // Scaled Newton iteration; converges quadratically for the near-rotations LBS produces.
    Mat3<S> R = A;
    for (int it = 0; it < 30; ++it) {
        const Mat3<S> Rinv_t = R.inverse().transpose();
        const S gamma        = std::sqrt(Rinv_t.norm() / R.norm());
        const Mat3<S> next   = S(0.5) * (gamma * R + Rinv_t / gamma);
        const S delta        = (next - R).cwiseAbs().maxCoeff();
        R                    = next;
        if (delta < S(std::is_same_v<S, float> ? 1e-6 : 1e-15)) {
            break;
        }
    }
    GSAVATAR_CHECK(R.determinant() > S(0), DegenerateError,
                   "blended skinning matrix has negative determinant");
    return R;
}

} // namespace gsavatar
