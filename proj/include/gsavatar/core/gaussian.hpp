// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/math.hpp"

#include <cmath>

namespace gsavatar {

/// One 3D Gaussian splat. Opacity is stored as a logit and the covariance as a rotation
/// quaternion (w, x, y, z) plus per-axis log standard deviations, so every parameter vector
/// is a valid Gaussian.
template <class S> struct Gaussian3D {
    Vec3<S> position  = Vec3<S>::Zero();
    Vec4<S> rotation  = Vec4<S>(1, 0, 0, 0);
    Vec3<S> log_scale = Vec3<S>::Zero();
    S opacity_logit   = S(0);
    Vec3<S> color     = Vec3<S>::Constant(S(0.5));

    S
    opacity() const {
        return sigmoid(opacity_logit);
    }

    Mat3<S> covariance() const;

    template <class T>
    Gaussian3D<T>
    cast() const {
        Gaussian3D<T> g;
        g.position      = position.template cast<T>();
        g.rotation      = rotation.template cast<T>();
        g.log_scale     = log_scale.template cast<T>();
        g.opacity_logit = static_cast<T>(opacity_logit);
        g.color         = color.template cast<T>();
        return g;
    }
};

/// x -> R x + t
template <class S> struct RigidTransform {
    Mat3<S> rotation    = Mat3<S>::Identity();
    Vec3<S> translation = Vec3<S>::Zero();

    static RigidTransform
    identity() {
        return {};
    }

    Vec3<S>
    apply(const Vec3<S> &p) const {
        return rotation * p + translation;
    }

    /// (*this) after `first`: x -> this(first(x)).
    RigidTransform
    compose(const RigidTransform &first) const {
        return {rotation * first.rotation, rotation * first.translation + translation};
    }

    RigidTransform
    inverse() const {
        const Mat3<S> rt = rotation.transpose();
        return {rt, -(rt * translation)};
    }

    bool
    is_valid(double tol = 1e-6) const {
        const double ortho =
            (rotation.transpose() * rotation - Mat3<S>::Identity()).cwiseAbs().maxCoeff();
        return ortho <= tol && std::abs(static_cast<double>(rotation.determinant()) - 1.0) <= tol;
    }
};

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)). The quaternion is normalized here.
template <class S>
inline Mat3<S>
build_covariance(const Vec4<S> &rotation, const Vec3<S> &log_scale) {
    const Mat3<S> R = quat_to_matrix(normalize_quat(rotation));
    const Mat3<S> M = R * log_scale.array().exp().matrix().asDiagonal();
    return M * M.transpose();
}

template <class S>
Mat3<S>
Gaussian3D<S>::covariance() const {
    return build_covariance(rotation, log_scale);
}

/// Unnormalized density exp(-1/2 (x-mu)^T Sigma^-1 (x-mu)).
template <class S>
inline S
eval_pdf(const Gaussian3D<S> &g, const Vec3<S> &x) {
    const Mat3<S> cov = g.covariance();
    Eigen::LDLT<Mat3<S>> ldlt(cov);
    const S max_diag = cov.diagonal().cwiseAbs().maxCoeff();
    GSAVATAR_CHECK(ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                       ldlt.vectorD().minCoeff() > S(1e-14) * std::max(max_diag, S(1e-300)),
                   DegenerateError, "degenerate covariance in eval_pdf");
    const Vec3<S> d = x - g.position;
    return std::exp(S(-0.5) * d.dot(ldlt.solve(d)));
}

/// Rigidly moves a Gaussian. The covariance update R Sigma R^T is realized by composing the
/// rotation into the quaternion; scales, opacity and color are untouched.
template <class S>
inline Gaussian3D<S>
transform_gaussian(const Gaussian3D<S> &g, const RigidTransform<S> &T) {
    Gaussian3D<S> out = g;
    out.position      = T.apply(g.position);
    out.rotation = normalize_quat(quat_multiply(matrix_to_quat(T.rotation), normalize_quat(g.rotation)));
    return out;
}

/// Gradient of a scalar loss through build_covariance. `d_cov` is dL/dSigma (any symmetric
/// or general 3x3; it is symmetrized). Returns dL/d(raw quaternion) and dL/d(log_scale).
template <class S>
inline void
covariance_backward(const Vec4<S> &raw_q, const Vec3<S> &log_scale, const Mat3<S> &d_cov,
                    Vec4<S> &d_raw_q, Vec3<S> &d_log_scale) {
    const S qn       = raw_q.norm();
    const Vec4<S> q  = raw_q / qn;
    const Mat3<S> R  = quat_to_matrix(q);
    const Vec3<S> sc = log_scale.array().exp().matrix();
    const Mat3<S> M  = R * sc.asDiagonal();
    const Mat3<S> G  = S(0.5) * (d_cov + d_cov.transpose());
    const Mat3<S> dM = S(2) * G * M;

    for (int i = 0; i < 3; ++i) {
        d_log_scale[i] = sc[i] * dM.col(i).dot(R.col(i));
    }
    const Mat3<S> dR = dM * sc.asDiagonal();

    const S w = q[0], x = q[1], y = q[2], z = q[3];
    Vec4<S> dq;
    dq[0] = 2 * (-z * dR(0, 1) + y * dR(0, 2) + z * dR(1, 0) - x * dR(1, 2) - y * dR(2, 0) +
                 x * dR(2, 1));
    dq[1] = 2 * (y * dR(0, 1) + z * dR(0, 2) + y * dR(1, 0) - 2 * x * dR(1, 1) - w * dR(1, 2) +
                 z * dR(2, 0) + w * dR(2, 1) - 2 * x * dR(2, 2));
    dq[2] = 2 * (-2 * y * dR(0, 0) + x * dR(0, 1) + w * dR(0, 2) + x * dR(1, 0) + z * dR(1, 2) -
                 w * dR(2, 0) + z * dR(2, 1) - 2 * y * dR(2, 2));
    dq[3] = 2 * (-2 * z * dR(0, 0) - w * dR(0, 1) + x * dR(0, 2) + w * dR(1, 0) -
                 2 * z * dR(1, 1) + y * dR(1, 2) + x * dR(2, 0) + y * dR(2, 1));
    // through q = raw / |raw|
    d_raw_q = (dq - q * q.dot(dq)) / qn;
}

} // namespace gsavatar
