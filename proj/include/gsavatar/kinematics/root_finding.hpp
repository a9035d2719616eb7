// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/kinematics/lbs.hpp"
#include "gsavatar/kinematics/weight_volume.hpp"

#include <span>
#include <vector>

namespace gsavatar {

struct RootFindOptions {
    double tolerance   = 1e-6; // on the posed-space residual, in meters
    int max_iterations = 20;
};

struct RootFindResult {
    Vec3d canonical = Vec3d::Zero();
    bool converged  = false;
    int iterations  = 0;
    double residual = 0;
};

/// Skins x with the volume's interpolated weights.
inline Vec3d
volume_skin(const Vec3d &x, std::span<const RigidTransform<double>> transforms,
            const WeightVolume &vol, std::vector<double> &scratch, BlendedTransform *blend = nullptr) {
    scratch.resize(vol.num_joints);
    vol.sample(x, scratch);
    const BlendedTransform b =
        blend_transforms(std::span<const double>(scratch), transforms);
    if (blend) {
        *blend = b;
    }
    return b.apply(x);
}

/// Initial guess: invert the blended transform of the closest posed template vertex.
inline Vec3d
inverse_skinning_init(const Vec3d &x_posed, const SkinnedTemplate &tmpl,
                      std::span<const Vec3d> posed_vertices,
                      std::span<const RigidTransform<double>> transforms) {
    GSAVATAR_CHECK(posed_vertices.size() == tmpl.vertices.size() && !posed_vertices.empty(),
                   ContractError, "posed vertex count differs from template");
    std::size_t best = 0;
    double best_d    = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < posed_vertices.size(); ++v) {
        const double d = (posed_vertices[v] - x_posed).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best   = v;
        }
    }
    const BlendedTransform b = blend_transforms(
        std::span<const double>(tmpl.weights.row(best).data(), tmpl.weights.cols()), transforms);
    Eigen::PartialPivLU<Mat3d> lu(b.linear);
    if (std::abs(b.linear.determinant()) < 1e-12) {
        return tmpl.vertices[best];
    }
    return lu.solve(x_posed - b.translation);
}

/// Finds x_c with LBS(x_c; volume weights) = x_posed by Gauss-Newton using the blended linear
/// part as Jacobian. On failure the initial guess is returned with converged = false.
inline RootFindResult
root_find_canonical(const Vec3d &x_posed, std::span<const RigidTransform<double>> transforms,
                    const WeightVolume &vol, const Vec3d &init, const RootFindOptions &opt = {}) {
    GSAVATAR_CHECK(static_cast<int>(transforms.size()) == vol.num_joints, ContractError,
                   "transform count differs from weight volume joint count");
    std::vector<double> scratch;
    BlendedTransform b;
    Vec3d x        = init;
    Vec3d r        = volume_skin(x, transforms, vol, scratch, &b) - x_posed;
    RootFindResult res;
    res.residual = r.norm();
    for (int it = 0; it < opt.max_iterations && res.residual >= opt.tolerance; ++it) {
        Eigen::PartialPivLU<Mat3d> lu(b.linear);
        if (!(std::abs(b.linear.determinant()) > 1e-12)) {
            break;
        }
        const Vec3d step = lu.solve(r);
        // Backtrack on the residual norm so a poor Jacobian cannot make things worse.
        double t = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 8; ++ls, t *= 0.5) {
            const Vec3d xn = x - t * step;
            BlendedTransform bn;
            const Vec3d rn = volume_skin(xn, transforms, vol, scratch, &bn) - x_posed;
            if (rn.norm() < res.residual) {
                x = xn, r = rn, b = bn;
                res.residual = rn.norm();
                improved     = true;
                break;
            }
        }
        res.iterations = it + 1;
        if (!improved) {
            break;
        }
    }
    res.converged = res.residual < opt.tolerance;
    res.canonical = res.converged ? x : init;
    return res;
}

} // namespace gsavatar
