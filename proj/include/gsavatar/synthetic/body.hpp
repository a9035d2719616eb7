// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/kinematics/skeleton.hpp"
#include "gsavatar/kinematics/skinned_template.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace gsavatar::synthetic {

enum BodyJoint : int {
    kPelvis = 0,
    kSpine,
    kHead,
    kLeftShoulder,
    kLeftElbow,
    kLeftWrist,
    kRightShoulder,
    kRightElbow,
    kRightWrist,
    kLeftHip,
    kLeftKnee,
    kRightHip,
    kRightKnee,
    kBodyJointCount
};

/// Overall proportions of the T-posed capsule body, in meters. The body faces +z, y is up.
struct BodyProportions {
    double pelvis_height   = 0.95;
    double torso_length    = 0.50;
    double torso_radius_x  = 0.16;
    double torso_radius_z  = 0.11;
    double head_radius     = 0.10;
    double shoulder_offset = 0.18;
    double upper_arm       = 0.27;
    double forearm         = 0.25;
    double hand            = 0.10;
    double arm_radius      = 0.05;
    double hip_offset      = 0.10;
    double thigh           = 0.42;
    double shin            = 0.42;
    double leg_radius      = 0.07;
    int segments           = 24; // around each capsule
    int ring_density       = 40; // rings per meter of capsule axis
};

inline Skeleton
make_body_skeleton(const BodyProportions &bp = {}) {
    const double sh_y = bp.pelvis_height + bp.torso_length * 0.94;
    Skeleton s;
    auto add = [&](const char *name, int parent, Vec3d offset) {
        s.joints.push_back({name, parent, offset});
    };
    add("pelvis", -1, {0, bp.pelvis_height, 0});
    add("spine", kPelvis, {0, bp.torso_length * 0.5, 0});
    add("head", kSpine, {0, bp.torso_length * 0.5 + 0.04, 0});
    const double spine_y = bp.pelvis_height + bp.torso_length * 0.5;
    for (int side = 0; side < 2; ++side) {
        const double sx = side == 0 ? 1.0 : -1.0;
        const std::string p = side == 0 ? "left_" : "right_";
        s.joints.push_back({p + "shoulder", kSpine, {sx * bp.shoulder_offset, sh_y - spine_y, 0}});
        const int shoulder = s.size() - 1;
        s.joints.push_back({p + "elbow", shoulder, {sx * bp.upper_arm, 0, 0}});
        s.joints.push_back({p + "wrist", shoulder + 1, {sx * bp.forearm, 0, 0}});
    }
    for (int side = 0; side < 2; ++side) {
        const double sx = side == 0 ? 1.0 : -1.0;
        const std::string p = side == 0 ? "left_" : "right_";
        s.joints.push_back({p + "hip", kPelvis, {sx * bp.hip_offset, -0.03, 0}});
        s.joints.push_back({p + "knee", s.size() - 1, {0, -bp.thigh, 0}});
    }
    s.validate();
    return s;
}

namespace detail {

/// Weight control point along a capsule axis: (axis parameter in meters, joint).
struct WeightKey {
    double t;
    int joint;
};

struct CapsuleSpec {
    Vec3d a, b;          // axis endpoints (cap centers)
    double rx, rz;       // cross-section radii (rz along the body's depth axis when possible)
    std::vector<WeightKey> keys;
};

/// Piecewise-linear weights along the axis, clamped at the first/last key.
inline void
paint_weights(const std::vector<WeightKey> &keys, double t, Eigen::Ref<Eigen::RowVectorXd> w) {
    w.setZero();
    if (t <= keys.front().t) {
        w[keys.front().joint] = 1;
        return;
    }
    for (std::size_t k = 1; k < keys.size(); ++k) {
        if (t <= keys[k].t) {
            const double f = (t - keys[k - 1].t) / (keys[k].t - keys[k - 1].t);
            w[keys[k - 1].joint] += 1 - f;
            w[keys[k].joint] += f;
            return;
        }
    }
    w[keys.back().joint] = 1;
}

inline void
append_capsule(SkinnedTemplate &m, std::vector<Eigen::RowVectorXd> &weights, const CapsuleSpec &c,
               int joints, const BodyProportions &bp) {
    const Vec3d axis  = (c.b - c.a).normalized();
    const double len  = (c.b - c.a).norm();
    // Local frame: e1 horizontal-ish, e2 along depth (z) when the axis is not along z.
    Vec3d e2 = Vec3d::UnitZ() - axis * axis.z();
    if (e2.norm() < 1e-6) {
        e2 = Vec3d::UnitX();
    }
    e2.normalize();
    const Vec3d e1 = e2.cross(axis).normalized();
    const int nseg = bp.segments;
    const double rmax = std::max(c.rx, c.rz);
    const int cap_rings = std::max(3, static_cast<int>(std::ceil(rmax * std::numbers::pi * 0.5 *
                                                                  bp.ring_density)));
    const int body_rings = std::max(1, static_cast<int>(std::ceil(len * bp.ring_density)));

    // Ring list: (axial position, radial factor); poles handled separately.
    std::vector<std::pair<double, double>> rings;
    for (int i = 1; i <= cap_rings; ++i) {
        const double phi = -std::numbers::pi * 0.5 + std::numbers::pi * 0.5 * i / cap_rings;
        rings.push_back({rmax * std::sin(phi), std::cos(phi)});
    }
    for (int i = 1; i < body_rings; ++i) {
        rings.push_back({len * i / body_rings, 1.0});
    }
    for (int i = 0; i < cap_rings; ++i) {
        const double phi = std::numbers::pi * 0.5 * i / cap_rings;
        rings.push_back({len + rmax * std::sin(phi), std::cos(phi)});
    }

    auto add_vertex = [&](const Vec3d &p, double t) {
        m.vertices.push_back(p);
        Eigen::RowVectorXd w(joints);
        paint_weights(c.keys, t, w);
        weights.push_back(w);
        return static_cast<int>(m.vertices.size()) - 1;
    };
    const int south = add_vertex(c.a - axis * rmax, -rmax);
    const int first = static_cast<int>(m.vertices.size());
    for (const auto &[t, rf] : rings) {
        for (int s = 0; s < nseg; ++s) {
            const double th = 2 * std::numbers::pi * s / nseg;
            const Vec3d p   = c.a + axis * t + e1 * (c.rx * rf * std::cos(th)) +
                            e2 * (c.rz * rf * std::sin(th));
            add_vertex(p, t);
        }
    }
    const int north = add_vertex(c.b + axis * rmax, len + rmax);
    const int nr    = static_cast<int>(rings.size());
    auto idx        = [&](int r, int s) { return first + r * nseg + (s % nseg); };
    // Winding chosen so that normals point outward (e1 x e2 = axis).
    for (int s = 0; s < nseg; ++s) {
        m.triangles.push_back({south, idx(0, s + 1), idx(0, s)});
        m.triangles.push_back({north, idx(nr - 1, s), idx(nr - 1, s + 1)});
    }
    for (int r = 0; r + 1 < nr; ++r) {
        for (int s = 0; s < nseg; ++s) {
            m.triangles.push_back({idx(r, s), idx(r, s + 1), idx(r + 1, s + 1)});
            m.triangles.push_back({idx(r, s), idx(r + 1, s + 1), idx(r + 1, s)});
        }
    }
}

} // namespace detail

/// Capsule-limb template with per-vertex weights painted along each limb axis.
inline SkinnedTemplate
make_body_template(const BodyProportions &bp = {}) {
    using detail::CapsuleSpec;
    const Skeleton skel             = make_body_skeleton(bp);
    const std::vector<Vec3d> joints = skel.rest_positions();
    const int J                     = skel.size();
    std::vector<CapsuleSpec> caps;

    const double y0 = bp.pelvis_height;
    const double rz = bp.torso_radius_z;
    // Torso: axis param t is measured from the lower cap center.
    {
        CapsuleSpec c{{0, y0 - 0.08, 0}, {0, y0 + bp.torso_length - 0.10, 0},
                      bp.torso_radius_x, rz, {}};
        const double base = c.a.y();
        c.keys            = {{y0 - base, kPelvis}, {joints[kSpine].y() - 0.05 - base, kSpine}};
        caps.push_back(c);
    }
    {
        const double hy = joints[kHead].y() + bp.head_radius;
        CapsuleSpec c{{0, joints[kHead].y() - 0.02, 0}, {0, hy + 0.02, 0}, bp.head_radius,
                      bp.head_radius * 0.95, {}};
        c.keys = {{0.0, kSpine}, {0.06, kHead}};
        caps.push_back(c);
    }
    for (int side = 0; side < 2; ++side) {
        const int sh = side == 0 ? kLeftShoulder : kRightShoulder;
        const Vec3d &s = joints[sh], &e = joints[sh + 1], &w = joints[sh + 2];
        const double sx    = side == 0 ? 1.0 : -1.0;
        const Vec3d hand_end = w + Vec3d(sx * bp.hand, 0, 0);
        const Vec3d start    = s - Vec3d(sx * 0.04, 0, 0);
        const double ua      = (e - start).norm();
        caps.push_back({start, e, bp.arm_radius, bp.arm_radius,
                        {{0.0, kSpine}, {0.08, sh}, {ua - 0.05, sh}, {ua + 0.05, sh + 1}}});
        const double fa = (w - e).norm();
        caps.push_back({e, w, bp.arm_radius * 0.85, bp.arm_radius * 0.85,
                        {{-0.05, sh}, {0.05, sh + 1}, {fa - 0.03, sh + 1}, {fa + 0.03, sh + 2}}});
        caps.push_back({w, hand_end, bp.arm_radius * 0.8, bp.arm_radius * 0.5,
                        {{-0.03, sh + 1}, {0.03, sh + 2}}});
    }
    for (int side = 0; side < 2; ++side) {
        const int hip  = side == 0 ? kLeftHip : kRightHip;
        const Vec3d &h = joints[hip], &k = joints[hip + 1];
        const Vec3d foot = k - Vec3d(0, bp.shin, 0);
        const double th  = (k - h).norm();
        caps.push_back({h, k, bp.leg_radius, bp.leg_radius,
                        {{-0.02, kPelvis}, {0.08, hip}, {th - 0.06, hip}, {th + 0.06, hip + 1}}});
        caps.push_back({k, foot, bp.leg_radius * 0.8, bp.leg_radius * 0.8,
                        {{-0.06, hip}, {0.06, hip + 1}}});
    }

    SkinnedTemplate m;
    std::vector<Eigen::RowVectorXd> weights;
    for (const auto &c : caps) {
        detail::append_capsule(m, weights, c, J, bp);
    }
    m.weights.resize(static_cast<Eigen::Index>(weights.size()), J);
    for (std::size_t v = 0; v < weights.size(); ++v) {
        m.weights.row(static_cast<Eigen::Index>(v)) = weights[v];
    }
    m.compute_normals();
    m.validate();
    return m;
}

} // namespace gsavatar::synthetic
