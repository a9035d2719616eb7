// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/gaussian.hpp"

#include <string>
#include <vector>

namespace gsavatar {

struct Joint {
    std::string name;
    int parent = -1;
    Vec3d offset = Vec3d::Zero(); // rest-pose offset from the parent joint (root: rest position)
};

/// Joints are topologically sorted: every parent index is smaller than its child's.
struct Skeleton {
    std::vector<Joint> joints;

    int
    size() const {
        return static_cast<int>(joints.size());
    }

    void
    validate() const {
        GSAVATAR_CHECK(!joints.empty(), ConfigError, "skeleton has no joints");
        int roots = 0;
        for (int j = 0; j < size(); ++j) {
            const int p = joints[j].parent;
            if (p < 0) {
                GSAVATAR_CHECK(p == -1, ConfigError, "root parent index must be -1");
                ++roots;
            } else {
                GSAVATAR_CHECK(p < j, ConfigError,
                               "skeleton is not topologically sorted at joint " + std::to_string(j));
            }
        }
        GSAVATAR_CHECK(roots == 1, ConfigError, "skeleton must have exactly one root");
    }

    std::vector<Vec3d>
    rest_positions() const {
        std::vector<Vec3d> pos(joints.size());
        for (int j = 0; j < size(); ++j) {
            const int p = joints[j].parent;
            pos[j]      = p < 0 ? joints[j].offset : Vec3d(pos[p] + joints[j].offset);
        }
        return pos;
    }
};

/// Per-joint local axis-angle rotations plus an optional global rigid transform.
struct Pose {
    std::vector<Vec3d> joint_rotations;
    Vec3d global_rotation    = Vec3d::Zero(); // axis-angle
    Vec3d global_translation = Vec3d::Zero();

    static Pose
    zero(int joints) {
        Pose p;
        p.joint_rotations.assign(joints, Vec3d::Zero());
        return p;
    }

    RigidTransform<double>
    global_transform() const {
        return {axis_angle_to_matrix(global_rotation), global_translation};
    }
};

/// Skinning transforms x -> W_k (x - rest_k) + P_k of every joint. The pose's global transform
/// is not applied; see apply_global.
inline std::vector<RigidTransform<double>>
forward_kinematics(const Skeleton &skel, const Pose &pose) {
    GSAVATAR_CHECK(static_cast<int>(pose.joint_rotations.size()) == skel.size(), ContractError,
                   "pose has " + std::to_string(pose.joint_rotations.size()) +
                       " joint rotations, skeleton has " + std::to_string(skel.size()));
    const int n = skel.size();
    std::vector<Mat3d> world_rot(n);
    std::vector<Vec3d> world_pos(n);
    std::vector<Vec3d> rest(n);
    for (int j = 0; j < n; ++j) {
        const Joint &jt = skel.joints[j];
        const Mat3d local = axis_angle_to_matrix(pose.joint_rotations[j]);
        if (jt.parent < 0) {
            world_rot[j] = local;
            world_pos[j] = jt.offset;
            rest[j]      = jt.offset;
        } else {
            world_rot[j] = world_rot[jt.parent] * local;
            world_pos[j] = world_pos[jt.parent] + world_rot[jt.parent] * jt.offset;
            rest[j]      = rest[jt.parent] + jt.offset;
        }
    }
    std::vector<RigidTransform<double>> out(n);
    for (int j = 0; j < n; ++j) {
        out[j].rotation    = world_rot[j];
        out[j].translation = world_pos[j] - world_rot[j] * rest[j];
    }
    return out;
}

/// Prepends the pose's global rigid transform to every joint transform.
inline std::vector<RigidTransform<double>>
apply_global(std::vector<RigidTransform<double>> transforms, const Pose &pose) {
    const RigidTransform<double> G = pose.global_transform();
    for (auto &t : transforms) {
        t = G.compose(t);
    }
    return transforms;
}

} // namespace gsavatar
