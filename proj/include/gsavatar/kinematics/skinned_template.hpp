// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/math.hpp"

#include <array>
#include <string>
#include <vector>

namespace gsavatar {

using WeightMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Canonical triangle mesh with per-vertex skinning weights (one row per vertex).
struct SkinnedTemplate {
    std::vector<Vec3d> vertices;
    std::vector<std::array<int, 3>> triangles;
    WeightMatrix weights;
    std::vector<Vec3d> normals;

    int
    num_joints() const {
        return static_cast<int>(weights.cols());
    }

    /// Area-weighted vertex normals.
    void
    compute_normals() {
        normals.assign(vertices.size(), Vec3d::Zero());
        for (const auto &t : triangles) {
            const Vec3d n =
                (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
            for (int k = 0; k < 3; ++k) {
                normals[t[k]] += n;
            }
        }
        for (auto &n : normals) {
            const double len = n.norm();
            n = len > 0 ? Vec3d(n / len) : Vec3d(0, 0, 1);
        }
    }

    void
    bounds(Vec3d &lo, Vec3d &hi) const {
        lo = Vec3d::Constant(std::numeric_limits<double>::infinity());
        hi = -lo;
        for (const auto &v : vertices) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
    }

    void
    validate() const {
        const auto nv = static_cast<int>(vertices.size());
        GSAVATAR_CHECK(nv > 0 && !triangles.empty(), ConfigError, "template mesh is empty");
        GSAVATAR_CHECK(weights.rows() == nv && weights.cols() > 0, ConfigError,
                       "template weights must have one row per vertex");
        for (int v = 0; v < nv; ++v) {
            GSAVATAR_CHECK(weights.row(v).minCoeff() >= 0.0, ConfigError,
                           "negative skinning weight at vertex " + std::to_string(v));
            GSAVATAR_CHECK(std::abs(weights.row(v).sum() - 1.0) <= 1e-6, ConfigError,
                           "skinning weights do not sum to 1 at vertex " + std::to_string(v));
        }
        for (const auto &t : triangles) {
            for (int k = 0; k < 3; ++k) {
                GSAVATAR_CHECK(t[k] >= 0 && t[k] < nv, ConfigError,
                               "triangle index out of range");
            }
            const double area2 =
                (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
            GSAVATAR_CHECK(area2 > 1e-14, ConfigError, "degenerate triangle in template");
        }
        GSAVATAR_CHECK(normals.empty() || normals.size() == vertices.size(), ConfigError,
                       "normal count differs from vertex count");
    }
};

} // namespace gsavatar
