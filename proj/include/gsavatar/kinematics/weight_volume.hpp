// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/error.hpp"
#include "gsavatar/core/parallel.hpp"
#include "gsavatar/kinematics/skinned_template.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <span>
#include <vector>

namespace gsavatar {

/// Regular voxel grid; voxel (i,j,k) is centered at origin + voxel_size * (i,j,k).
struct GridSpec {
    Vec3d origin            = Vec3d::Zero();
    double voxel_size       = 0.02;
    std::array<int, 3> dims = {0, 0, 0};

    std::size_t
    voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }

    std::size_t
    index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
    }

    Vec3d
    center(int i, int j, int k) const {
        return origin + voxel_size * Vec3d(i, j, k);
    }

    Vec3d
    max_center() const {
        return center(dims[0] - 1, dims[1] - 1, dims[2] - 1);
    }

    /// Grid covering the template's bounds plus `padding` voxels on every side.
    static GridSpec
    enclosing(const SkinnedTemplate &tmpl, double voxel_size, int padding = 2) {
        GSAVATAR_CHECK(voxel_size > 0, ConfigError, "voxel size must be positive");
        Vec3d lo, hi;
        tmpl.bounds(lo, hi);
        GridSpec g;
        g.voxel_size = voxel_size;
        g.origin     = lo - Vec3d::Constant(padding * voxel_size);
        for (int a = 0; a < 3; ++a) {
            g.dims[a] = static_cast<int>(std::ceil((hi[a] - lo[a]) / voxel_size)) + 2 * padding + 1;
        }
        return g;
    }
};

/// Dense per-voxel skinning weights, joint-minor layout.
struct WeightVolume {
    GridSpec grid;
    int num_joints = 0;
    std::vector<double> weights;

    std::span<const double>
    at(int i, int j, int k) const {
        return {weights.data() + grid.index(i, j, k) * num_joints,
                static_cast<std::size_t>(num_joints)};
    }

    /// Trilinear interpolation; positions outside the grid are clamped to its boundary.
    void
    sample(const Vec3d &x, std::span<double> out) const {
        GSAVATAR_CHECK(static_cast<int>(out.size()) == num_joints, ContractError,
                       "weight buffer size mismatch");
        std::array<int, 3> i0;
        std::array<double, 3> f;
        for (int a = 0; a < 3; ++a) {
            const double u  = std::clamp((x[a] - grid.origin[a]) / grid.voxel_size, 0.0,
                                         static_cast<double>(grid.dims[a] - 1));
            const int lo    = std::min(static_cast<int>(std::floor(u)), std::max(grid.dims[a] - 2, 0));
            i0[a]           = lo;
            f[a]            = grid.dims[a] > 1 ? u - lo : 0.0;
        }
        std::fill(out.begin(), out.end(), 0.0);
        for (int c = 0; c < 8; ++c) {
            const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
            const double w = (di ? f[0] : 1 - f[0]) * (dj ? f[1] : 1 - f[1]) *
                             (dk ? f[2] : 1 - f[2]);
            if (w == 0.0) {
                continue;
            }
            const auto src = at(std::min(i0[0] + di, grid.dims[0] - 1),
                                std::min(i0[1] + dj, grid.dims[1] - 1),
                                std::min(i0[2] + dk, grid.dims[2] - 1));
            for (int j = 0; j < num_joints; ++j) {
                out[j] += w * src[j];
            }
        }
    }

    std::vector<double>
    sample(const Vec3d &x) const {
        std::vector<double> out(num_joints);
        sample(x, out);
        return out;
    }
};

/// Closest point on triangle abc to p, returned as barycentric coordinates.
inline Vec3d
closest_point_barycentric(const Vec3d &p, const Vec3d &a, const Vec3d &b, const Vec3d &c) {
    const Vec3d ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) {
        return {1, 0, 0};
    }
    const Vec3d bp  = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) {
        return {0, 1, 0};
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double v = d1 / (d1 - d3);
        return {1 - v, v, 0};
    }
    const Vec3d cp  = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) {
        return {0, 0, 1};
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double w = d2 / (d2 - d6);
        return {1 - w, 0, w};
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return {0, 1 - w, w};
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return {1 - v - w, v, w};
}

struct DiffusionOptions {
    double tolerance   = 1e-4; // max per-voxel weight change that ends the iteration
    int max_iterations = 500;
};

struct DiffusionStats {
    std::size_t band_voxels = 0;
    int iterations          = 0;
    double final_change     = 0;
};

/// Extends surface skinning weights to a volume: voxels within one voxel of the surface take
/// the barycentric weights of their closest surface point and stay fixed; the rest are seeded
/// from the nearest band voxel and relaxed by Jacobi iterations of the 6-neighbour Laplacian.
inline WeightVolume
diffuse_weights(const SkinnedTemplate &tmpl, const GridSpec &grid, const DiffusionOptions &opt = {},
                DiffusionStats *stats = nullptr) {
    GSAVATAR_CHECK(grid.voxel_size > 0 && grid.dims[0] > 0 && grid.dims[1] > 0 && grid.dims[2] > 0,
                   ConfigError, "invalid weight grid");
    GSAVATAR_CHECK(tmpl.num_joints() > 0 && tmpl.weights.rows() ==
                                                static_cast<Eigen::Index>(tmpl.vertices.size()),
                   ContractError, "template weights do not match its vertices");
    Vec3d lo, hi;
    tmpl.bounds(lo, hi);
    const double h  = grid.voxel_size;
    const Vec3d gmax = grid.max_center();
    for (int a = 0; a < 3; ++a) {
        GSAVATAR_CHECK(lo[a] - h >= grid.origin[a] - 1e-9 * h && hi[a] + h <= gmax[a] + 1e-9 * h,
                       ConfigError,
                       "weight grid does not enclose the template bounds dilated by one voxel");
    }

    const int J          = tmpl.num_joints();
    const std::size_t nv = grid.voxel_count();
    WeightVolume vol;
    vol.grid       = grid;
    vol.num_joints = J;
    vol.weights.assign(nv * J, 0.0);

    // Band: closest surface point within one voxel.
    std::vector<double> best(nv, std::numeric_limits<double>::infinity());
    std::vector<char> fixed(nv, 0);
    for (const auto &t : tmpl.triangles) {
        const Vec3d &a = tmpl.vertices[t[0]], &b = tmpl.vertices[t[1]], &c = tmpl.vertices[t[2]];
        const Vec3d tlo = a.cwiseMin(b).cwiseMin(c), thi = a.cwiseMax(b).cwiseMax(c);
        std::array<int, 3> r0, r1;
        for (int ax = 0; ax < 3; ++ax) {
            r0[ax] = std::max(0, static_cast<int>(std::floor((tlo[ax] - h - grid.origin[ax]) / h)));
            r1[ax] = std::min(grid.dims[ax] - 1,
                              static_cast<int>(std::ceil((thi[ax] + h - grid.origin[ax]) / h)));
        }
        for (int k = r0[2]; k <= r1[2]; ++k) {
            for (int j = r0[1]; j <= r1[1]; ++j) {
                for (int i = r0[0]; i <= r1[0]; ++i) {
                    const Vec3d p    = grid.center(i, j, k);
                    const Vec3d bary = closest_point_barycentric(p, a, b, c);
                    const double d   = (p - (bary[0] * a + bary[1] * b + bary[2] * c)).norm();
                    const std::size_t v = grid.index(i, j, k);
                    if (d < h && d < best[v]) {
                        best[v]  = d;
                        fixed[v] = 1;
                        double *w = vol.weights.data() + v * J;
                        for (int jj = 0; jj < J; ++jj) {
                            w[jj] = bary[0] * tmpl.weights(t[0], jj) +
                                    bary[1] * tmpl.weights(t[1], jj) +
                                    bary[2] * tmpl.weights(t[2], jj);
                        }
                    }
                }
            }
        }
    }
    std::size_t band = 0;
    for (char f : fixed) {
        band += f;
    }
    GSAVATAR_CHECK(band > 0, DegenerateError, "no voxel lies within one voxel of the surface");

    const std::array<int, 3> dims = grid.dims;
    auto for_neighbours           = [&](std::size_t v, auto &&fn) {
        const int i = static_cast<int>(v % dims[0]);
        const int j = static_cast<int>((v / dims[0]) % dims[1]);
        const int k = static_cast<int>(v / (static_cast<std::size_t>(dims[0]) * dims[1]));
        if (i > 0) fn(v - 1);
        if (i + 1 < dims[0]) fn(v + 1);
        if (j > 0) fn(v - dims[0]);
        if (j + 1 < dims[1]) fn(v + dims[0]);
        if (k > 0) fn(v - static_cast<std::size_t>(dims[0]) * dims[1]);
        if (k + 1 < dims[2]) fn(v + static_cast<std::size_t>(dims[0]) * dims[1]);
    };

    // Seed free voxels from the nearest band voxel (multi-source BFS).
    {
        std::vector<char> seen(fixed);
        std::deque<std::size_t> queue;
        for (std::size_t v = 0; v < nv; ++v) {
            if (fixed[v]) {
                queue.push_back(v);
            }
        }
        while (!queue.empty()) {
            const std::size_t v = queue.front();
            queue.pop_front();
            for_neighbours(v, [&](std::size_t n) {
                if (!seen[n]) {
                    seen[n] = 1;
                    std::copy_n(vol.weights.data() + v * J, J, vol.weights.data() + n * J);
                    queue.push_back(n);
                }
            });
        }
    }

    std::vector<double> next(vol.weights);
    const std::size_t slab = static_cast<std::size_t>(dims[0]) * dims[1];
    int it                 = 0;
    double change          = 0;
    for (; it < opt.max_iterations; ++it) {
        std::vector<double> slab_change(dims[2], 0.0);
        parallel_for(static_cast<std::size_t>(dims[2]), [&](std::size_t k) {
            double mx = 0;
            for (std::size_t v = k * slab; v < (k + 1) * slab; ++v) {
                if (fixed[v]) {
                    continue;
                }
                double *dst = next.data() + v * J;
                std::fill_n(dst, J, 0.0);
                int cnt = 0;
                for_neighbours(v, [&](std::size_t n) {
                    const double *src = vol.weights.data() + n * J;
                    for (int jj = 0; jj < J; ++jj) {
                        dst[jj] += src[jj];
                    }
                    ++cnt;
                });
                const double *cur = vol.weights.data() + v * J;
                for (int jj = 0; jj < J; ++jj) {
                    dst[jj] /= cnt;
                    mx = std::max(mx, std::abs(dst[jj] - cur[jj]));
                }
            }
            slab_change[k] = mx;
        });
        vol.weights.swap(next);
        change = *std::max_element(slab_change.begin(), slab_change.end());
        if (change < opt.tolerance) {
            ++it;
            break;
        }
    }
    // Free voxels in `next` are one iteration stale; band voxels are identical in both buffers.

    for (std::size_t v = 0; v < nv; ++v) {
        double *w  = vol.weights.data() + v * J;
        double sum = 0;
        for (int jj = 0; jj < J; ++jj) {
            w[jj] = std::max(w[jj], 0.0);
            sum += w[jj];
        }
        if (sum > 0) {
            for (int jj = 0; jj < J; ++jj) {
                w[jj] /= sum;
            }
        }
    }
    if (stats) {
        stats->band_voxels  = band;
        stats->iterations   = it;
        stats->final_change = change;
    }
    return vol;
}

} // namespace gsavatar
