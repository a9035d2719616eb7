// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

// Test-only helpers: random splat scenes and a finite-difference oracle built on the brute-force
// reference renderer.

#pragma once

#include "gsavatar/raster/render.hpp"

#include <functional>
#include <random>
#include <vector>

namespace gsavatar::test {

inline std::vector<Gaussian2DSplat<double>>
random_splats(std::mt19937_64 &rng, int count, int width, int height, double min_sigma,
              double max_sigma, double max_opacity = 0.95) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<Gaussian2DSplat<double>> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        Gaussian2DSplat<double> s;
        s.mean2d = Vec2<double>(u01(rng) * width, u01(rng) * height);
        const double sx = min_sigma + (max_sigma - min_sigma) * u01(rng);
        const double sy = min_sigma + (max_sigma - min_sigma) * u01(rng);
        const double th = u01(rng) * 3.14159265358979;
        Mat2<double> R;
        R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        const Mat2<double> c = R * Vec2<double>(sx * sx, sy * sy).asDiagonal() * R.transpose();
        s.cov2d   = Vec3<double>(c(0, 0), c(0, 1), c(1, 1));
        s.depth   = 1.0 + 10.0 * u01(rng);
        s.opacity = 0.05 + (max_opacity - 0.05) * u01(rng);
        s.color   = Vec3<double>(u01(rng), u01(rng), u01(rng));
        out.push_back(s);
    }
    return out;
}

template <class S>
inline std::vector<Gaussian2DSplat<S>>
cast_splats(const std::vector<Gaussian2DSplat<double>> &in) {
    std::vector<Gaussian2DSplat<S>> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i].mean2d  = in[i].mean2d.cast<S>();
        out[i].cov2d   = in[i].cov2d.cast<S>();
        out[i].depth   = static_cast<S>(in[i].depth);
        out[i].opacity = static_cast<S>(in[i].opacity);
        out[i].color   = in[i].color.cast<S>();
    }
    return out;
}

inline std::vector<Gaussian2DSplat<double>>
sorted(const std::vector<Gaussian2DSplat<double>> &splats) {
    const auto order = sort_splats<double>(splats);
    return apply_permutation<Gaussian2DSplat<double>>(splats, order);
}

inline double
weighted_sum(const ImageT<double> &img, const ImageT<double> &w) {
    double s = 0.0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        s += img.pixels[i] * w.pixels[i];
    }
    return s;
}

/// Pixels (as a bitmask) inside the kernel support of splat s.
inline std::vector<bool>
support_mask(const Gaussian2DSplat<double> &s, int width, int height) {
    const auto p = raster::prepare_splat(s);
    std::vector<bool> mask(static_cast<std::size_t>(width) * height, false);
    if (!p.valid) {
        return mask;
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double a, g;
            bool c;
            mask[static_cast<std::size_t>(y) * width + x] =
                raster::splat_alpha(p, x + 0.5, y + 0.5, a, g, c);
        }
    }
    return mask;
}

struct GradientCheckStats {
    int checked      = 0;
    int failed       = 0;
    int skipped      = 0; // kernel support changed inside the FD stencil
    double worst_rel = 0.0;
};

/// Central differences of `loss(param)` against `analytic`, skipping stencils across which the
/// support predicate changes (the truncated kernel is not differentiable there).
inline void
check_scalar_gradient(GradientCheckStats &stats, double analytic, double h, double tol,
                      const std::function<double(double)> &loss,
                      const std::function<bool(double)> &support_changes) {
    if (support_changes && support_changes(h)) {
        ++stats.skipped;
        return;
    }
    const double fd  = (loss(h) - loss(-h)) / (2 * h);
    const double rel = std::abs(analytic - fd) /
                       std::max({std::abs(analytic), std::abs(fd), 1e-8});
    ++stats.checked;
    stats.worst_rel = std::max(stats.worst_rel, rel);
    if (rel > tol) {
        ++stats.failed;
    }
}

} // namespace gsavatar::test
