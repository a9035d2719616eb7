// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/raster/rasterizer.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gsavatar {

/// Result of projecting, sorting and rasterizing a set of 3D Gaussians.
template <class S> struct RenderResult {
    std::vector<Gaussian2DSplat<S>> splats; // depth sorted
    std::vector<std::uint32_t> source;      // splats[k] came from gaussians[source[k]]
    ForwardResult<S> forward;
};

/// Projects world-space means/covariances with given opacities and colors, then rasterizes.
/// Gaussians behind the near plane are culled.
template <class S>
inline RenderResult<S>
render_projected(std::span<const Vec3<S>> positions, std::span<const Mat3<S>> covariances,
                 std::span<const S> opacities, std::span<const Vec3<S>> colors,
                 const PerspectiveCamera<S> &cam, const RasterSettings &settings = {}) {
    const std::size_t n = positions.size();
    std::vector<Gaussian2DSplat<S>> projected(n);
    std::vector<std::uint8_t> keep(n, 0);
    parallel_for_blocks(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            auto s = project_mean_cov_perspective(positions[i], covariances[i], cam);
            if (s) {
                s->opacity   = opacities[i];
                s->color     = colors[i];
                projected[i] = *s;
                keep[i]      = 1;
            }
        }
    });
    std::vector<std::uint32_t> visible;
    visible.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i]) {
            visible.push_back(static_cast<std::uint32_t>(i));
        }
    }
    std::vector<Gaussian2DSplat<S>> compact;
    compact.reserve(visible.size());
    for (auto i : visible) {
        compact.push_back(projected[i]);
    }
    const auto order = sort_splats<S>(compact);

    RenderResult<S> out;
    out.splats.reserve(order.size());
    out.source.reserve(order.size());
    for (auto k : order) {
        out.splats.push_back(compact[k]);
        out.source.push_back(visible[k]);
    }
    out.forward = rasterize_forward<S>(out.splats, cam.width, cam.height, settings);
    return out;
}

template <class S>
inline RenderResult<S>
render_gaussians(std::span<const Gaussian3D<S>> gaussians, const PerspectiveCamera<S> &cam,
                 const RasterSettings &settings = {}) {
    std::vector<Vec3<S>> pos(gaussians.size());
    std::vector<Mat3<S>> cov(gaussians.size());
    std::vector<S> op(gaussians.size());
    std::vector<Vec3<S>> col(gaussians.size());
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        pos[i] = gaussians[i].position;
        cov[i] = gaussians[i].covariance();
        op[i]  = gaussians[i].opacity();
        col[i] = gaussians[i].color;
    }
    return render_projected<S>(pos, cov, op, col, cam, settings);
}

/// dL/dmean, dL/dSigma, dL/dopacity, dL/dcolor per source Gaussian (world space).
template <class S> struct ProjectedGradients {
    std::vector<Vec3<S>> d_position;
    std::vector<Mat3<S>> d_covariance;
    std::vector<S> d_opacity;
    std::vector<Vec3<S>> d_color;
};

template <class S>
inline ProjectedGradients<S>
render_projected_backward(std::span<const Vec3<S>> positions, std::span<const Mat3<S>> covariances,
                          const PerspectiveCamera<S> &cam, const RenderResult<S> &render,
                          const ImageT<S> &d_image) {
    const RasterGradients<S> rg =
        rasterize_backward<S>(render.splats, render.forward, d_image);
    const std::size_t n = positions.size();
    ProjectedGradients<S> out;
    out.d_position.assign(n, Vec3<S>::Zero());
    out.d_covariance.assign(n, Mat3<S>::Zero());
    out.d_opacity.assign(n, S(0));
    out.d_color.assign(n, Vec3<S>::Zero());
    parallel_for_blocks(render.source.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            const std::uint32_t i = render.source[k];
            out.d_opacity[i]      = rg.d_opacity[k];
            out.d_color[i]        = rg.d_color[k];
            project_mean_cov_perspective_backward(positions[i], covariances[i], cam,
                                                  rg.d_mean2d[k], rg.d_cov2d[k],
                                                  out.d_position[i], out.d_covariance[i]);
        }
    });
    return out;
}

/// Gradients with respect to the stored Gaussian parameters.
template <class S> struct Gaussian3DGradients {
    std::vector<Vec3<S>> d_position;
    std::vector<Vec4<S>> d_rotation; // raw (unnormalized) quaternion
    std::vector<Vec3<S>> d_log_scale;
    std::vector<S> d_opacity_logit;
    std::vector<Vec3<S>> d_color;
};

template <class S>
inline Gaussian3DGradients<S>
render_gaussians_backward(std::span<const Gaussian3D<S>> gaussians, const PerspectiveCamera<S> &cam,
                          const RenderResult<S> &render, const ImageT<S> &d_image) {
    const std::size_t n = gaussians.size();
    std::vector<Vec3<S>> pos(n);
    std::vector<Mat3<S>> cov(n);
    for (std::size_t i = 0; i < n; ++i) {
        pos[i] = gaussians[i].position;
        cov[i] = gaussians[i].covariance();
    }
    const auto pg = render_projected_backward<S>(pos, cov, cam, render, d_image);
    Gaussian3DGradients<S> out;
    out.d_position = pg.d_position;
    out.d_color    = pg.d_color;
    out.d_rotation.assign(n, Vec4<S>::Zero());
    out.d_log_scale.assign(n, Vec3<S>::Zero());
    out.d_opacity_logit.assign(n, S(0));
    for (std::size_t i = 0; i < n; ++i) {
        const S o = gaussians[i].opacity();
        out.d_opacity_logit[i] = pg.d_opacity[i] * o * (S(1) - o);
        covariance_backward(gaussians[i].rotation, gaussians[i].log_scale, pg.d_covariance[i],
                            out.d_rotation[i], out.d_log_scale[i]);
    }
    return out;
}

} // namespace gsavatar
