// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/camera.hpp"
#include "gsavatar/kinematics/skinned_template.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace gsavatar {

enum class MapSide : int { kFront = 0, kBack = 1 };

/// One orthographic view of the canonical template. Per-pixel data is stored compactly for the
/// valid (covered) pixels only, in row-major pixel order.
struct TemplateView {
    OrthoCamera<double> camera;
    std::vector<std::uint8_t> mask;   // height*width
    std::vector<int> pixel_to_valid;  // height*width, -1 where not covered
    std::vector<int> valid_pixels;    // row-major pixel indices of covered pixels
    std::vector<Vec3d> base_position; // per valid pixel, canonical coordinates on the surface
    std::vector<Vec3d> base_normal;   // per valid pixel, outward face normal (canonical)
    std::vector<int> face;            // per valid pixel, triangle index
    std::vector<Vec3d> barycentric;   // per valid pixel, within `face`

    int
    width() const {
        return camera.width;
    }
    int
    height() const {
        return camera.height;
    }
    int
    num_valid() const {
        return static_cast<int>(valid_pixels.size());
    }
};

/// Canonical template rasterized into front and back orthographic maps. Valid samples are
/// indexed globally: front pixels first (row-major), then back pixels.
struct CanonicalTemplate {
    SkinnedTemplate mesh;
    std::array<TemplateView, 2> views;
    WeightMatrix base_weights; // one row per global valid sample

    const TemplateView &
    view(MapSide s) const {
        return views[static_cast<int>(s)];
    }

    int
    resolution() const {
        return views[0].width();
    }

    int
    num_valid() const {
        return views[0].num_valid() + views[1].num_valid();
    }

    int
    num_joints() const {
        return static_cast<int>(base_weights.cols());
    }

    /// World size of one map pixel.
    double
    pixel_size() const {
        return 1.0 / views[0].camera.pixels_per_meter;
    }

    /// Global sample index of (view, pixel), or -1.
    int
    sample_index(MapSide s, int pixel) const {
        const int v = view(s).pixel_to_valid[pixel];
        if (v < 0) {
            return -1;
        }
        return s == MapSide::kFront ? v : views[0].num_valid() + v;
    }

    Vec3d
    base_position(int sample) const {
        const int nf = views[0].num_valid();
        return sample < nf ? views[0].base_position[sample] : views[1].base_position[sample - nf];
    }

    Vec3d
    base_normal(int sample) const {
        const int nf = views[0].num_valid();
        return sample < nf ? views[0].base_normal[sample] : views[1].base_normal[sample - nf];
    }

    std::span<const double>
    weights(int sample) const {
        return {base_weights.row(sample).data(), static_cast<std::size_t>(base_weights.cols())};
    }

    /// Flat list of valid pixel indices with back pixels offset by width*height.
    std::vector<std::int32_t>
    global_pixel_indices() const {
        std::vector<std::int32_t> out;
        out.reserve(num_valid());
        const int wh = views[0].width() * views[0].height();
        for (int p : views[0].valid_pixels) {
            out.push_back(p);
        }
        for (int p : views[1].valid_pixels) {
            out.push_back(p + wh);
        }
        return out;
    }
};

/// Front camera looks along -z (sees the +z side), back camera along +z; image y points down
/// the body's -y axis. The back image is mirrored so that it reads as seen from behind.
inline std::array<OrthoCamera<double>, 2>
default_template_cameras(const SkinnedTemplate &mesh, int resolution, double margin = 0.05) {
    GSAVATAR_CHECK(resolution > 0, ConfigError, "map resolution must be positive");
    Vec3d lo, hi;
    mesh.bounds(lo, hi);
    const Vec3d c     = 0.5 * (lo + hi);
    const double span = std::max(hi.x() - lo.x(), hi.y() - lo.y()) / (1.0 - 2.0 * margin);
    GSAVATAR_CHECK(span > 0, ConfigError, "template has zero extent");
    std::array<OrthoCamera<double>, 2> cams;
    cams[0].rotation = Vec3d(1, -1, -1).asDiagonal();
    cams[1].rotation = Vec3d(-1, -1, 1).asDiagonal();
    for (auto &cam : cams) {
        cam.center           = c;
        cam.pixels_per_meter = resolution / span;
        cam.width = cam.height = resolution;
    }
    return cams;
}

namespace detail {

inline void
rasterize_view(const SkinnedTemplate &mesh, TemplateView &v) {
    const int W = v.width(), H = v.height();
    std::vector<double> zbuf(static_cast<std::size_t>(W) * H, std::numeric_limits<double>::infinity());
    std::vector<int> tri_of(zbuf.size(), -1);
    std::vector<Vec3d> bary(zbuf.size());
    std::vector<Vec3d> proj(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec2<double> p = v.camera.to_pixel(mesh.vertices[i]);
        proj[i]              = Vec3d(p.x(), p.y(), v.camera.to_camera(mesh.vertices[i]).z());
    }
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto &tri = mesh.triangles[t];
        const Vec3d &a = proj[tri[0]], &b = proj[tri[1]], &c = proj[tri[2]];
        const double area = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
        if (std::abs(area) < 1e-12) {
            continue; // edge-on in this view
        }
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}) - 0.5)));
        const int x1 = std::min(W - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}) - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}) - 0.5)));
        const int y1 = std::min(H - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}) - 0.5)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                const double w0 = ((b.x() - px) * (c.y() - py) - (c.x() - px) * (b.y() - py)) / area;
                const double w1 = ((c.x() - px) * (a.y() - py) - (a.x() - px) * (c.y() - py)) / area;
                const double w2 = 1.0 - w0 - w1;
                constexpr double eps = -1e-9;
                if (w0 < eps || w1 < eps || w2 < eps) {
                    continue;
                }
                const double z        = w0 * a.z() + w1 * b.z() + w2 * c.z();
                const std::size_t pix = static_cast<std::size_t>(y) * W + x;
                if (z < zbuf[pix]) {
                    zbuf[pix]   = z;
                    tri_of[pix] = static_cast<int>(t);
                    bary[pix]   = Vec3d(w0, w1, w2).cwiseMax(0.0) / Vec3d(w0, w1, w2).cwiseMax(0.0).sum();
                }
            }
        }
    }
    v.mask.assign(zbuf.size(), 0);
    v.pixel_to_valid.assign(zbuf.size(), -1);
    v.valid_pixels.clear();
    v.base_position.clear();
    v.base_normal.clear();
    v.face.clear();
    v.barycentric.clear();
    for (std::size_t pix = 0; pix < zbuf.size(); ++pix) {
        const int t = tri_of[pix];
        if (t < 0) {
            continue;
        }
        const auto &tri = mesh.triangles[t];
        const Vec3d &A = mesh.vertices[tri[0]], &B = mesh.vertices[tri[1]], &C = mesh.vertices[tri[2]];
        v.mask[pix]           = 1;
        v.pixel_to_valid[pix] = v.num_valid();
        v.valid_pixels.push_back(static_cast<int>(pix));
        v.base_position.push_back(bary[pix][0] * A + bary[pix][1] * B + bary[pix][2] * C);
        v.base_normal.push_back((B - A).cross(C - A).normalized());
        v.face.push_back(t);
        v.barycentric.push_back(bary[pix]);
    }
}

} // namespace detail

/// Rasterizes the canonical template into the given front/back orthographic cameras with a
/// z-buffer. Every vertex must project inside the image with at least `margin` of the image
/// size to spare.
inline CanonicalTemplate
build_canonical_template(const SkinnedTemplate &mesh, const std::array<OrthoCamera<double>, 2> &cams,
                         double margin = 0.05) {
    mesh.validate();
    CanonicalTemplate ct;
    ct.mesh = mesh;
    for (int s = 0; s < 2; ++s) {
        const auto &cam = cams[s];
        GSAVATAR_CHECK(cam.width > 0 && cam.height > 0 && cam.pixels_per_meter > 0, ConfigError,
                       "invalid template camera");
        GSAVATAR_CHECK(cam.width == cams[0].width && cam.height == cams[0].height, ConfigError,
                       "front and back maps must share a resolution");
        const double mx = margin * cam.width - 1e-9, my = margin * cam.height - 1e-9;
        for (const auto &p : mesh.vertices) {
            const Vec2<double> px = cam.to_pixel(p);
            GSAVATAR_CHECK(px.x() >= mx && px.x() <= cam.width - mx && px.y() >= my &&
                               px.y() <= cam.height - my,
                           ConfigError,
                           "template does not fit the orthographic frustum with the required margin");
        }
        ct.views[s].camera = cam;
        detail::rasterize_view(mesh, ct.views[s]);
    }
    GSAVATAR_CHECK(ct.num_valid() > 0, ConfigError, "template covers no map pixel");
    ct.base_weights.resize(ct.num_valid(), mesh.num_joints());
    int row = 0;
    for (int s = 0; s < 2; ++s) {
        const TemplateView &v = ct.views[s];
        for (int i = 0; i < v.num_valid(); ++i, ++row) {
            const auto &tri = mesh.triangles[v.face[i]];
            const Vec3d &b  = v.barycentric[i];
            ct.base_weights.row(row) = b[0] * mesh.weights.row(tri[0]) +
                                       b[1] * mesh.weights.row(tri[1]) +
                                       b[2] * mesh.weights.row(tri[2]);
            const double sum = ct.base_weights.row(row).sum();
            ct.base_weights.row(row) /= sum;
        }
    }
    return ct;
}

inline CanonicalTemplate
build_canonical_template(const SkinnedTemplate &mesh, int resolution) {
    return build_canonical_template(mesh, default_template_cameras(mesh, resolution));
}

} // namespace gsavatar
