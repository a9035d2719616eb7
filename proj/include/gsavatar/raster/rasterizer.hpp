// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/parallel.hpp"
#include "gsavatar/core/projection.hpp"
#include "gsavatar/raster/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <span>
#include <vector>

namespace gsavatar {

/// Tunables of the tile rasterizer. The defaults are the documented engineering values.
struct RasterSettings {
    int tile_size = 16;
    /// A pixel stops compositing once its transmittance drops below this value. The bound on
    /// the color it can still miss is this value times the max color, which keeps the tiled
    /// result within 1e-5 of the brute-force reference.
    double transmittance_epsilon = 1e-5;
};

namespace raster {

inline constexpr double kAlphaClamp = 0.999;
/// Added to the diagonal of every 2D covariance before inversion (pixels^2).
inline constexpr double kCovDilation = 0.3;
/// Kernel support in Mahalanobis units; beyond it a splat contributes nothing.
inline constexpr double kSupportSigmas = 3.0;
inline constexpr double kMaxMahalanobisSq = kSupportSigmas * kSupportSigmas;

/// Splat data in the form the pixel loops consume.
template <class S> struct PreparedSplat {
    S mx, my;
    S ca, cb, cc; // conic: inverse of the dilated covariance
    S opacity;
    S r, g, b;
    bool valid;
};

template <class S>
inline PreparedSplat<S>
prepare_splat(const Gaussian2DSplat<S> &s) {
    PreparedSplat<S> p{};
    const S a   = s.cov2d[0] + S(kCovDilation);
    const S b   = s.cov2d[1];
    const S c   = s.cov2d[2] + S(kCovDilation);
    const S det = a * c - b * b;
    p.mx        = s.mean2d[0];
    p.my        = s.mean2d[1];
    p.valid     = det > S(0) && std::isfinite(static_cast<double>(det)) &&
              std::isfinite(static_cast<double>(p.mx)) &&
              std::isfinite(static_cast<double>(p.my)) && s.opacity > S(0);
    if (p.valid) {
        const S inv = S(1) / det;
        p.ca        = c * inv;
        p.cb        = -b * inv;
        p.cc        = a * inv;
    }
    p.opacity = s.opacity;
    p.r       = s.color[0];
    p.g       = s.color[1];
    p.b       = s.color[2];
    return p;
}

/// Blending weight of a splat at pixel center (px, py). Returns false when the pixel lies
/// outside the kernel support. `clamped` reports whether the 0.999 ceiling was hit.
template <class S>
inline bool
splat_alpha(const PreparedSplat<S> &p, S px, S py, S &alpha, S &gauss, bool &clamped) {
    const S dx = px - p.mx;
    const S dy = py - p.my;
    const S q  = p.ca * dx * dx + S(2) * p.cb * dx * dy + p.cc * dy * dy;
    if (!(q <= S(kMaxMahalanobisSq))) {
        return false;
    }
    gauss           = std::exp(S(-0.5) * q);
    const S a       = p.opacity * gauss;
    clamped         = a > S(kAlphaClamp);
    alpha           = clamped ? S(kAlphaClamp) : a;
    return alpha > S(0);
}

/// Half extents of the ellipse q <= 9 in x and y (exact axis-aligned bounding box).
template <class S>
inline void
support_extent(const Gaussian2DSplat<S> &s, S &rx, S &ry) {
    rx = S(kSupportSigmas) * std::sqrt(std::max(S(0), s.cov2d[0] + S(kCovDilation)));
    ry = S(kSupportSigmas) * std::sqrt(std::max(S(0), s.cov2d[2] + S(kCovDilation)));
}

inline std::uint64_t
fnv_mix(std::uint64_t h, std::uint64_t v) {
    h ^= v;
    return h * 1099511628211ull;
}

template <class S>
inline std::uint64_t
splat_digest(std::span<const Gaussian2DSplat<S>> splats) {
    std::uint64_t h = 1469598103934665603ull;
    h               = fnv_mix(h, splats.size());
    auto mix_scalar = [&](S v) {
        std::uint64_t bits = 0;
        if constexpr (sizeof(S) == 8) {
            std::memcpy(&bits, &v, 8);
        } else {
            std::uint32_t b32;
            std::memcpy(&b32, &v, sizeof(S));
            bits = b32;
        }
        h = fnv_mix(h, bits);
    };
    for (const auto &s : splats) {
        mix_scalar(s.mean2d[0]);
        mix_scalar(s.mean2d[1]);
        mix_scalar(s.cov2d[0]);
        mix_scalar(s.cov2d[1]);
        mix_scalar(s.cov2d[2]);
        mix_scalar(s.opacity);
        mix_scalar(s.color[0]);
        mix_scalar(s.color[1]);
        mix_scalar(s.color[2]);
    }
    return h;
}

} // namespace raster

/// Stable ascending-depth order: ties keep input order.
template <class S>
inline std::vector<std::uint32_t>
sort_splats(std::span<const Gaussian2DSplat<S>> splats) {
    std::vector<std::uint32_t> order(splats.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return splats[a].depth < splats[b].depth;
    });
    return order;
}

template <class T>
inline std::vector<T>
apply_permutation(std::span<const T> items, std::span<const std::uint32_t> order) {
    std::vector<T> out;
    out.reserve(order.size());
    for (std::uint32_t i : order) {
        out.push_back(items[i]);
    }
    return out;
}

/// Brute-force compositing of already depth-sorted splats. Every pixel visits every splat and
/// never terminates early; this is the oracle for the tiled path.
template <class S>
inline ImageT<S>
rasterize_reference(std::span<const Gaussian2DSplat<S>> splats, int width, int height) {
    ImageT<S> img(width, height);
    std::vector<raster::PreparedSplat<S>> prep;
    prep.reserve(splats.size());
    for (const auto &s : splats) {
        prep.push_back(raster::prepare_splat(s));
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const S px = S(x) + S(0.5), py = S(y) + S(0.5);
            S T = S(1), r = S(0), g = S(0), b = S(0);
            for (const auto &p : prep) {
                if (!p.valid) {
                    continue;
                }
                S alpha, gauss;
                bool clamped;
                if (!raster::splat_alpha(p, px, py, alpha, gauss, clamped)) {
                    continue;
                }
                const S w = alpha * T;
                r += p.r * w;
                g += p.g * w;
                b += p.b * w;
                T *= (S(1) - alpha);
            }
            img.at(x, y, 0) = r;
            img.at(x, y, 1) = g;
            img.at(x, y, 2) = b;
        }
    }
    return img;
}

/// Per-tile lists of splat indices, in depth order within each tile.
struct TileBins {
    int tiles_x   = 0;
    int tiles_y   = 0;
    int tile_size = 16;
    std::vector<std::uint32_t> offsets; // tiles_x * tiles_y + 1
    std::vector<std::uint32_t> entries;
    std::vector<std::array<std::int32_t, 4>> pixel_rect; // per splat: x0, y0, x1, y1 (inclusive)

    std::size_t
    tile_count() const {
        return static_cast<std::size_t>(tiles_x) * tiles_y;
    }
};

/// Bins splats into tiles by the bounding box of their kernel support.
template <class S>
inline TileBins
bin_splats(std::span<const Gaussian2DSplat<S>> splats, int width, int height, int tile_size) {
    TileBins bins;
    bins.tile_size = tile_size;
    bins.tiles_x   = (width + tile_size - 1) / tile_size;
    bins.tiles_y   = (height + tile_size - 1) / tile_size;
    const std::size_t n = splats.size();
    std::vector<std::int32_t> rect(n * 4, 0);
    std::vector<std::uint32_t> counts(bins.tile_count() + 1, 0);
    bins.pixel_rect.assign(n, {0, 0, -1, -1});
    for (std::size_t i = 0; i < n; ++i) {
        const auto &s = splats[i];
        std::int32_t *r = &rect[i * 4];
        r[0] = r[1] = 0;
        r[2] = r[3] = -1;
        if (!raster::prepare_splat(s).valid) {
            continue;
        }
        S rx, ry;
        raster::support_extent(s, rx, ry);
        // pixel i is covered when its center i + 0.5 is within [m - r, m + r]; pad for rounding
        const double pad = 1e-3;
        const double x0 = std::ceil(double(s.mean2d[0] - rx) - 0.5 - pad);
        const double x1 = std::floor(double(s.mean2d[0] + rx) - 0.5 + pad);
        const double y0 = std::ceil(double(s.mean2d[1] - ry) - 0.5 - pad);
        const double y1 = std::floor(double(s.mean2d[1] + ry) - 0.5 + pad);
        if (x1 < 0 || y1 < 0 || x0 > width - 1 || y0 > height - 1 || x0 > x1 || y0 > y1) {
            continue;
        }
        const int px0 = static_cast<int>(std::max(0.0, x0));
        const int px1 = static_cast<int>(std::min<double>(width - 1, x1));
        const int py0 = static_cast<int>(std::max(0.0, y0));
        const int py1 = static_cast<int>(std::min<double>(height - 1, y1));
        bins.pixel_rect[i] = {px0, py0, px1, py1};
        r[0] = px0 / tile_size;
        r[1] = py0 / tile_size;
        r[2] = px1 / tile_size;
        r[3] = py1 / tile_size;
        for (int ty = r[1]; ty <= r[3]; ++ty) {
            for (int tx = r[0]; tx <= r[2]; ++tx) {
                ++counts[static_cast<std::size_t>(ty) * bins.tiles_x + tx];
            }
        }
    }
    bins.offsets.assign(bins.tile_count() + 1, 0);
    for (std::size_t t = 0; t < bins.tile_count(); ++t) {
        bins.offsets[t + 1] = bins.offsets[t] + counts[t];
    }
    bins.entries.resize(bins.offsets.back());
    std::vector<std::uint32_t> cursor(bins.offsets.begin(), bins.offsets.end() - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t *r = &rect[i * 4];
        for (int ty = r[1]; ty <= r[3]; ++ty) {
            for (int tx = r[0]; tx <= r[2]; ++tx) {
                bins.entries[cursor[static_cast<std::size_t>(ty) * bins.tiles_x + tx]++] =
                    static_cast<std::uint32_t>(i);
            }
        }
    }
    return bins;
}

/// Output of the tiled forward pass plus everything the backward pass needs.
template <class S> struct ForwardResult {
    ImageT<S> image;
    std::vector<S> transmittance;           // final per-pixel transmittance
    std::vector<std::uint32_t> contributors; // splats blended into each pixel
    std::vector<std::uint32_t> stop_entry;   // tile-list entries traversed per pixel
    TileBins bins;
    std::size_t splat_count = 0;
    std::uint64_t digest    = 0;
};

/// Tile-based forward compositing of depth-sorted splats. Colors match rasterize_reference
/// up to the early-termination bound.
template <class S>
inline ForwardResult<S>
rasterize_forward(std::span<const Gaussian2DSplat<S>> splats, int width, int height,
                  const RasterSettings &settings = {}) {
    ForwardResult<S> out;
    out.image = ImageT<S>(width, height);
    out.transmittance.assign(out.image.pixel_count(), S(1));
    out.contributors.assign(out.image.pixel_count(), 0);
    out.stop_entry.assign(out.image.pixel_count(), 0);
    out.splat_count = splats.size();
    out.digest      = raster::splat_digest(splats);
    out.bins        = bin_splats(splats, width, height, settings.tile_size);

    std::vector<raster::PreparedSplat<S>> prep(splats.size());
    parallel_for_blocks(splats.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            prep[i] = raster::prepare_splat(splats[i]);
        }
    });

    const TileBins &bins = out.bins;
    const S eps          = S(settings.transmittance_epsilon);
    const int ts         = bins.tile_size;
    // Within a tile, splats are visited in depth order and each updates only the pixels of its
    // support box; every pixel therefore sees the same sequence of blends as a per-pixel loop
    // over the tile list, without evaluating the kernel where it is known to be zero.
    parallel_for(bins.tile_count(), [&](std::size_t tile) {
        const int tx = static_cast<int>(tile % bins.tiles_x);
        const int ty = static_cast<int>(tile / bins.tiles_x);
        const std::uint32_t begin = bins.offsets[tile];
        const std::uint32_t end   = bins.offsets[tile + 1];
        const int x0 = tx * ts, y0 = ty * ts;
        const int x_end = std::min(width, x0 + ts);
        const int y_end = std::min(height, y0 + ts);
        const int tw    = x_end - x0;
        const int npix  = tw * (y_end - y0);
        std::vector<S> T(npix, S(1)), r(npix, S(0)), g(npix, S(0)), b(npix, S(0));
        std::vector<std::uint32_t> count(npix, 0), stop(npix, end - begin);
        std::vector<char> done(npix, 0);
        int remaining = npix;
        for (std::uint32_t k = begin; k < end && remaining > 0; ++k) {
            const std::uint32_t id = bins.entries[k];
            const auto &p          = prep[id];
            const auto &box        = bins.pixel_rect[id];
            const int bx1 = std::min(box[2], x_end - 1), by1 = std::min(box[3], y_end - 1);
            for (int y = std::max(box[1], y0); y <= by1; ++y) {
                for (int x = std::max(box[0], x0); x <= bx1; ++x) {
                    const int l = (y - y0) * tw + (x - x0);
                    if (done[l]) {
                        continue;
                    }
                    S alpha, gauss;
                    bool clamped;
                    if (!raster::splat_alpha(p, S(x) + S(0.5), S(y) + S(0.5), alpha, gauss, clamped)) {
                        continue;
                    }
                    const S w = alpha * T[l];
                    r[l] += p.r * w;
                    g[l] += p.g * w;
                    b[l] += p.b * w;
                    T[l] *= (S(1) - alpha);
                    ++count[l];
                    if (T[l] < eps) {
                        done[l] = 1;
                        stop[l] = k + 1 - begin;
                        --remaining;
                    }
                }
            }
        }
        for (int y = y0; y < y_end; ++y) {
            for (int x = x0; x < x_end; ++x) {
                const int l           = (y - y0) * tw + (x - x0);
                const std::size_t pix = static_cast<std::size_t>(y) * width + x;
                out.image.pixels[pix * 3 + 0] = r[l];
                out.image.pixels[pix * 3 + 1] = g[l];
                out.image.pixels[pix * 3 + 2] = b[l];
                out.transmittance[pix]         = T[l];
                out.contributors[pix]          = count[l];
                out.stop_entry[pix]            = stop[l];
            }
        }
    });
    return out;
}

/// dL/d(splat attributes). d_cov2d is with respect to (xx, xy, yy) of the undilated covariance,
/// xy counted once.
template <class S> struct RasterGradients {
    std::vector<Vec2<S>> d_mean2d;
    std::vector<Vec3<S>> d_cov2d;
    std::vector<S> d_opacity;
    std::vector<Vec3<S>> d_color;

    explicit RasterGradients(std::size_t n = 0)
        : d_mean2d(n, Vec2<S>::Zero()), d_cov2d(n, Vec3<S>::Zero()), d_opacity(n, S(0)),
          d_color(n, Vec3<S>::Zero()) {}
};

/// Analytic adjoint of rasterize_forward. Pixels are replayed back to front; per-entry partials
/// are reduced into per-splat gradients in tile order, so the result does not depend on the
/// thread count.
template <class S>
inline RasterGradients<S>
rasterize_backward(std::span<const Gaussian2DSplat<S>> splats, const ForwardResult<S> &fwd,
                   const ImageT<S> &d_image) {
    GSAVATAR_CHECK(fwd.splat_count == splats.size(), ContractError,
                   "rasterize_backward: splat count differs from the forward pass");
    GSAVATAR_CHECK(d_image.same_shape(fwd.image), ContractError,
                   "rasterize_backward: gradient image shape differs from the forward image");
    GSAVATAR_CHECK(raster::splat_digest(splats) == fwd.digest, ContractError,
                   "rasterize_backward: splats differ from those given to the forward pass");

    const int width = fwd.image.width, height = fwd.image.height;
    const TileBins &bins = fwd.bins;
    std::vector<raster::PreparedSplat<S>> prep(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        prep[i] = raster::prepare_splat(splats[i]);
    }

    constexpr int kStride = 9; // mean(2) cov(3) opacity(1) color(3)
    std::vector<S> entry_grads(bins.entries.size() * kStride, S(0));
    const int ts = bins.tile_size;

    parallel_for(bins.tile_count(), [&](std::size_t tile) {
        const int tx = static_cast<int>(tile % bins.tiles_x);
        const int ty = static_cast<int>(tile / bins.tiles_x);
        const std::uint32_t begin = bins.offsets[tile];
        const int x_end = std::min(width, (tx + 1) * ts);
        const int y_end = std::min(height, (ty + 1) * ts);
        for (int y = ty * ts; y < y_end; ++y) {
            for (int x = tx * ts; x < x_end; ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * width + x;
                const S dr = d_image.pixels[pix * 3 + 0];
                const S dg = d_image.pixels[pix * 3 + 1];
                const S db = d_image.pixels[pix * 3 + 2];
                if (dr == S(0) && dg == S(0) && db == S(0)) {
                    continue;
                }
                const S px = S(x) + S(0.5), py = S(y) + S(0.5);
                S T  = fwd.transmittance[pix];
                S ar = S(0), ag = S(0), ab = S(0); // color composited behind, normalized
                for (std::uint32_t k = begin + fwd.stop_entry[pix]; k-- > begin;) {
                    const auto &p = prep[bins.entries[k]];
                    S alpha, gauss;
                    bool clamped;
                    if (!raster::splat_alpha(p, px, py, alpha, gauss, clamped)) {
                        continue;
                    }
                    const S one_minus = S(1) - alpha;
                    const S T_before  = T / one_minus;
                    const S w         = alpha * T_before;
                    S *eg             = &entry_grads[static_cast<std::size_t>(k) * kStride];
                    eg[6] += w * dr;
                    eg[7] += w * dg;
                    eg[8] += w * db;
                    const S d_alpha =
                        T_before * ((p.r - ar) * dr + (p.g - ag) * dg + (p.b - ab) * db);
                    ar = alpha * p.r + one_minus * ar;
                    ag = alpha * p.g + one_minus * ag;
                    ab = alpha * p.b + one_minus * ab;
                    T  = T_before;
                    if (clamped) {
                        continue;
                    }
                    eg[5] += d_alpha * gauss;
                    // alpha = o * exp(-q/2)
                    const S d_q = S(-0.5) * alpha * d_alpha;
                    const S dx  = px - p.mx;
                    const S dy  = py - p.my;
                    const S wx  = p.ca * dx + p.cb * dy; // conic * d
                    const S wy  = p.cb * dx + p.cc * dy;
                    eg[0] += S(-2) * d_q * wx;
                    eg[1] += S(-2) * d_q * wy;
                    eg[2] += -d_q * wx * wx;
                    eg[3] += S(-2) * d_q * wx * wy;
                    eg[4] += -d_q * wy * wy;
                }
            }
        }
    });

    RasterGradients<S> grads(splats.size());
    for (std::size_t k = 0; k < bins.entries.size(); ++k) {
        const std::uint32_t i = bins.entries[k];
        const S *eg           = &entry_grads[k * kStride];
        grads.d_mean2d[i] += Vec2<S>(eg[0], eg[1]);
        grads.d_cov2d[i] += Vec3<S>(eg[2], eg[3], eg[4]);
        grads.d_opacity[i] += eg[5];
        grads.d_color[i] += Vec3<S>(eg[6], eg[7], eg[8]);
    }
    return grads;
}

} // namespace gsavatar
