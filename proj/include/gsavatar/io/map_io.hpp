// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/gaussian.hpp"
#include "gsavatar/io/binary.hpp"
#include "gsavatar/io/png.hpp"
#include "gsavatar/maps/map_image.hpp"

#include <limits>

namespace gsavatar::io {

// Map file: "GMAP", int32 height, int32 width, int32 channels, then height*width*channels
// little-endian float32 values (row-major, channels interleaved).

template <class S>
inline void
write_map(const std::string &path, const MapImage<S> &map) {
    BinaryWriter w;
    w.put_magic("GMAP");
    w.put<std::int32_t>(map.height);
    w.put<std::int32_t>(map.width);
    w.put<std::int32_t>(map.channels);
    w.put_range<float>(map.data.begin(), map.data.end());
    w.save(path);
}

inline MapImage<float>
read_map(const std::string &path) {
    BinaryReader r(path);
    r.expect_magic("GMAP");
    const int h = r.get<std::int32_t>(), w = r.get<std::int32_t>(), c = r.get<std::int32_t>();
    GSAVATAR_CHECK(h > 0 && w > 0 && c > 0, IoError, path + ": bad map header");
    MapImage<float> m(h, w, c);
    for (auto &v : m.data) {
        v = r.get<float>();
    }
    GSAVATAR_CHECK(r.at_end(), IoError, path + ": trailing bytes");
    return m;
}

/// PNG preview of channels [first, first+3): each channel min/max-normalized over `mask`
/// pixels; pixels outside the mask are black.
template <class S>
inline void
write_map_preview(const std::string &path, const MapImage<S> &map, const std::vector<std::uint8_t> &mask,
                  int first_channel = 0) {
    GSAVATAR_CHECK(first_channel >= 0 && first_channel < map.channels, ContractError,
                   "preview channel out of range");
    const int n = map.height * map.width;
    GSAVATAR_CHECK(static_cast<int>(mask.size()) == n, ContractError, "preview mask size mismatch");
    double lo[3], hi[3];
    for (int c = 0; c < 3; ++c) {
        lo[c] = std::numeric_limits<double>::infinity();
        hi[c] = -lo[c];
    }
    const int nc = std::min(3, map.channels - first_channel);
    for (int p = 0; p < n; ++p) {
        if (!mask[p]) {
            continue;
        }
        for (int c = 0; c < nc; ++c) {
            const double v = map.pixel(p)[first_channel + c];
            lo[c]          = std::min(lo[c], v);
            hi[c]          = std::max(hi[c], v);
        }
    }
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(n) * 3, 0);
    for (int p = 0; p < n; ++p) {
        if (!mask[p]) {
            continue;
        }
        for (int c = 0; c < 3; ++c) {
            const int src = std::min(c, nc - 1);
            const double range = hi[src] - lo[src];
            const double v     = range > 0 ? (map.pixel(p)[first_channel + src] - lo[src]) / range : 0.5;
            rgb[static_cast<std::size_t>(p) * 3 + c] = to_byte(static_cast<float>(v));
        }
    }
    write_png_rgb8(path, map.width, map.height, rgb);
}

// Gaussian file: "GSPL", uint32 count, then count records of 14 little-endian float32:
// position(3), quaternion wxyz(4), log_scale(3), opacity_logit, color(3).

template <class S>
inline void
write_gaussians(const std::string &path, const std::vector<Gaussian3D<S>> &gs) {
    BinaryWriter w;
    w.put_magic("GSPL");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(gs.size()));
    for (const auto &g : gs) {
        w.put_range<float>(g.position.data(), g.position.data() + 3);
        w.put_range<float>(g.rotation.data(), g.rotation.data() + 4);
        w.put_range<float>(g.log_scale.data(), g.log_scale.data() + 3);
        w.put<float>(static_cast<float>(g.opacity_logit));
        w.put_range<float>(g.color.data(), g.color.data() + 3);
    }
    w.save(path);
}

inline std::vector<Gaussian3D<float>>
read_gaussians(const std::string &path) {
    BinaryReader r(path);
    r.expect_magic("GSPL");
    const auto n = r.get<std::uint32_t>();
    std::vector<Gaussian3D<float>> gs(n);
    for (auto &g : gs) {
        for (int k = 0; k < 3; ++k) g.position[k] = r.get<float>();
        for (int k = 0; k < 4; ++k) g.rotation[k] = r.get<float>();
        for (int k = 0; k < 3; ++k) g.log_scale[k] = r.get<float>();
        g.opacity_logit = r.get<float>();
        for (int k = 0; k < 3; ++k) g.color[k] = r.get<float>();
    }
    GSAVATAR_CHECK(r.at_end(), IoError, path + ": trailing bytes");
    return gs;
}

} // namespace gsavatar::io
