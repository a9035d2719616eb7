// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/maps/canonical_template.hpp"

#include <vector>

namespace gsavatar {

/// Dense H×W×C map, row-major, channels interleaved.
template <class S> struct MapImage {
    int height   = 0;
    int width    = 0;
    int channels = 0;
    std::vector<S> data;

    MapImage() = default;
    MapImage(int h, int w, int c)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, S(0)) {}

    S *
    pixel(int idx) {
        return data.data() + static_cast<std::size_t>(idx) * channels;
    }
    const S *
    pixel(int idx) const {
        return data.data() + static_cast<std::size_t>(idx) * channels;
    }
};

/// Scatters per-sample rows (global sample order) of one view into a dense map; pixels outside
/// the mask are exactly zero.
template <class S, class Rows>
inline MapImage<S>
scatter_view(const CanonicalTemplate &ct, MapSide side, const Rows &rows, int channels) {
    const TemplateView &v = ct.view(side);
    MapImage<S> out(v.height(), v.width(), channels);
    const int offset = side == MapSide::kFront ? 0 : ct.view(MapSide::kFront).num_valid();
    for (int i = 0; i < v.num_valid(); ++i) {
        S *dst = out.pixel(v.valid_pixels[i]);
        for (int c = 0; c < channels; ++c) {
            dst[c] = static_cast<S>(rows(offset + i, c));
        }
    }
    return out;
}

} // namespace gsavatar
