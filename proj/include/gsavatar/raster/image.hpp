// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/error.hpp"

#include <cstddef>
#include <vector>

namespace gsavatar {

/// Row-major interleaved RGB image.
template <class S> struct ImageT {
    int width  = 0;
    int height = 0;
    std::vector<S> pixels;

    ImageT() = default;
    ImageT(int w, int h, S fill = S(0))
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

    std::size_t
    pixel_count() const {
        return static_cast<std::size_t>(width) * height;
    }

    S &
    at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    const S &
    at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    bool
    same_shape(const ImageT &o) const {
        return width == o.width && height == o.height;
    }

    template <class T>
    ImageT<T>
    cast() const {
        ImageT<T> out;
        out.width  = width;
        out.height = height;
        out.pixels.assign(pixels.begin(), pixels.end());
        return out;
    }
};

using Image = ImageT<float>;

} // namespace gsavatar
