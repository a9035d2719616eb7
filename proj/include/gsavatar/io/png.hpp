// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/error.hpp"
#include "gsavatar/raster/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace gsavatar::io {

inline std::uint8_t
to_byte(float v) {
    const float c = std::min(std::max(v, 0.0f), 1.0f);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

inline void
write_png_rgb8(const std::string &path, int width, int height, const std::vector<std::uint8_t> &rgb) {
    GSAVATAR_CHECK(rgb.size() == static_cast<std::size_t>(width) * height * 3, ContractError,
                   "PNG buffer size mismatch");
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width   = static_cast<png_uint_32>(width);
    img.height  = static_cast<png_uint_32>(height);
    img.format  = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, rgb.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw IoError("cannot write PNG " + path + ": " + msg);
    }
}

/// Writes an image quantized to 8 bits per channel (values clamped to [0, 1]).
inline void
write_png(const std::string &path, const Image &image) {
    std::vector<std::uint8_t> rgb(image.pixels.size());
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        rgb[i] = to_byte(image.pixels[i]);
    }
    write_png_rgb8(path, image.width, image.height, rgb);
}

inline Image
read_png(const std::string &path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw IoError("cannot read PNG " + path + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw IoError("cannot decode PNG " + path + ": " + msg);
    }
    Image out(static_cast<int>(img.width), static_cast<int>(img.height));
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        out.pixels[i] = rgb[i] / 255.0f;
    }
    return out;
}

} // namespace gsavatar::io
