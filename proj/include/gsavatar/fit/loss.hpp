// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/maps/gaussian_map.hpp"
#include "gsavatar/raster/image.hpp"

#include <cmath>
#include <limits>

namespace gsavatar {

/// PSNR reported for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

struct LossReport {
    double total = 0;
    double l1    = 0;
    double reg   = 0; // mean squared offset norm, before weighting
    double psnr  = 0;
};

template <class S, class T>
inline double
mse(const ImageT<S> &a, const ImageT<T> &b) {
    GSAVATAR_CHECK(a.width == b.width && a.height == b.height, ContractError, "image shapes differ");
    double acc = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = double(a.pixels[i]) - double(b.pixels[i]);
        acc += d * d;
    }
    return a.pixels.empty() ? 0.0 : acc / static_cast<double>(a.pixels.size());
}

/// 10·log10(1/MSE) for images in [0, 1]; kPsnrIdentical when MSE is zero.
template <class S, class T>
inline double
psnr(const ImageT<S> &a, const ImageT<T> &b) {
    const double m = mse(a, b);
    return m == 0 ? kPsnrIdentical : 10.0 * std::log10(1.0 / m);
}

/// L1 mean over all pixel channels plus λ_reg times the mean squared offset norm over valid
/// samples. Optionally writes dL/dimage and dL/doffset (M×3, row per sample).
template <class S>
inline LossReport
compute_loss(const ImageT<S> &rendered, const Image &gt, const GaussianMaps<S> &maps, double lambda_reg,
             ImageT<S> *d_image = nullptr, Eigen::Matrix<S, Eigen::Dynamic, 3, Eigen::RowMajor> *d_offset = nullptr) {
    GSAVATAR_CHECK(rendered.width == gt.width && rendered.height == gt.height, ContractError,
                   "rendered and ground-truth images differ in shape");
    LossReport r;
    const std::size_t n = rendered.pixels.size();
    const double inv_n  = n ? 1.0 / static_cast<double>(n) : 0.0;
    if (d_image) {
        *d_image = ImageT<S>(rendered.width, rendered.height);
    }
    double l1 = 0, sq = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = double(rendered.pixels[i]) - double(gt.pixels[i]);
        l1 += std::abs(d);
        sq += d * d;
        if (d_image) {
            d_image->pixels[i] = static_cast<S>(d > 0 ? inv_n : (d < 0 ? -inv_n : 0.0));
        }
    }
    r.l1            = l1 * inv_n;
    const int M     = maps.size();
    const double im = M ? 1.0 / M : 0.0;
    double reg      = 0;
    if (d_offset) {
        d_offset->resize(M, 3);
    }
    for (int i = 0; i < M; ++i) {
        const Vec3<S> o = maps.offset(i);
        reg += double(o.squaredNorm());
        if (d_offset) {
            d_offset->row(i) = (S(2.0 * lambda_reg * im) * o).transpose();
        }
    }
    r.reg   = reg * im;
    r.total = r.l1 + lambda_reg * r.reg;
    r.psnr  = sq == 0 ? kPsnrIdentical : 10.0 * std::log10(1.0 / (sq * inv_n));
    return r;
}

/// SSIM with an 11×11 Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1,
/// evaluated at every window position fully inside the image and averaged over positions and
/// channels.
template <class S, class T>
inline double
ssim(const ImageT<S> &a, const ImageT<T> &b) {
    GSAVATAR_CHECK(a.width == b.width && a.height == b.height, ContractError, "image shapes differ");
    constexpr int R = 5;
    GSAVATAR_CHECK(a.width >= 2 * R + 1 && a.height >= 2 * R + 1, ContractError,
                   "SSIM needs images of at least 11×11");
    double w1[2 * R + 1], wsum = 0;
    for (int k = -R; k <= R; ++k) {
        w1[k + R] = std::exp(-0.5 * k * k / (1.5 * 1.5));
        wsum += w1[k + R];
    }
    for (double &w : w1) {
        w /= wsum;
    }
    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    const int W = a.width, H = a.height;
    double total = 0;
    long count   = 0;
    // Separable moments: horizontal pass into buffers, then vertical per output pixel.
    std::vector<double> hx(static_cast<std::size_t>(W) * H * 5);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < H; ++y) {
            for (int x = R; x < W - R; ++x) {
                double m[5] = {0, 0, 0, 0, 0};
                for (int k = -R; k <= R; ++k) {
                    const double u = a.at(x + k, y, c), v = b.at(x + k, y, c), w = w1[k + R];
                    m[0] += w * u;
                    m[1] += w * v;
                    m[2] += w * u * u;
                    m[3] += w * v * v;
                    m[4] += w * u * v;
                }
                std::copy(m, m + 5, &hx[(static_cast<std::size_t>(y) * W + x) * 5]);
            }
        }
        for (int y = R; y < H - R; ++y) {
            for (int x = R; x < W - R; ++x) {
                double m[5] = {0, 0, 0, 0, 0};
                for (int k = -R; k <= R; ++k) {
                    const double *src = &hx[(static_cast<std::size_t>(y + k) * W + x) * 5];
                    for (int q = 0; q < 5; ++q) {
                        m[q] += w1[k + R] * src[q];
                    }
                }
                const double mu_a = m[0], mu_b = m[1];
                const double va = m[2] - mu_a * mu_a, vb = m[3] - mu_b * mu_b;
                const double cov = m[4] - mu_a * mu_b;
                total += ((2 * mu_a * mu_b + C1) * (2 * cov + C2)) /
                         ((mu_a * mu_a + mu_b * mu_b + C1) * (va + vb + C2));
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

} // namespace gsavatar
