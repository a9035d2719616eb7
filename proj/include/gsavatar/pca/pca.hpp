// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/log.hpp"
#include "gsavatar/io/binary.hpp"
#include "gsavatar/maps/position_maps.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cstdint>
#include <vector>

namespace gsavatar {

inline constexpr int kDefaultPcaComponents = 20;

/// Linear pose-conditioning subspace: x ≈ mean + components·β.
struct PcaModel {
    Eigen::VectorXd mean;         // 3M
    Eigen::MatrixXd components;   // 3M × N, orthonormal columns
    Eigen::VectorXd sigmas;       // N, non-increasing
    std::vector<std::int32_t> indices; // M global pixel indices (back view offset by H*W)
    int frames     = 0;           // T used at fit time
    int map_height = 0;
    int map_width  = 0;

    int
    dim() const {
        return static_cast<int>(mean.size());
    }
    int
    num_components() const {
        return static_cast<int>(components.cols());
    }
    int
    num_points() const {
        return static_cast<int>(indices.size());
    }
};

/// Fits a PCA model to the columns of `data` (3M × T). The thin SVD is computed as a
/// Householder QR of the centered data followed by an SVD of the small triangular factor.
/// If `n` exceeds the numerical rank it is reduced (to at least 1) with a warning.
inline PcaModel
fit_pca(const Eigen::MatrixXd &data, int n, std::vector<std::int32_t> indices, int map_height = 0,
        int map_width = 0) {
    const auto D = data.rows();
    const auto T = data.cols();
    GSAVATAR_CHECK(T >= 1 && D >= 1, ContractError, "PCA needs at least one frame");
    GSAVATAR_CHECK(n >= 1 && n <= T, ContractError, "PCA component count must lie in [1, T]");
    GSAVATAR_CHECK(static_cast<Eigen::Index>(indices.size()) * 3 == D, ContractError,
                   "PCA index list does not match the data dimension");

    PcaModel m;
    m.mean               = data.rowwise().mean();
    Eigen::MatrixXd Xc   = data.colwise() - m.mean;
    Eigen::MatrixXd U;
    Eigen::VectorXd s;
    if (D >= T) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(std::move(Xc));
        const Eigen::MatrixXd R = qr.matrixQR().topRows(T).triangularView<Eigen::Upper>();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(R, Eigen::ComputeFullU);
        s = svd.singularValues();
        U = qr.householderQ() * (Eigen::MatrixXd::Identity(D, T) * svd.matrixU());
    } else {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xc, Eigen::ComputeThinU);
        s = svd.singularValues();
        U = svd.matrixU();
    }
    const double tol = s.size() ? s[0] * static_cast<double>(std::max(D, T)) *
                                      std::numeric_limits<double>::epsilon()
                                : 0.0;
    int rank = 0;
    while (rank < s.size() && s[rank] > tol) {
        ++rank;
    }
    if (n > rank) {
        const int shrunk = std::max(rank, 1);
        warn("PCA: requested " + std::to_string(n) + " components but data rank is " +
             std::to_string(rank) + "; using " + std::to_string(shrunk));
        n = shrunk;
    }
    m.components = U.leftCols(n);
    for (int i = 0; i < n; ++i) {
        Eigen::Index arg;
        m.components.col(i).cwiseAbs().maxCoeff(&arg);
        if (m.components(arg, i) < 0) {
            m.components.col(i) *= -1.0;
        }
    }
    m.sigmas = T > 1 ? Eigen::VectorXd(s.head(n) / std::sqrt(double(T - 1)))
                     : Eigen::VectorXd(Eigen::VectorXd::Zero(n));
    m.indices    = std::move(indices);
    m.frames     = static_cast<int>(T);
    m.map_height = map_height;
    m.map_width  = map_width;
    return m;
}

inline PcaModel
fit_pca(const CanonicalTemplate &ct, const std::vector<PositionMaps> &frames, int n) {
    GSAVATAR_CHECK(!frames.empty(), ContractError, "PCA needs at least one frame");
    Eigen::MatrixXd X(3 * ct.num_valid(), static_cast<Eigen::Index>(frames.size()));
    for (std::size_t t = 0; t < frames.size(); ++t) {
        GSAVATAR_CHECK(static_cast<int>(frames[t].points.size()) == ct.num_valid(), ContractError,
                       "training position maps do not share the template mask");
        X.col(static_cast<Eigen::Index>(t)) = frames[t].flatten();
    }
    return fit_pca(X, n, ct.global_pixel_indices(), ct.views[0].height(), ct.views[0].width());
}

/// β = Sᵀ(x − x̄).
inline Eigen::VectorXd
pca_project(const PcaModel &m, const Eigen::VectorXd &x) {
    GSAVATAR_CHECK(x.size() == m.dim(), ContractError,
                   "PCA input has dimension " + std::to_string(x.size()) + ", model expects " +
                       std::to_string(m.dim()));
    return m.components.transpose() * (x - m.mean);
}

/// Clamps each βᵢ to [−2σᵢ, 2σᵢ].
inline Eigen::VectorXd
pca_clip(const PcaModel &m, const Eigen::VectorXd &beta) {
    GSAVATAR_CHECK(beta.size() == m.num_components(), ContractError, "coefficient length mismatch");
    return beta.cwiseMax(-2.0 * m.sigmas).cwiseMin(2.0 * m.sigmas);
}

/// x = S·β + x̄.
inline Eigen::VectorXd
pca_reconstruct(const PcaModel &m, const Eigen::VectorXd &beta) {
    GSAVATAR_CHECK(beta.size() == m.num_components(), ContractError, "coefficient length mismatch");
    return m.components * beta + m.mean;
}

inline void
check_pca_template(const PcaModel &m, const CanonicalTemplate &ct) {
    GSAVATAR_CHECK(m.indices == ct.global_pixel_indices(), ContractError,
                   "PCA model was fitted on a different template mask");
}

/// Gather → project → clip → reconstruct → scatter. Also returns the clipped coefficients.
inline PositionMaps
project_position_maps(const PcaModel &m, const CanonicalTemplate &ct, const PositionMaps &maps,
                      Eigen::VectorXd *clipped_beta = nullptr) {
    check_pca_template(m, ct);
    GSAVATAR_CHECK(static_cast<int>(maps.points.size()) == m.num_points(), ContractError,
                   "position maps do not share the PCA mask");
    const Eigen::VectorXd beta = pca_clip(m, pca_project(m, maps.flatten()));
    if (clipped_beta) {
        *clipped_beta = beta;
    }
    return PositionMaps::unflatten(pca_reconstruct(m, beta));
}

// Checkpoint: "APCA", uint32 version, uint32 M, N, T, H, W, then float32 mean (3M),
// components column-major (3M×N), sigmas (N), int32 pixel indices (M).
inline constexpr std::uint32_t kPcaFormatVersion = 1;

inline void
save_pca(const std::string &path, const PcaModel &m) {
    io::BinaryWriter w;
    w.put_magic("APCA");
    w.put<std::uint32_t>(kPcaFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.num_points()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.num_components()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.frames));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.map_height));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.map_width));
    w.put_range<float>(m.mean.data(), m.mean.data() + m.mean.size());
    w.put_range<float>(m.components.data(), m.components.data() + m.components.size());
    w.put_range<float>(m.sigmas.data(), m.sigmas.data() + m.sigmas.size());
    w.put_range<std::int32_t>(m.indices.begin(), m.indices.end());
    w.save(path);
}

inline PcaModel
load_pca(const std::string &path) {
    io::BinaryReader r(path);
    r.expect_magic("APCA");
    const auto version = r.get<std::uint32_t>();
    GSAVATAR_CHECK(version == kPcaFormatVersion, IoError,
                   path + ": unsupported PCA format version " + std::to_string(version));
    const auto M = r.get<std::uint32_t>(), N = r.get<std::uint32_t>();
    PcaModel m;
    m.frames     = static_cast<int>(r.get<std::uint32_t>());
    m.map_height = static_cast<int>(r.get<std::uint32_t>());
    m.map_width  = static_cast<int>(r.get<std::uint32_t>());
    m.mean.resize(3 * M);
    m.components.resize(3 * M, N);
    m.sigmas.resize(N);
    for (Eigen::Index i = 0; i < m.mean.size(); ++i) m.mean[i] = r.get<float>();
    for (Eigen::Index i = 0; i < m.components.size(); ++i) m.components.data()[i] = r.get<float>();
    for (Eigen::Index i = 0; i < m.sigmas.size(); ++i) m.sigmas[i] = r.get<float>();
    m.indices.resize(M);
    for (auto &idx : m.indices) idx = r.get<std::int32_t>();
    GSAVATAR_CHECK(r.at_end(), IoError, path + ": trailing bytes");
    return m;
}

} // namespace gsavatar
