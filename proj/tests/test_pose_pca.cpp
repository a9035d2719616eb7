// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/pca/pca.hpp"
#include "gsavatar/synthetic/body.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace gsavatar;

namespace {

std::vector<std::int32_t>
iota_indices(int m) {
    std::vector<std::int32_t> idx(m);
    for (int i = 0; i < m; ++i) {
        idx[i] = i;
    }
    return idx;
}

// Random data of exact rank r (after centering) in dimension 3m with T frames.
Eigen::MatrixXd
low_rank_data(std::mt19937_64 &rng, int m, int T, int r) {
    std::normal_distribution<double> n(0, 1);
    Eigen::MatrixXd basis(3 * m, r), coeff(r, T);
    for (Eigen::Index i = 0; i < basis.size(); ++i) basis.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < coeff.size(); ++i) coeff.data()[i] = n(rng);
    Eigen::VectorXd offset(3 * m);
    for (Eigen::Index i = 0; i < offset.size(); ++i) offset[i] = n(rng);
    return (basis * coeff).colwise() + offset;
}

struct WarningCapture {
    std::vector<std::string> messages;
    WarningSink previous;
    WarningCapture() {
        previous = set_warning_sink([this](const std::string &m) { messages.push_back(m); });
    }
    ~WarningCapture() { set_warning_sink(previous); }
};

} // namespace

TEST(PcaFit, IdenticalFramesHaveZeroSigma) {
    WarningCapture warnings;
    Eigen::MatrixXd X(6, 4);
    X.colwise() = Eigen::VectorXd::LinSpaced(6, -1, 1);
    const auto m = fit_pca(X, 3, iota_indices(2));
    EXPECT_EQ(m.num_components(), 1);
    EXPECT_EQ(warnings.messages.size(), 1u);
    EXPECT_EQ(m.sigmas[0], 0.0);
    EXPECT_LT((m.mean - X.col(0)).norm(), 1e-15);
}

TEST(PcaFit, TwoFramesOneDirection) {
    Eigen::MatrixXd X(9, 2);
    const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(9, 0, 2);
    Eigen::VectorXd d(9);
    d << 1, -2, 0.5, 0, 3, 1, -1, 0, 2;
    X.col(0) = a;
    X.col(1) = a + d;
    const auto m = fit_pca(X, 1, iota_indices(3));
    ASSERT_EQ(m.num_components(), 1);
    EXPECT_NEAR(std::abs(m.components.col(0).dot(d.normalized())), 1.0, 1e-12);
    const double half = 0.5 * d.norm();
    EXPECT_NEAR(m.sigmas[0], half * std::sqrt(2.0) / std::sqrt(1.0), 1e-12);
}

TEST(PcaFit, OrthonormalSortedAndSignConvention) {
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd X = low_rank_data(rng, 40, 30, 25);
    const auto m            = fit_pca(X, kDefaultPcaComponents, iota_indices(40));
    ASSERT_EQ(m.num_components(), kDefaultPcaComponents);
    const Eigen::MatrixXd G = m.components.transpose() * m.components;
    EXPECT_LT((G - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff(), 1e-12);
    for (int i = 0; i + 1 < m.num_components(); ++i) {
        EXPECT_GE(m.sigmas[i], m.sigmas[i + 1]);
    }
    for (int i = 0; i < m.num_components(); ++i) {
        Eigen::Index arg;
        m.components.col(i).cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(m.components(arg, i), 0);
    }
    // Oracle: eigenvalues of the sample covariance equal σ².
    const Eigen::MatrixXd Xc = X.colwise() - X.rowwise().mean();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Xc.transpose() * Xc / 29.0);
    const Eigen::VectorXd ev = eig.eigenvalues().reverse();
    for (int i = 0; i < 20; ++i) {
        EXPECT_NEAR(m.sigmas[i] * m.sigmas[i], ev[i], 1e-9 * ev[0]);
    }
}

TEST(PcaFit, RankShrinkWarns) {
    WarningCapture warnings;
    std::mt19937_64 rng(2);
    const auto m = fit_pca(low_rank_data(rng, 10, 12, 4), 8, iota_indices(10));
    EXPECT_EQ(m.num_components(), 4);
    ASSERT_EQ(warnings.messages.size(), 1u);
    EXPECT_NE(warnings.messages[0].find("rank"), std::string::npos);
}

TEST(PcaProject, Examples) {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd X = low_rank_data(rng, 20, 15, 6);
    const auto m            = fit_pca(X, 6, iota_indices(20));
    EXPECT_LT(pca_project(m, m.mean).norm(), 1e-12);
    for (int i = 0; i < 6; ++i) {
        const Eigen::VectorXd b = pca_project(m, m.mean + m.components.col(i));
        EXPECT_LT((b - Eigen::VectorXd::Unit(6, i)).norm(), 1e-12);
    }
    for (int t = 0; t < X.cols(); ++t) {
        const Eigen::VectorXd rec = pca_reconstruct(m, pca_project(m, X.col(t)));
        EXPECT_LT((rec - X.col(t)).norm() / X.col(t).norm(), 1e-6);
    }
    EXPECT_THROW(pca_project(m, Eigen::VectorXd::Zero(5)), ContractError);
}

TEST(PcaClip, Examples) {
    PcaModel m;
    m.sigmas = Eigen::Vector3d(1.0, 0.5, 0.0);
    m.components.resize(3, 3);
    const Eigen::Vector3d inside(1.5, -0.9, 0.0);
    EXPECT_EQ(pca_clip(m, inside), inside);
    EXPECT_EQ(pca_clip(m, Eigen::Vector3d(3.0, -1.5, 0.0)), Eigen::Vector3d(2.0, -1.0, 0.0));
    EXPECT_EQ(pca_clip(m, Eigen::Vector3d(0, 0, 5.0))[2], 0.0);
    // Box projection: idempotent and non-expansive in max-norm.
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 3);
    for (int k = 0; k < 100; ++k) {
        const Eigen::Vector3d a(n(rng), n(rng), n(rng)), b(n(rng), n(rng), n(rng));
        EXPECT_EQ(pca_clip(m, pca_clip(m, a)), pca_clip(m, a));
        EXPECT_LE((pca_clip(m, a) - pca_clip(m, b)).cwiseAbs().maxCoeff(),
                  (a - b).cwiseAbs().maxCoeff());
    }
}

TEST(PcaReconstruct, FixedPointIdempotenceAndBound) {
    std::mt19937_64 rng(5);
    const auto m = fit_pca(low_rank_data(rng, 30, 20, 10), 8, iota_indices(30));
    EXPECT_EQ(pca_reconstruct(m, Eigen::VectorXd::Zero(8)), m.mean);
    std::normal_distribution<double> n(0, 5);
    for (int k = 0; k < 50; ++k) {
        Eigen::VectorXd beta(8), x(90);
        for (auto &v : beta) v = n(rng);
        for (auto &v : x) v = n(rng);
        EXPECT_LT((pca_project(m, pca_reconstruct(m, beta)) - beta).cwiseAbs().maxCoeff(),
                  1e-12 * (1 + beta.cwiseAbs().maxCoeff()));
        const Eigen::VectorXd once  = pca_reconstruct(m, pca_project(m, x));
        const Eigen::VectorXd twice = pca_reconstruct(m, pca_project(m, once));
        EXPECT_LT((once - twice).cwiseAbs().maxCoeff(), 1e-9);
        const Eigen::VectorXd clipped = pca_reconstruct(m, pca_clip(m, pca_project(m, x)));
        EXPECT_LE((clipped - m.mean).norm(), 2 * m.sigmas.sum() + 1e-12);
    }
}

class PcaMaps : public ::testing::Test {
  protected:
    void
    SetUp() override {
        ct_          = build_canonical_template(synthetic::make_body_template(), 64);
        skel_        = synthetic::make_body_skeleton();
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> u(-0.6, 0.6);
        for (int t = 0; t < 12; ++t) {
            Pose p = Pose::zero(skel_.size());
            for (auto &r : p.joint_rotations) r = Vec3d(u(rng), u(rng), u(rng));
            frames_.push_back(render_position_maps(ct_, skel_, p));
        }
    }
    CanonicalTemplate ct_;
    Skeleton skel_;
    std::vector<PositionMaps> frames_;
};

TEST_F(PcaMaps, TrainingFramesRoundTrip) {
    const auto m = fit_pca(ct_, frames_, 11);
    ASSERT_EQ(m.num_components(), 11);
    for (const auto &f : frames_) {
        const Eigen::VectorXd beta = pca_project(m, f.flatten());
        if ((beta.cwiseAbs().array() > 2 * m.sigmas.array()).any()) {
            continue;
        }
        const auto out = project_position_maps(m, ct_, f);
        for (std::size_t i = 0; i < f.points.size(); ++i) {
            ASSERT_LT((out.points[i] - f.points[i]).norm(), 1e-5);
        }
    }
    const auto mean_maps = PositionMaps::unflatten(m.mean);
    EXPECT_LT((project_position_maps(m, ct_, mean_maps).flatten() - m.mean).norm(), 1e-12);
}

TEST_F(PcaMaps, AdversarialMapsStayInBox) {
    const auto m = fit_pca(ct_, frames_, 8);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0, 0.5);
    for (int k = 0; k < 10; ++k) {
        PositionMaps wild = frames_[k % frames_.size()];
        for (auto &p : wild.points) p += Vec3d(n(rng), n(rng), n(rng)) + Vec3d(3, 0, 0);
        const auto out             = project_position_maps(m, ct_, wild);
        const Eigen::VectorXd beta = pca_project(m, out.flatten());
        for (int i = 0; i < m.num_components(); ++i) {
            EXPECT_LE(std::abs(beta[i]), 2 * m.sigmas[i] * (1 + 1e-9) + 1e-12);
        }
    }
}

TEST_F(PcaMaps, MaskMismatchAndCheckpoint) {
    const auto m = fit_pca(ct_, frames_, 5);
    const auto other = build_canonical_template(synthetic::make_body_template(), 32);
    EXPECT_THROW(project_position_maps(m, other, render_position_maps(other, skel_, Pose::zero(skel_.size()))),
                 ContractError);
    PositionMaps shorter = frames_[0];
    shorter.points.pop_back();
    EXPECT_THROW(project_position_maps(m, ct_, shorter), ContractError);

    const auto path = std::filesystem::temp_directory_path() / "gsavatar_test_pca.bin";
    save_pca(path, m);
    const auto back = load_pca(path);
    EXPECT_EQ(back.indices, m.indices);
    EXPECT_EQ(back.frames, 12);
    EXPECT_EQ(back.map_width, 64);
    EXPECT_LT((back.components - m.components).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((back.sigmas - m.sigmas).cwiseAbs().maxCoeff(), 1e-6 * m.sigmas[0]);
    // Re-saving the loaded model reproduces the file byte for byte.
    const auto path2 = std::filesystem::temp_directory_path() / "gsavatar_test_pca2.bin";
    save_pca(path2, back);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    EXPECT_TRUE(std::equal(std::istreambuf_iterator<char>(a), {}, std::istreambuf_iterator<char>(b)));
}
