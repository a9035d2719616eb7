// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/fit/loss.hpp"
#include "gsavatar/fit/predictor.hpp"
#include "gsavatar/kinematics/skeleton.hpp"
#include "gsavatar/maps/view_direction.hpp"
#include "gsavatar/pca/pca.hpp"
#include "gsavatar/raster/render.hpp"

#include <vector>

namespace gsavatar {

/// Template skinning weights in compressed sparse-row form (most samples have 1–2 joints).
class SparseSkinning {
  public:
    SparseSkinning() = default;
    explicit SparseSkinning(const CanonicalTemplate &ct) {
        offsets_.reserve(ct.num_valid() + 1);
        offsets_.push_back(0);
        for (int i = 0; i < ct.num_valid(); ++i) {
            for (int j = 0; j < ct.num_joints(); ++j) {
                const double w = ct.base_weights(i, j);
                if (w != 0.0) {
                    joints_.push_back(j);
                    weights_.push_back(w);
                }
            }
            offsets_.push_back(static_cast<int>(joints_.size()));
        }
    }

    int
    size() const {
        return static_cast<int>(offsets_.size()) - 1;
    }

    /// Blended linear part and translation of sample i under the given joint transforms.
    void
    blend(int i, std::span<const RigidTransform<double>> T, Mat3d &A, Vec3d &t) const {
        A.setZero();
        t.setZero();
        for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) {
            A += weights_[k] * T[joints_[k]].rotation;
            t += weights_[k] * T[joints_[k]].translation;
        }
    }

    bool
    is_rigid(int i) const {
        return offsets_[i + 1] - offsets_[i] == 1;
    }

  private:
    std::vector<int> offsets_, joints_;
    std::vector<double> weights_;
};

/// Gaussians extracted from a map pair and carried to world space by the global transform and
/// LBS. Keeps the per-sample blend so the adjoint can be applied.
template <class S> struct PosedGaussians {
    std::vector<Mat3<S>> blend_linear;   // A_i (global transform included)
    std::vector<Mat3<S>> blend_rotation; // polar(A_i)
    std::vector<Vec3<S>> positions;      // A_i (base_i + offset_i) + t_i
    std::vector<Mat3<S>> covariances;    // R_i Σ_i R_iᵀ
    std::vector<S> opacities;
    std::vector<Vec3<S>> colors;         // clamped to [0, 1]
};

template <class S>
inline PosedGaussians<S>
pose_gaussian_maps(const CanonicalTemplate &ct, const SparseSkinning &skin, const GaussianMaps<S> &maps,
                   const Skeleton &skel, const Pose &pose) {
    const int M = ct.num_valid();
    GSAVATAR_CHECK(maps.size() == M && skin.size() == M, ContractError,
                   "Gaussian maps do not match the template's valid samples");
    const auto T = apply_global(forward_kinematics(skel, pose), pose);
    PosedGaussians<S> g;
    g.blend_linear.resize(M);
    g.blend_rotation.resize(M);
    g.positions.resize(M);
    g.covariances.resize(M);
    g.opacities.resize(M);
    g.colors.resize(M);
    parallel_for_blocks(M, [&](std::size_t b, std::size_t e) {
        for (std::size_t ii = b; ii < e; ++ii) {
            const int i = static_cast<int>(ii);
            Mat3d A;
            Vec3d t;
            skin.blend(i, std::span<const RigidTransform<double>>(T), A, t);
            const Mat3d R  = skin.is_rigid(i) ? A : polar_rotation(A);
            const auto row = maps.values.row(i);
            const Vec3d pc = ct.base_position(i) + row.template segment<3>(gmap::kOffset).transpose().template cast<double>();
            g.blend_linear[i]   = A.cast<S>();
            g.blend_rotation[i] = R.cast<S>();
            g.positions[i]      = (A * pc + t).cast<S>();
            const Mat3<S> cov_c = build_covariance<S>(row.template segment<4>(gmap::kRotation).transpose(),
                                                      row.template segment<3>(gmap::kLogScale).transpose());
            g.covariances[i] = g.blend_rotation[i] * cov_c * g.blend_rotation[i].transpose();
            g.opacities[i]   = sigmoid(row(gmap::kOpacity));
            for (int c = 0; c < 3; ++c) {
                g.colors[i][c] = clamp_color(row(gmap::kColor + c));
            }
        }
    });
    return g;
}

template <class S>
inline RenderResult<S>
render_posed(const PosedGaussians<S> &g, const PerspectiveCamera<double> &cam, const RasterSettings &settings = {}) {
    return render_projected<S>(g.positions, g.covariances, g.opacities, g.colors, cam.cast<S>(), settings);
}

/// Immutable pieces shared by training and inference: the parameterized template, skeleton,
/// PCA model, and the template weights in sparse form.
class AvatarRig {
  public:
    AvatarRig(const CanonicalTemplate &ct, const Skeleton &skel, const PcaModel &pca)
        : ct_(&ct), skel_(&skel), pca_(&pca), skin_(ct) {
        GSAVATAR_CHECK(ct.num_joints() == skel.size(), ContractError,
                       "template weights and skeleton disagree on the joint count");
        check_pca_template(pca, ct);
    }

    const CanonicalTemplate &
    canonical() const {
        return *ct_;
    }
    const Skeleton &
    skeleton() const {
        return *skel_;
    }
    const PcaModel &
    pca() const {
        return *pca_;
    }
    const SparseSkinning &
    skinning() const {
        return skin_;
    }
    int
    num_samples() const {
        return ct_->num_valid();
    }

  private:
    const CanonicalTemplate *ct_;
    const Skeleton *skel_;
    const PcaModel *pca_;
    SparseSkinning skin_;
};

/// Pose conditioning of one frame seen from one camera.
struct Conditioning {
    Eigen::VectorXd beta_raw;  // Sᵀ(x − x̄) of the unprojected position maps
    Eigen::VectorXd beta;      // coefficients fed to the predictor (clipped when projecting)
    Vec3d view_mean = Vec3d::Zero();
    bool projected  = true;
};

/// Position maps → PCA coefficients (clipped to ±2σ when `use_projection`) and the mean view
/// direction. With projection, β are exactly the coefficients of the projected maps.
inline Conditioning
compute_conditioning(const AvatarRig &rig, const Pose &pose, const PerspectiveCamera<double> &cam,
                     bool use_projection = true) {
    const auto T         = forward_kinematics(rig.skeleton(), pose);
    const PositionMaps x = render_position_maps(rig.canonical(), std::span<const RigidTransform<double>>(T));
    Conditioning c;
    c.beta_raw  = pca_project(rig.pca(), x.flatten());
    c.beta      = use_projection ? pca_clip(rig.pca(), c.beta_raw) : c.beta_raw;
    c.projected = use_projection;
    c.view_mean = mean_view_direction(build_view_direction_map(x, pose, cam));
    return c;
}

/// Everything the backward pass needs from one forward evaluation.
template <class S> struct AvatarForward {
    Eigen::Matrix<S, Eigen::Dynamic, 1> beta; // normalized predictor input
    Vec3<S> view_mean;
    GaussianMaps<S> maps;
    PosedGaussians<S> posed;
    PerspectiveCamera<S> camera;
    RenderResult<S> render;

    const ImageT<S> &
    image() const {
        return render.forward.image;
    }
};

/// Predict → extract → global transform + LBS → project → rasterize.
template <class S>
inline AvatarForward<S>
avatar_forward(const AvatarRig &rig, const LinearGaussianPredictor<S> &pred, const Conditioning &cond,
               const Pose &pose, const PerspectiveCamera<double> &cam, const RasterSettings &settings = {}) {
    GSAVATAR_CHECK(pred.num_samples == rig.num_samples(), ContractError,
                   "predictor sample count differs from template");
    AvatarForward<S> f;
    f.beta      = normalize_coefficients<S>(cond.beta, rig.pca().sigmas);
    f.view_mean = cond.view_mean.cast<S>();
    f.maps      = predict_maps(pred, f.beta, f.view_mean);
    f.posed     = pose_gaussian_maps(rig.canonical(), rig.skinning(), f.maps, rig.skeleton(), pose);
    f.camera    = cam.cast<S>();
    f.render    = render_posed(f.posed, cam, settings);
    return f;
}

/// Loss against `gt` and, if `grad` is non-null, accumulation of dL/dparams.
template <class S>
inline LossReport
avatar_loss_backward(const LinearGaussianPredictor<S> &pred, const AvatarForward<S> &f, const Image &gt,
                     double lambda_reg, std::vector<S> *grad) {
    ImageT<S> d_image;
    Eigen::Matrix<S, Eigen::Dynamic, 3, Eigen::RowMajor> d_offset_reg;
    const LossReport report = compute_loss<S>(f.image(), gt, f.maps, lambda_reg, grad ? &d_image : nullptr,
                                              grad ? &d_offset_reg : nullptr);
    if (!grad) {
        return report;
    }
    const auto pg = render_projected_backward<S>(f.posed.positions, f.posed.covariances, f.camera, f.render, d_image);
    const int M   = pred.num_samples;
    typename GaussianMaps<S>::Rows d_maps(M, gmap::kChannels);
    parallel_for_blocks(M, [&](std::size_t b, std::size_t e) {
        for (std::size_t ii = b; ii < e; ++ii) {
            const int i = static_cast<int>(ii);
            auto d      = d_maps.row(i);
            const auto row = f.maps.values.row(i);
            d.template segment<3>(gmap::kOffset) =
                (f.posed.blend_linear[i].transpose() * pg.d_position[i]).transpose() + d_offset_reg.row(i);
            const Mat3<S> &R     = f.posed.blend_rotation[i];
            const Mat3<S> d_cov  = R.transpose() * pg.d_covariance[i] * R;
            Vec4<S> dq;
            Vec3<S> dls;
            covariance_backward<S>(row.template segment<4>(gmap::kRotation).transpose(),
                                   row.template segment<3>(gmap::kLogScale).transpose(), d_cov, dq, dls);
            d.template segment<4>(gmap::kRotation)  = dq.transpose();
            d.template segment<3>(gmap::kLogScale)  = dls.transpose();
            const S a            = f.posed.opacities[i];
            d(gmap::kOpacity)    = pg.d_opacity[i] * a * (S(1) - a);
            for (int c = 0; c < 3; ++c) {
                const S raw          = row(gmap::kColor + c);
                d(gmap::kColor + c) = (raw >= S(0) && raw <= S(1)) ? pg.d_color[i][c] : S(0);
            }
        }
    });
    predict_maps_backward(pred, f.beta, f.view_mean, d_maps, *grad);
    return report;
}

} // namespace gsavatar
