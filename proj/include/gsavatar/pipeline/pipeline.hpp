// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/io/map_io.hpp"
#include "gsavatar/io/sha256.hpp"
#include "gsavatar/kinematics/weight_volume.hpp"
#include "gsavatar/pipeline/scene.hpp"

#include <chrono>
#include <functional>

namespace gsavatar {

/// Progress messages from long-running stages.
using ProgressFn = std::function<void(const std::string &)>;

/// Files written by fit() inside the output directory.
struct FitPaths {
    std::filesystem::path root;

    std::string
    predictor() const {
        return (root / "predictor.aprd").string();
    }
    std::string
    pca() const {
        return (root / "pca.apca").string();
    }
    std::string
    loss_curve() const {
        return (root / "loss.csv").string();
    }
    std::string
    summary() const {
        return (root / "fit_summary.cfg").string();
    }
};

struct FitResult {
    TrainingResult training;
    DiffusionStats diffusion;
    int pca_components = 0;
    double seconds     = 0;
};

/// Position maps of every frame as the columns of a 3M × T matrix.
inline Eigen::MatrixXd
position_map_matrix(const CanonicalTemplate &ct, const Skeleton &skel, const std::vector<Pose> &poses) {
    Eigen::MatrixXd X(3 * ct.num_valid(), static_cast<Eigen::Index>(poses.size()));
    for (std::size_t t = 0; t < poses.size(); ++t) {
        X.col(static_cast<Eigen::Index>(t)) = render_position_maps(ct, skel, poses[t]).flatten();
    }
    return X;
}

/// Template ingestion → weight diffusion → parameterization → PCA fit → training. Writes the
/// predictor checkpoint, PCA model, loss curve and a summary into `cfg.output_dir`.
///
/// Diffusion produces the volumetric weight field used to map posed points back to canonical
/// space; every Gaussian stays anchored on the template surface, so training itself skins with
/// the surface weights interpolated into the maps.
inline FitResult
fit_avatar(const SceneConfig &cfg, const ProgressFn &progress = {}) {
    const auto start = std::chrono::steady_clock::now();
    auto say         = [&](const std::string &m) {
        if (progress) progress(m);
    };
    if (cfg.threads > 0) set_num_threads(cfg.threads);
    const Scene scene = load_scene(cfg);
    GSAVATAR_CHECK(!cfg.images_dir.empty(), ConfigError, "fit needs an images directory");
    FitResult result;
    run_stage("weight diffusion", [&] {
        const GridSpec grid = GridSpec::enclosing(scene.mesh, cfg.voxel_size);
        diffuse_weights(scene.mesh, grid, {}, &result.diffusion);
        say("weight diffusion: " + std::to_string(grid.voxel_count()) + " voxels, " +
            std::to_string(result.diffusion.iterations) + " iterations");
    });
    const CanonicalTemplate ct = run_stage("parameterization", [&] {
        return build_canonical_template(scene.mesh, cfg.resolution);
    });
    say("parameterization: " + std::to_string(ct.num_valid()) + " valid samples");

    const FitPaths out{cfg.output_dir};
    PcaModel pca = run_stage("pca fit", [&] {
        std::filesystem::create_directories(out.root);
        const PcaModel m = fit_pca(position_map_matrix(ct, scene.skeleton, scene.poses), cfg.components,
                                   ct.global_pixel_indices(), ct.views[0].height(), ct.views[0].width());
        // Train against the model exactly as stored (float32), so inference sees the same one.
        save_pca(out.pca(), m);
        return load_pca(out.pca());
    });
    result.pca_components = pca.num_components();
    say("pca fit: " + std::to_string(pca.num_components()) + " components");

    PredictorCheckpoint ck = run_stage("training", [&] {
        const AvatarRig rig(ct, scene.skeleton, pca);
        TrainingSet set;
        set.poses         = scene.poses;
        set.cameras       = scene.perspective_cameras();
        set.train_cameras = scene.training_cameras();
        set.image         = [&](int frame, int camera) {
            const Image img = scene.image(camera, frame);
            GSAVATAR_CHECK(img.width == set.cameras[camera].width && img.height == set.cameras[camera].height,
                           IoError, scene.image_path(camera, frame) + ": image size differs from camera");
            return img;
        };
        PredictorCheckpoint c;
        c.predictor = LinearGaussianPredictor<float>(ct.num_valid(), pca.num_components());
        initialize_base_maps(c.predictor, ct);
        const int every = std::max(1, cfg.training.iterations / 20);
        result.training = train_predictor(c.predictor, rig, set, cfg.training, [&](const IterationRecord &r) {
            if ((r.iteration + 1) % every == 0) {
                std::ostringstream m;
                m << "iteration " << r.iteration + 1 << "/" << cfg.training.iterations << "  loss " << r.loss.total
                  << "  psnr " << r.loss.psnr;
                say(m.str());
            }
        });
        c.seed            = cfg.training.seed;
        c.template_sha256 = io::sha256_file(cfg.template_path);
        c.weights_sha256  = io::sha256_file(cfg.weights_path);
        c.pca_sha256      = io::sha256_file(out.pca());
        return c;
    });
    run_stage("checkpoint", [&] {
        save_predictor(out.predictor(), ck);
        write_loss_csv(out.loss_curve(), result.training.history);
        result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        io::KeyValueConfig summary;
        summary.set("seed", std::to_string(cfg.training.seed));
        summary.set("iterations", std::to_string(cfg.training.iterations));
        summary.set("samples", std::to_string(ct.num_valid()));
        summary.set("components", std::to_string(pca.num_components()));
        summary.set("skipped_steps", std::to_string(result.training.skipped_steps));
        summary.set("diffusion_iterations", std::to_string(result.diffusion.iterations));
        summary.set("seconds", std::to_string(result.seconds));
        summary.save(out.summary());
    });
    return result;
}

/// A fitted avatar ready for rendering: scene inputs, parameterized template, PCA model and
/// predictor, checked against each other by content hash.
struct FittedAvatar {
    Scene scene;
    CanonicalTemplate ct;
    PcaModel pca;
    PredictorCheckpoint checkpoint;
    std::unique_ptr<AvatarRig> rig;

    FittedAvatar() = default;
    FittedAvatar(const FittedAvatar &) = delete;
    FittedAvatar &operator=(const FittedAvatar &) = delete;

    Conditioning
    conditioning(const Pose &pose, const PerspectiveCamera<double> &cam, bool use_projection) const {
        GSAVATAR_CHECK(static_cast<int>(pose.joint_rotations.size()) == scene.skeleton.size(), ContractError,
                       "pose has " + std::to_string(pose.joint_rotations.size()) + " joints, skeleton has " +
                           std::to_string(scene.skeleton.size()));
        return compute_conditioning(*rig, pose, cam, use_projection);
    }

    AvatarForward<float>
    forward(const Pose &pose, const PerspectiveCamera<double> &cam, bool use_projection) const {
        return avatar_forward<float>(*rig, checkpoint.predictor, conditioning(pose, cam, use_projection), pose, cam);
    }

    Image
    render(const Pose &pose, const PerspectiveCamera<double> &cam, bool use_projection = true) const {
        return forward(pose, cam, use_projection).image();
    }

    /// Predicted Gaussian maps (before LBS) for a pose.
    GaussianMaps<float>
    maps(const Pose &pose, const PerspectiveCamera<double> &cam, bool use_projection = true) const {
        const Conditioning c = conditioning(pose, cam, use_projection);
        return predict_maps(checkpoint.predictor, normalize_coefficients<float>(c.beta, pca.sigmas),
                            Vec3<float>(c.view_mean.cast<float>()));
    }
};

inline std::unique_ptr<FittedAvatar>
load_fitted_avatar(const SceneConfig &cfg, const std::string &fit_dir) {
    if (cfg.threads > 0) set_num_threads(cfg.threads);
    auto a           = std::make_unique<FittedAvatar>();
    a->scene         = load_scene(cfg);
    const FitPaths p{fit_dir};
    run_stage("checkpoint loading", [&] {
        a->checkpoint = load_predictor(p.predictor());
        GSAVATAR_CHECK(a->checkpoint.template_sha256 == io::sha256_file(cfg.template_path), ContractError,
                       "checkpoint was fitted to a different template mesh");
        GSAVATAR_CHECK(a->checkpoint.weights_sha256 == io::sha256_file(cfg.weights_path), ContractError,
                       "checkpoint was fitted with different template weights");
        GSAVATAR_CHECK(a->checkpoint.pca_sha256 == io::sha256_file(p.pca()), ContractError,
                       "checkpoint was fitted with a different PCA model");
        a->pca = load_pca(p.pca());
    });
    run_stage("parameterization", [&] {
        a->ct = build_canonical_template(a->scene.mesh, cfg.resolution);
        GSAVATAR_CHECK(a->checkpoint.predictor.num_samples == a->ct.num_valid() &&
                           a->checkpoint.predictor.num_components == a->pca.num_components(),
                       ContractError, "checkpoint shape does not match the template and PCA model");
        a->rig = std::make_unique<AvatarRig>(a->ct, a->scene.skeleton, a->pca);
    });
    return a;
}

/// Renders `poses` from `cam` into <out_dir>/frame_XXXX.png; returns the written paths.
inline std::vector<std::string>
render_sequence(const FittedAvatar &avatar, const std::vector<Pose> &poses, const PerspectiveCamera<double> &cam,
                bool use_projection, const std::string &out_dir) {
    return run_stage("render", [&] {
        std::filesystem::create_directories(out_dir);
        std::vector<std::string> paths;
        for (std::size_t f = 0; f < poses.size(); ++f) {
            char name[24];
            std::snprintf(name, sizeof name, "frame_%04zu.png", f);
            const std::string path = (std::filesystem::path(out_dir) / name).string();
            io::write_png(path, avatar.render(poses[f], cam, use_projection));
            paths.push_back(path);
        }
        return paths;
    });
}

struct FrameMetrics {
    int frame   = 0;
    double psnr = 0;
    double ssim = 0;
};

struct EvalSummary {
    std::vector<FrameMetrics> frames;
    double mean_psnr = 0;
    double mean_ssim = 0;
};

/// PSNR/SSIM of renders against ground truth at `camera` for the given frames (all when empty).
/// Images are compared after 8-bit quantization, exactly as they would be stored.
inline EvalSummary
evaluate_avatar(const FittedAvatar &avatar, int camera, std::vector<int> frames, bool use_projection = true) {
    return run_stage("eval", [&] {
        const Scene &s = avatar.scene;
        GSAVATAR_CHECK(camera >= 0 && camera < static_cast<int>(s.cameras.size()), ConfigError,
                       "evaluation camera out of range");
        if (frames.empty()) {
            for (int f = 0; f < static_cast<int>(s.poses.size()); ++f) frames.push_back(f);
        }
        EvalSummary out;
        for (int f : frames) {
            Image img = avatar.render(s.poses.at(f), s.cameras[camera].camera, use_projection);
            for (float &v : img.pixels) v = io::to_byte(v) / 255.0f;
            const Image gt = s.image(camera, f);
            out.frames.push_back({f, psnr(img, gt), ssim(img, gt)});
            out.mean_psnr += out.frames.back().psnr;
            out.mean_ssim += out.frames.back().ssim;
        }
        out.mean_psnr /= frames.size();
        out.mean_ssim /= frames.size();
        return out;
    });
}

/// CSV `frame,psnr,ssim`, one row per frame followed by a `mean` row.
inline void
write_metrics_csv(const std::string &path, const EvalSummary &e) {
    std::ofstream f(path);
    GSAVATAR_CHECK(f.good(), IoError, "cannot open " + path + " for writing");
    f << "frame,psnr,ssim\n" << std::setprecision(9);
    for (const auto &m : e.frames) f << m.frame << ',' << m.psnr << ',' << m.ssim << '\n';
    f << "mean," << e.mean_psnr << ',' << e.mean_ssim << '\n';
    GSAVATAR_CHECK(f.good(), IoError, "write failed: " + path);
}

/// Writes color-coded position-map previews of x̄ ± 2σ_k·s_k for components k < count:
/// <out_dir>/pc_KK_{plus,minus}_{front,back}.png, plus the mean as mean_{front,back}.png.
inline std::vector<std::string>
inspect_pca(const PcaModel &pca, const CanonicalTemplate &ct, int count, const std::string &out_dir) {
    return run_stage("inspect-pca", [&] {
        check_pca_template(pca, ct);
        GSAVATAR_CHECK(count >= 1 && count <= pca.num_components(), ConfigError,
                       "k must lie in [1, " + std::to_string(pca.num_components()) + "]");
        std::filesystem::create_directories(out_dir);
        std::vector<std::string> written;
        auto emit = [&](const Eigen::VectorXd &x, const std::string &stem) {
            const PositionMaps m = PositionMaps::unflatten(x);
            for (MapSide side : {MapSide::kFront, MapSide::kBack}) {
                const std::string path = (std::filesystem::path(out_dir) /
                                          (stem + (side == MapSide::kFront ? "_front.png" : "_back.png")))
                                             .string();
                io::write_map_preview(path, m.dense(ct, side), ct.view(side).mask);
                written.push_back(path);
            }
        };
        emit(pca.mean, "mean");
        for (int k = 0; k < count; ++k) {
            char stem[16];
            std::snprintf(stem, sizeof stem, "pc_%02d", k);
            const Eigen::VectorXd d = 2.0 * pca.sigmas[k] * pca.components.col(k);
            emit(pca.mean + d, std::string(stem) + "_plus");
            emit(pca.mean - d, std::string(stem) + "_minus");
        }
        return written;
    });
}

} // namespace gsavatar
