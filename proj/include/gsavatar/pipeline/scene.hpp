// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/fit/train.hpp"
#include "gsavatar/io/config.hpp"
#include "gsavatar/io/png.hpp"
#include "gsavatar/io/text_formats.hpp"

#include <cstdlib>
#include <filesystem>
#include <set>

namespace gsavatar {

/// A pipeline step failed; `stage()` names it (e.g. "pca fit").
class StageError : public Error {
  public:
    StageError(std::string stage, const std::string &what)
        : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}

    const std::string &
    stage() const {
        return stage_;
    }

  private:
    std::string stage_;
};

/// Runs `fn`, converting any exception into a StageError naming `stage`.
template <class Fn>
auto
run_stage(const std::string &stage, Fn &&fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError &) {
        throw;
    } catch (const std::exception &e) {
        throw StageError(stage, e.what());
    }
}

/// Output root used when a config names none: $AVATAR_OUTPUT_ROOT, else "./output".
inline std::string
default_output_root() {
    const char *env = std::getenv("AVATAR_OUTPUT_ROOT");
    return env && *env ? std::string(env) : std::string("output");
}

/// Scene configuration, a plain `key = value` file:
///
///   template, weights, skeleton, cameras, poses   input files
///   images            ground-truth root: <images>/cam_XX/frame_XXXX.png (cam_XX = camera name)
///   resolution        map resolution, power of two ≥ 128 (default 512)
///   components        PCA components (default 20)
///   held_out_camera   camera index excluded from training, −1 for none (default 1)
///   output            output directory (default $AVATAR_OUTPUT_ROOT or ./output)
///   seed, threads, use_pca, voxel_size
///   learning_rate, lambda_reg, lambda_perceptual, batch_size, iterations
///   offset_lr_scale, coupling_lr_scale   per-group Adam step multipliers
///
/// Relative paths resolve against the directory holding the config file.
struct SceneConfig {
    std::string template_path, weights_path, skeleton_path, cameras_path, poses_path, images_dir;
    std::string output_dir;
    int resolution      = 512;
    int components      = kDefaultPcaComponents;
    int held_out_camera = 1;
    int threads         = 0;
    double voxel_size   = 0.02;
    TrainingConfig training;

    static const std::set<std::string> &
    known_keys() {
        static const std::set<std::string> keys = {
            "template",      "weights",    "skeleton",          "cameras",    "poses",      "images",
            "resolution",    "components", "held_out_camera",   "output",     "seed",       "threads",
            "use_pca",       "voxel_size", "learning_rate",     "lambda_reg", "batch_size", "iterations",
            "lambda_perceptual", "synthetic_amplitude", "offset_lr_scale", "coupling_lr_scale"};
        return keys;
    }

    static SceneConfig
    from_config(const io::KeyValueConfig &kv, const std::filesystem::path &base) {
        kv.check_known(known_keys());
        auto path = [&](const std::string &key) {
            const std::filesystem::path p(kv.require_string(key));
            return (p.is_absolute() ? p : base / p).lexically_normal().string();
        };
        SceneConfig c;
        c.template_path   = path("template");
        c.weights_path    = path("weights");
        c.skeleton_path   = path("skeleton");
        c.cameras_path    = path("cameras");
        c.poses_path      = path("poses");
        c.images_dir      = kv.has("images") ? path("images") : std::string();
        c.output_dir      = kv.has("output") ? path("output") : default_output_root();
        c.resolution      = kv.get<int>("resolution", c.resolution);
        c.components      = kv.get<int>("components", c.components);
        c.held_out_camera = kv.get<int>("held_out_camera", c.held_out_camera);
        c.threads         = kv.get<int>("threads", c.threads);
        c.voxel_size      = kv.get<double>("voxel_size", c.voxel_size);
        auto &t           = c.training;
        t.seed              = kv.get<std::uint64_t>("seed", t.seed);
        t.use_projection    = kv.get<bool>("use_pca", t.use_projection);
        t.learning_rate     = kv.get<double>("learning_rate", t.learning_rate);
        t.lambda_reg        = kv.get<double>("lambda_reg", t.lambda_reg);
        t.lambda_perceptual = kv.get<double>("lambda_perceptual", t.lambda_perceptual);
        t.batch_size        = kv.get<int>("batch_size", t.batch_size);
        t.iterations        = kv.get<int>("iterations", t.iterations);
        t.offset_lr_scale   = kv.get<double>("offset_lr_scale", t.offset_lr_scale);
        t.coupling_lr_scale = kv.get<double>("coupling_lr_scale", t.coupling_lr_scale);
        return c;
    }

    static SceneConfig
    load(const std::string &path) {
        return from_config(io::KeyValueConfig::load(path), std::filesystem::path(path).parent_path());
    }

    void
    validate() const {
        GSAVATAR_CHECK(resolution >= 128 && (resolution & (resolution - 1)) == 0, ConfigError,
                       "resolution must be a power of two ≥ 128, got " + std::to_string(resolution));
        GSAVATAR_CHECK(components >= 1, ConfigError, "components must be at least 1");
        GSAVATAR_CHECK(voxel_size > 0, ConfigError, "voxel_size must be positive");
        for (const std::string *p : {&template_path, &weights_path, &skeleton_path, &cameras_path, &poses_path}) {
            GSAVATAR_CHECK(std::filesystem::exists(*p), ConfigError, "missing input file " + *p);
        }
        training.validate();
    }
};

/// Scene inputs loaded from disk.
struct Scene {
    SceneConfig config;
    SkinnedTemplate mesh;
    Skeleton skeleton;
    std::vector<io::NamedCamera> cameras;
    std::vector<Pose> poses;

    std::string
    image_path(int camera, int frame) const {
        char name[24];
        std::snprintf(name, sizeof name, "frame_%04d.png", frame);
        return (std::filesystem::path(config.images_dir) / cameras.at(camera).name / name).string();
    }

    Image
    image(int camera, int frame) const {
        return io::read_png(image_path(camera, frame));
    }

    std::vector<PerspectiveCamera<double>>
    perspective_cameras() const {
        std::vector<PerspectiveCamera<double>> out;
        for (const auto &c : cameras) out.push_back(c.camera);
        return out;
    }

    std::vector<int>
    training_cameras() const {
        std::vector<int> out;
        for (int k = 0; k < static_cast<int>(cameras.size()); ++k) {
            if (k != config.held_out_camera) out.push_back(k);
        }
        return out;
    }
};

inline Scene
load_scene(const SceneConfig &cfg) {
    return run_stage("template ingestion", [&] {
        cfg.validate();
        Scene s;
        s.config   = cfg;
        s.mesh     = io::read_skinned_template(cfg.template_path, cfg.weights_path);
        s.skeleton = io::read_skeleton(cfg.skeleton_path);
        s.cameras  = io::read_cameras(cfg.cameras_path);
        s.poses    = io::read_poses(cfg.poses_path);
        GSAVATAR_CHECK(s.mesh.num_joints() == s.skeleton.size(), ConfigError,
                       "template weights have " + std::to_string(s.mesh.num_joints()) + " joints, skeleton has " +
                           std::to_string(s.skeleton.size()));
        for (const auto &p : s.poses) {
            GSAVATAR_CHECK(static_cast<int>(p.joint_rotations.size()) == s.skeleton.size(), ConfigError,
                           "pose joint count differs from the skeleton");
        }
        GSAVATAR_CHECK(!s.cameras.empty(), ConfigError, "camera list is empty");
        GSAVATAR_CHECK(cfg.held_out_camera < static_cast<int>(s.cameras.size()), ConfigError,
                       "held_out_camera out of range");
        return s;
    });
}

} // namespace gsavatar
