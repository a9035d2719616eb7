// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

// gsavatar: synthetic data generation, fitting, rendering, evaluation and PCA inspection.

#include "gsavatar/pipeline/pipeline.hpp"
#include "gsavatar/synthetic/dataset.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace gsavatar;

namespace {

// Flags shared by the subcommands that read a scene config. Each flag overrides a config key.
struct SceneFlags {
    std::string config;
    std::vector<std::string> sets; // key=value
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<int> resolution;
    bool no_pca = false;

    void
    add(CLI::App *app) {
        app->add_option("-c,--config", config, "scene configuration file")->required()->check(CLI::ExistingFile);
        app->add_option("--set", sets, "override a config key (key=value), repeatable");
        app->add_option("--seed", seed, "random seed");
        app->add_option("--threads", threads, "worker threads (0 = all cores)");
        app->add_option("--resolution", resolution, "map resolution (power of two >= 128)");
        app->add_flag("--no-pca", no_pca, "condition on raw PCA coefficients, without projection and clipping");
    }

    SceneConfig
    load() const {
        io::KeyValueConfig kv = io::KeyValueConfig::load(config);
        for (const auto &s : sets) {
            const auto eq = s.find('=');
            GSAVATAR_CHECK(eq != std::string::npos, ConfigError, "--set expects key=value, got '" + s + "'");
            kv.set(io::trim(s.substr(0, eq)), io::trim(s.substr(eq + 1)));
        }
        if (seed) kv.set("seed", std::to_string(*seed));
        if (threads) kv.set("threads", std::to_string(*threads));
        if (resolution) kv.set("resolution", std::to_string(*resolution));
        if (no_pca) kv.set("use_pca", "false");
        SceneConfig cfg = SceneConfig::from_config(kv, std::filesystem::path(config).parent_path());
        if (cfg.threads > 0) set_num_threads(cfg.threads);
        return cfg;
    }
};

void
print(const std::string &msg) {
    std::cout << msg << std::endl;
}

} // namespace

int
main(int argc, char **argv) {
    CLI::App app{"Animatable Gaussian avatars: generate, fit, render, evaluate"};
    app.require_subcommand(1);

    // gen-synthetic
    auto *gen = app.add_subcommand("gen-synthetic", "write a synthetic multi-view dataset");
    synthetic::SyntheticSpec spec;
    std::string gen_out;
    int gen_threads = 0, image_size = spec.ring.width;
    gen->add_option("-o,--output", gen_out, "dataset directory (default <output root>/synthetic)");
    gen->add_option("--seed", spec.seed, "random seed");
    gen->add_option("--frames", spec.frames, "number of frames")->check(CLI::PositiveNumber);
    gen->add_option("--cameras", spec.ring.count, "cameras on the ring")->check(CLI::PositiveNumber);
    gen->add_option("--image-size", image_size, "image width and height in pixels")->check(CLI::PositiveNumber);
    gen->add_option("--resolution", spec.map_resolution, "map resolution of the reference avatar");
    gen->add_option("--components", spec.components, "PCA components recorded in scene.cfg");
    gen->add_option("--amplitude", spec.amplitude, "pose-dependent offset amplitude (m)");
    gen->add_option("--threads", gen_threads, "worker threads (0 = all cores)");

    // fit
    auto *fit = app.add_subcommand("fit", "fit an avatar to a dataset");
    SceneFlags fit_flags;
    fit_flags.add(fit);
    std::string fit_out;
    std::optional<int> iterations;
    fit->add_option("-o,--output", fit_out, "output directory (overrides the 'output' key)");
    fit->add_option("--iterations", iterations, "training iterations");

    // render
    auto *render = app.add_subcommand("render", "render a pose sequence with a fitted avatar");
    SceneFlags render_flags;
    render_flags.add(render);
    std::string render_fit, render_poses, render_out;
    int render_camera = 0;
    render->add_option("--fit-dir", render_fit, "directory written by 'fit'")->required();
    render->add_option("--poses", render_poses, "pose sequence file (default: the scene's poses)");
    render->add_option("--camera", render_camera, "camera index")->check(CLI::NonNegativeNumber);
    render->add_option("-o,--output", render_out, "frame directory")->required();

    // eval
    auto *eval = app.add_subcommand("eval", "PSNR/SSIM of a fitted avatar against ground truth");
    SceneFlags eval_flags;
    eval_flags.add(eval);
    std::string eval_fit, eval_csv;
    std::optional<int> eval_camera;
    eval->add_option("--fit-dir", eval_fit, "directory written by 'fit'")->required();
    eval->add_option("--camera", eval_camera, "camera index (default: the held-out camera)");
    eval->add_option("-o,--output", eval_csv, "metrics CSV (default <fit-dir>/metrics.csv)");

    // inspect-pca
    auto *inspect = app.add_subcommand("inspect-pca", "visualize principal components on position maps");
    SceneFlags inspect_flags;
    inspect_flags.add(inspect);
    std::string inspect_fit, inspect_out;
    int inspect_k = 4;
    inspect->add_option("--fit-dir", inspect_fit, "directory written by 'fit'")->required();
    inspect->add_option("-k", inspect_k, "number of components to show")->check(CLI::PositiveNumber);
    inspect->add_option("-o,--output", inspect_out, "image directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            if (gen_threads > 0) set_num_threads(gen_threads);
            spec.ring.width = spec.ring.height_px = image_size;
            spec.ring.focal *= image_size / 256.0;
            if (gen_out.empty()) gen_out = (std::filesystem::path(default_output_root()) / "synthetic").string();
            run_stage("gen-synthetic", [&] {
                synthetic::generate_dataset(spec, gen_out, [&](int f) {
                    if ((f + 1) % 20 == 0 || f + 1 == spec.frames) {
                        print("rendered frame " + std::to_string(f + 1) + "/" + std::to_string(spec.frames));
                    }
                });
            });
            print("dataset written to " + gen_out);
        } else if (*fit) {
            SceneConfig cfg = run_stage("config", [&] { return fit_flags.load(); });
            if (!fit_out.empty()) cfg.output_dir = fit_out;
            if (iterations) cfg.training.iterations = *iterations;
            print("fitting into " + cfg.output_dir + " (seed " + std::to_string(cfg.training.seed) + ")");
            const FitResult r = fit_avatar(cfg, print);
            const auto &last  = r.training.history.empty() ? IterationRecord{} : r.training.history.back();
            std::cout << "done in " << r.seconds << " s; final loss " << last.loss.total << ", "
                      << r.training.skipped_steps << " skipped steps" << std::endl;
        } else if (*render) {
            const SceneConfig cfg = run_stage("config", [&] { return render_flags.load(); });
            const auto avatar     = load_fitted_avatar(cfg, render_fit);
            const auto poses      = render_poses.empty() ? avatar->scene.poses
                                                         : run_stage("pose loading", [&] { return io::read_poses(render_poses); });
            GSAVATAR_CHECK(render_camera < static_cast<int>(avatar->scene.cameras.size()), ConfigError,
                           "camera index out of range");
            const auto paths = render_sequence(*avatar, poses, avatar->scene.cameras[render_camera].camera,
                                               cfg.training.use_projection, render_out);
            print("wrote " + std::to_string(paths.size()) + " frames to " + render_out);
        } else if (*eval) {
            const SceneConfig cfg = run_stage("config", [&] { return eval_flags.load(); });
            const auto avatar     = load_fitted_avatar(cfg, eval_fit);
            const int camera      = eval_camera.value_or(cfg.held_out_camera);
            const EvalSummary e   = evaluate_avatar(*avatar, camera, {}, cfg.training.use_projection);
            const std::string csv = eval_csv.empty() ? (std::filesystem::path(eval_fit) / "metrics.csv").string()
                                                     : eval_csv;
            write_metrics_csv(csv, e);
            std::cout << "frame      psnr      ssim\n";
            for (const auto &m : e.frames) {
                std::printf("%5d  %8.3f  %8.5f\n", m.frame, m.psnr, m.ssim);
            }
            std::printf(" mean  %8.3f  %8.5f\n", e.mean_psnr, e.mean_ssim);
            print("metrics written to " + csv);
        } else if (*inspect) {
            const SceneConfig cfg = run_stage("config", [&] { return inspect_flags.load(); });
            const auto avatar     = load_fitted_avatar(cfg, inspect_fit);
            const auto paths      = inspect_pca(avatar->pca, avatar->ct, inspect_k, inspect_out);
            print("wrote " + std::to_string(paths.size()) + " images to " + inspect_out);
        }
    } catch (const StageError &e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
