// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/log.hpp"
#include "gsavatar/fit/adam.hpp"
#include "gsavatar/fit/avatar.hpp"
#include "gsavatar/io/binary.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

namespace gsavatar {

struct TrainingConfig {
    double learning_rate     = 5e-4;
    double lambda_reg        = 0.005;
    double lambda_perceptual = 0.01; // kept for reference; no perceptual term is computed
    int batch_size           = 1;
    int iterations           = 5000;
    std::uint64_t seed       = 0;
    bool use_projection      = true;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
    // Step multipliers per parameter group (see learning_rate_scales).
    double offset_lr_scale   = 0.02;
    double coupling_lr_scale = 1.0;

    void
    validate() const {
        GSAVATAR_CHECK(learning_rate > 0, ConfigError, "learning rate must be positive");
        GSAVATAR_CHECK(lambda_reg >= 0 && lambda_perceptual >= 0, ConfigError,
                       "loss weights must be nonnegative");
        GSAVATAR_CHECK(batch_size >= 1, ConfigError, "batch size must be at least 1");
        GSAVATAR_CHECK(iterations >= 0, ConfigError, "iteration count must be nonnegative");
        GSAVATAR_CHECK(offset_lr_scale > 0 && coupling_lr_scale > 0, ConfigError,
                       "learning-rate scales must be positive");
    }

    AdamConfig
    adam() const {
        return {learning_rate, beta1, beta2, epsilon};
    }
};

/// Frames, cameras and a ground-truth image source. Images are fetched on demand so a full
/// dataset never has to sit in memory.
struct TrainingSet {
    std::vector<Pose> poses;
    std::vector<PerspectiveCamera<double>> cameras;
    std::vector<int> train_cameras; // indices into `cameras`
    std::function<Image(int frame, int camera)> image;
};

struct IterationRecord {
    int iteration = 0;
    int frame     = 0;
    int camera    = 0;
    LossReport loss;
    bool skipped  = false; // non-finite gradients, Adam step skipped
};

struct TrainingResult {
    std::vector<IterationRecord> history;
    int skipped_steps = 0;
};

/// Caches per (frame, camera) conditioning; position maps and PCA coefficients depend only on
/// the frame, the mean view direction also on the camera.
class ConditioningCache {
  public:
    ConditioningCache(const AvatarRig &rig, const TrainingSet &set, bool use_projection)
        : rig_(&rig), set_(&set), use_projection_(use_projection) {}

    const Conditioning &
    get(int frame, int camera) {
        const auto key = std::make_pair(frame, camera);
        auto it        = cache_.find(key);
        if (it == cache_.end()) {
            it = cache_.emplace(key, compute_conditioning(*rig_, set_->poses[frame], set_->cameras[camera],
                                                          use_projection_))
                     .first;
        }
        return it->second;
    }

  private:
    const AvatarRig *rig_;
    const TrainingSet *set_;
    bool use_projection_;
    std::map<std::pair<int, int>, Conditioning> cache_;
};

/// Per-parameter Adam step multipliers. Adam moves every parameter by about the learning rate
/// per step whatever its gradient scale, and each parameter here is a single Gaussian's
/// attribute (not a shared network weight), so:
///   - offset channels (metres, Gaussians ~4 mm wide) step `offset_lr_scale` times smaller;
///   - coupling weights step 1/N (view coupling 1/3) times smaller, times `coupling_lr_scale`,
///     so that one step changes a predicted attribute by at most ~2 base steps (|β̃| ≤ 2).
template <class S>
inline std::vector<S>
learning_rate_scales(const LinearGaussianPredictor<S> &pred, const TrainingConfig &cfg) {
    const int N = pred.num_components;
    std::vector<S> scale(pred.size(), S(1));
    auto channel = [&](int c) { return c < gmap::kOffset + 3 ? cfg.offset_lr_scale : 1.0; };
    for (int i = 0; i < pred.num_samples; ++i) {
        S *b = scale.data() + pred.base_offset(i);
        S *C = scale.data() + pred.coupling_offset(i);
        S *V = scale.data() + pred.view_offset(i);
        for (int c = 0; c < gmap::kChannels; ++c) {
            b[c] = static_cast<S>(channel(c));
            for (int k = 0; k < N; ++k) {
                C[c * N + k] = static_cast<S>(channel(c) * cfg.coupling_lr_scale / N);
            }
        }
        for (int k = 0; k < 9; ++k) {
            V[k] = static_cast<S>(cfg.coupling_lr_scale / 3.0);
        }
    }
    return scale;
}

/// Adam on the full predictor. Each iteration draws `batch_size` (frame, camera) pairs from a
/// generator seeded with `cfg.seed`, averages the gradients of the per-view losses, and
/// updates. `on_iteration` (optional) sees every record as it is produced.
inline TrainingResult
train_predictor(LinearGaussianPredictor<float> &pred, const AvatarRig &rig, const TrainingSet &set,
                const TrainingConfig &cfg, const std::function<void(const IterationRecord &)> &on_iteration = {}) {
    cfg.validate();
    GSAVATAR_CHECK(!set.poses.empty() && !set.train_cameras.empty(), ConfigError,
                   "training set needs at least one frame and one camera");
    for (int c : set.train_cameras) {
        GSAVATAR_CHECK(c >= 0 && c < static_cast<int>(set.cameras.size()), ConfigError,
                       "training camera index out of range");
    }
    if (cfg.lambda_perceptual != 0) {
        warn("perceptual loss weight " + std::to_string(cfg.lambda_perceptual) +
             " is recorded but not used; the loss is L1 + offset regularization");
    }
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> pick_frame(0, static_cast<int>(set.poses.size()) - 1);
    std::uniform_int_distribution<int> pick_camera(0, static_cast<int>(set.train_cameras.size()) - 1);
    ConditioningCache cache(rig, set, cfg.use_projection);
    AdamState<float> state;
    const AdamConfig adam = cfg.adam();
    const std::vector<float> lr_scale = learning_rate_scales(pred, cfg);
    std::vector<float> grad(pred.size());
    std::vector<float> batch_grad;
    TrainingResult result;
    result.history.reserve(cfg.iterations);

    for (int it = 0; it < cfg.iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0f);
        IterationRecord rec;
        rec.iteration = it;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const int frame  = pick_frame(rng);
            const int camera = set.train_cameras[pick_camera(rng)];
            const Image gt   = set.image(frame, camera);
            const auto &cond = cache.get(frame, camera);
            const auto fwd   = avatar_forward<float>(rig, pred, cond, set.poses[frame], set.cameras[camera]);
            std::vector<float> *target = &grad;
            if (cfg.batch_size > 1) {
                batch_grad.assign(pred.size(), 0.0f);
                target = &batch_grad;
            }
            const LossReport loss = avatar_loss_backward<float>(pred, fwd, gt, cfg.lambda_reg, target);
            if (!std::isfinite(loss.total)) {
                std::ostringstream msg;
                msg << "non-finite loss at iteration " << it << " (frame " << frame << ", camera " << camera
                    << "): l1=" << loss.l1 << " reg=" << loss.reg << " total=" << loss.total;
                std::size_t bad = 0;
                for (float p : pred.params) {
                    bad += !std::isfinite(p);
                }
                msg << "; " << bad << " of " << pred.size() << " parameters non-finite";
                throw NumericalError(msg.str());
            }
            if (cfg.batch_size > 1) {
                const float inv = 1.0f / cfg.batch_size;
                for (std::size_t k = 0; k < grad.size(); ++k) {
                    grad[k] += inv * batch_grad[k];
                }
                rec.loss.total += loss.total / cfg.batch_size;
                rec.loss.l1 += loss.l1 / cfg.batch_size;
                rec.loss.reg += loss.reg / cfg.batch_size;
                rec.loss.psnr += loss.psnr / cfg.batch_size;
            } else {
                rec.loss = loss;
            }
            rec.frame  = frame;
            rec.camera = camera;
        }
        rec.skipped = !adam_step<float>(pred.params, grad, state, adam, lr_scale);
        if (rec.skipped) {
            ++result.skipped_steps;
            warn("iteration " + std::to_string(it) + ": non-finite gradient, Adam step skipped");
        }
        result.history.push_back(rec);
        if (on_iteration) {
            on_iteration(rec);
        }
    }
    return result;
}

/// CSV with header `iteration,l1,reg,total,psnr`.
inline void
write_loss_csv(const std::string &path, const std::vector<IterationRecord> &history) {
    std::ofstream f(path);
    GSAVATAR_CHECK(f.good(), IoError, "cannot open " + path + " for writing");
    f << "iteration,l1,reg,total,psnr\n" << std::setprecision(9);
    for (const auto &r : history) {
        f << r.iteration << ',' << r.loss.l1 << ',' << r.loss.reg << ',' << r.loss.total << ',' << r.loss.psnr
          << '\n';
    }
    GSAVATAR_CHECK(f.good(), IoError, "write failed: " + path);
}

/// Moving averages of the total loss over consecutive, non-overlapping windows.
inline std::vector<double>
windowed_loss(const std::vector<IterationRecord> &history, int window) {
    std::vector<double> out;
    for (std::size_t b = 0; b + window <= history.size(); b += window) {
        double acc = 0;
        for (std::size_t i = b; i < b + window; ++i) {
            acc += history[i].loss.total;
        }
        out.push_back(acc / window);
    }
    return out;
}

/// Predictor checkpoint:
///
///   "APRD", uint32 version, uint32 M, uint32 N, uint64 seed,
///   3 × 64-byte ASCII SHA-256 (template mesh, template weights, PCA model),
///   float32 params (base, coupling, view blocks as in LinearGaussianPredictor)
struct PredictorCheckpoint {
    LinearGaussianPredictor<float> predictor;
    std::uint64_t seed = 0;
    std::string template_sha256, weights_sha256, pca_sha256;
};

inline constexpr std::uint32_t kPredictorFormatVersion = 1;

inline void
save_predictor(const std::string &path, const PredictorCheckpoint &ck) {
    io::BinaryWriter w;
    w.put_magic("APRD");
    w.put<std::uint32_t>(kPredictorFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.predictor.num_samples));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.predictor.num_components));
    w.put<std::uint64_t>(ck.seed);
    for (const std::string *h : {&ck.template_sha256, &ck.weights_sha256, &ck.pca_sha256}) {
        GSAVATAR_CHECK(h->size() == 64, ContractError, "content hash must be 64 hex characters");
        w.put_range<char>(h->begin(), h->end());
    }
    w.put_range<float>(ck.predictor.params.begin(), ck.predictor.params.end());
    w.save(path);
}

inline PredictorCheckpoint
load_predictor(const std::string &path) {
    io::BinaryReader r(path);
    r.expect_magic("APRD");
    const auto version = r.get<std::uint32_t>();
    GSAVATAR_CHECK(version == kPredictorFormatVersion, IoError,
                   path + ": unsupported predictor format version " + std::to_string(version));
    const auto M = r.get<std::uint32_t>(), N = r.get<std::uint32_t>();
    GSAVATAR_CHECK(M > 0, IoError, path + ": empty predictor");
    PredictorCheckpoint ck;
    ck.seed = r.get<std::uint64_t>();
    for (std::string *h : {&ck.template_sha256, &ck.weights_sha256, &ck.pca_sha256}) {
        h->resize(64);
        for (char &c : *h) c = r.get<char>();
    }
    ck.predictor = LinearGaussianPredictor<float>(static_cast<int>(M), static_cast<int>(N));
    for (float &p : ck.predictor.params) p = r.get<float>();
    GSAVATAR_CHECK(r.at_end(), IoError, path + ": trailing bytes");
    return ck;
}

} // namespace gsavatar
