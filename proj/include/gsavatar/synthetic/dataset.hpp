// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/parallel.hpp"
#include "gsavatar/fit/avatar.hpp"
#include "gsavatar/fit/predictor.hpp"
#include "gsavatar/io/config.hpp"
#include "gsavatar/io/png.hpp"
#include "gsavatar/io/text_formats.hpp"
#include "gsavatar/synthetic/body.hpp"
#include "gsavatar/synthetic/cameras.hpp"

#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

namespace gsavatar::synthetic {

struct SyntheticSpec {
    BodyProportions body;
    CameraRingSpec ring;
    int frames          = 200;
    int map_resolution  = 512;
    int components      = 20;
    int held_out_camera = 1;
    double amplitude    = 0.01;   // pose-dependent offset amplitude, meters
    double checker_size = 0.08;   // texture cell edge, meters
    std::uint64_t seed  = 0;

    void
    validate() const {
        GSAVATAR_CHECK(ring.count >= 2, ConfigError, "synthetic dataset needs at least 2 cameras");
        GSAVATAR_CHECK(frames >= 2, ConfigError, "synthetic dataset needs at least 2 frames");
        GSAVATAR_CHECK(amplitude >= 0, ConfigError, "offset amplitude must be nonnegative");
        GSAVATAR_CHECK(held_out_camera >= 0 && held_out_camera < ring.count, ConfigError,
                       "held-out camera index out of range");
    }
};

namespace detail {

inline Vec3d
axis_angle(const Mat3d &R) {
    const Eigen::AngleAxisd aa(R);
    return aa.axis() * aa.angle();
}

inline Mat3d
rot(const Vec3d &axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

// One smoothly varying degree of freedom: center + amp·sin(2π·cycles·t + phase), t ∈ [0, 1).
struct Wave {
    double center = 0, amp = 0, cycles = 1, phase = 0;

    double
    at(double t) const {
        return center + amp * std::sin(2.0 * std::numbers::pi * cycles * t + phase);
    }
};

} // namespace detail

/// Smooth periodic motion: arm raises and swings, elbow and knee flexion, leg swings, torso and
/// head sway, and a slow turn about the vertical axis. All joint angles stay well inside ±60°
/// except elbow/knee flexion, which range over [0, 75°].
inline std::vector<Pose>
make_motion(const Skeleton &skel, int frames, std::uint64_t seed) {
    GSAVATAR_CHECK(skel.size() == kBodyJointCount, ContractError, "motion generator expects the body skeleton");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> cyc(1.0, 3.0), ph(0.0, 2.0 * std::numbers::pi);
    auto wave = [&](double center, double amp) { return detail::Wave{center, amp, std::round(cyc(rng)), ph(rng)}; };
    const Vec3d X = Vec3d::UnitX(), Y = Vec3d::UnitY(), Z = Vec3d::UnitZ();
    // Per side: shoulder raise (about z), shoulder swing (about y), elbow flex, hip swing, knee.
    struct Side {
        detail::Wave raise, swing, elbow, hip, hip_out, knee;
    } side[2];
    for (auto &s : side) {
        s.raise   = wave(-0.35, 0.45);
        s.swing   = wave(0.0, 0.5);
        s.elbow   = wave(0.65, 0.65);
        s.hip     = wave(0.0, 0.5);
        s.hip_out = wave(0.08, 0.08);
        s.knee    = wave(0.6, 0.6);
    }
    const detail::Wave spine_x = wave(0, 0.15), spine_y = wave(0, 0.25), head_x = wave(0, 0.25),
                       head_y = wave(0, 0.35), pelvis_z = wave(0, 0.08), turn = wave(0, 0.6), bob = wave(0, 0.02);
    std::vector<Pose> poses;
    for (int f = 0; f < frames; ++f) {
        const double t = double(f) / frames;
        Pose p         = Pose::zero(skel.size());
        p.joint_rotations[kPelvis] = pelvis_z.at(t) * Z;
        p.joint_rotations[kSpine]  = detail::axis_angle(detail::rot(Y, spine_y.at(t)) * detail::rot(X, spine_x.at(t)));
        p.joint_rotations[kHead]   = detail::axis_angle(detail::rot(Y, head_y.at(t)) * detail::rot(X, head_x.at(t)));
        for (int s = 0; s < 2; ++s) {
            const double sx    = s == 0 ? 1.0 : -1.0; // left limbs sit on +x
            const int shoulder = s == 0 ? kLeftShoulder : kRightShoulder;
            const int elbow    = s == 0 ? kLeftElbow : kRightElbow;
            const int hip      = s == 0 ? kLeftHip : kRightHip;
            const int knee     = s == 0 ? kLeftKnee : kRightKnee;
            p.joint_rotations[shoulder] = detail::axis_angle(detail::rot(Y, side[s].swing.at(t)) *
                                                             detail::rot(Z, sx * side[s].raise.at(t)));
            p.joint_rotations[elbow]    = -sx * std::max(0.0, side[s].elbow.at(t)) * Y; // bends forward
            p.joint_rotations[hip]      = detail::axis_angle(detail::rot(Z, sx * side[s].hip_out.at(t)) *
                                                             detail::rot(X, -side[s].hip.at(t)));
            p.joint_rotations[knee]     = std::max(0.0, side[s].knee.at(t)) * X; // bends backward
        }
        p.global_rotation    = turn.at(t) * Y;
        p.global_translation = Vec3d(0, bob.at(t), 0);
        poses.push_back(p);
    }
    return poses;
}

/// Poses outside the training motion: every joint rotated by 70°–110° about a random axis.
inline std::vector<Pose>
make_out_of_distribution_poses(const Skeleton &skel, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> ang(70.0, 110.0);
    std::vector<Pose> poses;
    for (int k = 0; k < count; ++k) {
        Pose p = Pose::zero(skel.size());
        for (auto &r : p.joint_rotations) {
            r = Vec3d(n(rng), n(rng), n(rng)).normalized() * (ang(rng) * std::numbers::pi / 180.0);
        }
        poses.push_back(p);
    }
    return poses;
}

/// Procedural texture: a per-body-part base color (weight blended) modulated by a 3D
/// checkerboard in canonical space.
inline Vec3d
texture_color(const Vec3d &x, std::span<const double> weights, double cell) {
    static const Vec3d palette[kBodyJointCount] = {
        {0.80, 0.35, 0.25}, {0.85, 0.55, 0.20}, {0.90, 0.75, 0.60}, // pelvis, spine, head
        {0.25, 0.55, 0.80}, {0.20, 0.70, 0.65}, {0.85, 0.80, 0.55}, // left arm
        {0.55, 0.35, 0.80}, {0.75, 0.30, 0.60}, {0.85, 0.80, 0.55}, // right arm
        {0.30, 0.35, 0.70}, {0.25, 0.60, 0.35},                     // left leg
        {0.60, 0.30, 0.30}, {0.55, 0.60, 0.25},                     // right leg
    };
    Vec3d c = Vec3d::Zero();
    for (std::size_t j = 0; j < weights.size() && j < kBodyJointCount; ++j) {
        c += weights[j] * palette[j];
    }
    const long parity = static_cast<long>(std::floor(x.x() / cell)) + static_cast<long>(std::floor(x.y() / cell)) +
                        static_cast<long>(std::floor(x.z() / cell));
    return (parity & 1) ? c * 0.5 : c;
}

/// The avatar that produces the ground truth. It lives on the same front/back maps as the
/// fitted model: initial scales and opacity, textured colors, and offsets along the canonical
/// normal that follow elbow and knee flexion.
class ReferenceAvatar {
  public:
    ReferenceAvatar(const CanonicalTemplate &ct, const SyntheticSpec &spec) : ct_(&ct), skin_(ct), spec_(spec) {
        LinearGaussianPredictor<float> init(ct.num_valid(), 0);
        initialize_base_maps(init, ct);
        base_.values.resize(ct.num_valid(), gmap::kChannels);
        for (int i = 0; i < ct.num_valid(); ++i) {
            for (int c = 0; c < gmap::kChannels; ++c) base_.values(i, c) = init.base(i)[c];
            const Vec3d col = texture_color(ct.base_position(i), ct.weights(i), spec.checker_size);
            for (int c = 0; c < 3; ++c) base_.values(i, gmap::kColor + c) = static_cast<float>(col[c]);
        }
    }

    /// Gaussian maps for a pose: base maps plus
    /// amplitude · n_i · Σ_{j ∈ elbows, knees} w_ij · sin(|θ_j|).
    GaussianMaps<float>
    maps(const Pose &pose) const {
        GaussianMaps<float> m = base_;
        static constexpr int kFlexJoints[] = {kLeftElbow, kRightElbow, kLeftKnee, kRightKnee};
        for (int i = 0; i < ct_->num_valid(); ++i) {
            const auto w = ct_->weights(i);
            double s     = 0;
            for (int j : kFlexJoints) s += w[j] * std::sin(pose.joint_rotations[j].norm());
            const Vec3d o = spec_.amplitude * s * ct_->base_normal(i);
            for (int c = 0; c < 3; ++c) m.values(i, gmap::kOffset + c) = static_cast<float>(o[c]);
        }
        return m;
    }

    Image
    render(const Skeleton &skel, const Pose &pose, const PerspectiveCamera<double> &cam) const {
        return render_posed(pose_gaussian_maps(*ct_, skin_, maps(pose), skel, pose), cam).forward.image;
    }

  private:
    const CanonicalTemplate *ct_;
    SparseSkinning skin_;
    SyntheticSpec spec_;
    GaussianMaps<float> base_;
};

inline std::string
camera_name(int k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "cam_%02d", k);
    return buf;
}

inline std::string
frame_name(int f) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "frame_%04d.png", f);
    return buf;
}

/// Writes a complete dataset into `dir`:
///
///   scene.cfg        scene configuration (paths relative to `dir`)
///   template.obj     canonical mesh          template.weights  per-vertex skinning weights
///   skeleton.txt     joint hierarchy         cameras.txt       one camera per line
///   poses.txt        one pose per frame      images/cam_XX/frame_XXXX.png
///
/// Output depends only on `spec` (including its seed), so regenerating reproduces every byte.
inline void
generate_dataset(const SyntheticSpec &spec, const std::string &dir,
                 const std::function<void(int frame)> &on_frame = {}) {
    spec.validate();
    namespace fs = std::filesystem;
    const fs::path root(dir);
    fs::create_directories(root / "images");
    const Skeleton skel        = make_body_skeleton(spec.body);
    const SkinnedTemplate mesh = make_body_template(spec.body);
    const auto cams            = make_camera_ring(spec.ring);
    const auto poses           = make_motion(skel, spec.frames, spec.seed);

    io::write_obj((root / "template.obj").string(), mesh);
    io::write_weights((root / "template.weights").string(), mesh.weights);
    io::write_skeleton((root / "skeleton.txt").string(), skel);
    io::write_poses((root / "poses.txt").string(), poses, skel.size());
    std::vector<io::NamedCamera> named;
    for (int k = 0; k < spec.ring.count; ++k) {
        named.push_back({camera_name(k), cams[k]});
        fs::create_directories(root / "images" / camera_name(k));
    }
    io::write_cameras((root / "cameras.txt").string(), named);

    io::KeyValueConfig cfg;
    cfg.set("template", "template.obj");
    cfg.set("weights", "template.weights");
    cfg.set("skeleton", "skeleton.txt");
    cfg.set("cameras", "cameras.txt");
    cfg.set("poses", "poses.txt");
    cfg.set("images", "images");
    cfg.set("resolution", std::to_string(spec.map_resolution));
    cfg.set("components", std::to_string(spec.components));
    cfg.set("held_out_camera", std::to_string(spec.held_out_camera));
    cfg.set("seed", std::to_string(spec.seed));
    std::ostringstream amp;
    amp << spec.amplitude;
    cfg.set("synthetic_amplitude", amp.str());
    cfg.save((root / "scene.cfg").string());

    // Ground truth is rendered from the template as read back from disk, so a fit that starts
    // from the dataset files sees exactly the same geometry.
    const SkinnedTemplate stored = io::read_skinned_template((root / "template.obj").string(),
                                                             (root / "template.weights").string());
    const CanonicalTemplate ct   = build_canonical_template(stored, spec.map_resolution);
    const ReferenceAvatar ref(ct, spec);
    for (int f = 0; f < spec.frames; ++f) {
        for (int k = 0; k < spec.ring.count; ++k) {
            io::write_png((root / "images" / camera_name(k) / frame_name(f)).string(),
                          ref.render(skel, poses[f], cams[k]));
        }
        if (on_frame) on_frame(f);
    }
}

} // namespace gsavatar::synthetic
