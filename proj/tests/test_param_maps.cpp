// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/kinematics/skeleton.hpp"
#include "gsavatar/maps/canonical_template.hpp"
#include "gsavatar/maps/gaussian_map.hpp"
#include "gsavatar/maps/position_maps.hpp"
#include "gsavatar/maps/view_direction.hpp"
#include "gsavatar/synthetic/body.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace gsavatar;

namespace {

// Flat w×h rectangle in the z=0 plane centered at the origin, n×n quads, one joint.
SkinnedTemplate
quad(double w, double h, int n) {
    SkinnedTemplate t;
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            t.vertices.push_back(Vec3d(w * (double(i) / n - 0.5), h * (double(j) / n - 0.5), 0));
        }
    }
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int a = j * (n + 1) + i;
            t.triangles.push_back({a, a + 1, a + n + 2});
            t.triangles.push_back({a, a + n + 2, a + n + 1});
        }
    }
    t.weights = WeightMatrix::Ones(static_cast<Eigen::Index>(t.vertices.size()), 1);
    t.compute_normals();
    return t;
}

SkinnedTemplate
uv_sphere(double r, int rings, int segments) {
    SkinnedTemplate t;
    t.vertices.push_back(Vec3d(0, r, 0));
    for (int i = 1; i < rings; ++i) {
        const double th = std::numbers::pi * i / rings;
        for (int s = 0; s < segments; ++s) {
            const double ph = 2 * std::numbers::pi * s / segments;
            t.vertices.push_back(r * Vec3d(std::sin(th) * std::cos(ph), std::cos(th),
                                           std::sin(th) * std::sin(ph)));
        }
    }
    t.vertices.push_back(Vec3d(0, -r, 0));
    const int south = static_cast<int>(t.vertices.size()) - 1;
    auto idx        = [&](int ring, int s) { return 1 + (ring - 1) * segments + s % segments; };
    for (int s = 0; s < segments; ++s) {
        t.triangles.push_back({0, idx(1, s + 1), idx(1, s)});
        t.triangles.push_back({south, idx(rings - 1, s), idx(rings - 1, s + 1)});
    }
    for (int i = 1; i + 1 < rings; ++i) {
        for (int s = 0; s < segments; ++s) {
            t.triangles.push_back({idx(i, s), idx(i, s + 1), idx(i + 1, s + 1)});
            t.triangles.push_back({idx(i, s), idx(i + 1, s + 1), idx(i + 1, s)});
        }
    }
    t.weights = WeightMatrix::Ones(static_cast<Eigen::Index>(t.vertices.size()), 1);
    t.compute_normals();
    return t;
}

Pose
random_pose(std::mt19937_64 &rng, int joints, double max_angle) {
    std::uniform_real_distribution<double> u(-max_angle, max_angle);
    Pose p = Pose::zero(joints);
    for (auto &r : p.joint_rotations) {
        r = Vec3d(u(rng), u(rng), u(rng));
    }
    return p;
}

struct BodyFixture {
    SkinnedTemplate mesh = synthetic::make_body_template();
    Skeleton skel        = synthetic::make_body_skeleton();
    CanonicalTemplate ct = build_canonical_template(mesh, 128);
};

const BodyFixture &
body() {
    static const BodyFixture f;
    return f;
}

} // namespace

TEST(CanonicalTemplate, QuadMasksAreMatchingRectangles) {
    const auto ct = build_canonical_template(quad(1.0, 0.5, 4), 64);
    const auto &f = ct.view(MapSide::kFront), &b = ct.view(MapSide::kBack);
    ASSERT_GT(f.num_valid(), 0);
    EXPECT_EQ(f.mask, b.mask);
    // Solid rectangle: the covered pixels are exactly the bounding box of the covered pixels.
    int x0 = 64, x1 = -1, y0 = 64, y1 = -1;
    for (int p : f.valid_pixels) {
        x0 = std::min(x0, p % 64), x1 = std::max(x1, p % 64);
        y0 = std::min(y0, p / 64), y1 = std::max(y1, p / 64);
    }
    EXPECT_EQ(f.num_valid(), (x1 - x0 + 1) * (y1 - y0 + 1));
    EXPECT_NEAR(double(x1 - x0 + 1) / (y1 - y0 + 1), 2.0, 0.1);
    EXPECT_EQ(ct.num_valid(), 2 * f.num_valid());
}

TEST(CanonicalTemplate, BasePositionAtProjectedVertex) {
    const auto mesh = quad(1.0, 0.8, 10);
    const auto ct   = build_canonical_template(mesh, 128);
    const double ps = ct.pixel_size();
    for (int s = 0; s < 2; ++s) {
        const TemplateView &v = ct.views[s];
        for (const auto &p : mesh.vertices) {
            const Vec2<double> px = v.camera.to_pixel(p);
            const int pix = static_cast<int>(px.y()) * v.width() + static_cast<int>(px.x());
            const int i   = v.pixel_to_valid[pix];
            if (i < 0) {
                continue; // boundary vertex whose pixel center falls outside the quad
            }
            EXPECT_LE((v.base_position[i] - p).cwiseAbs().maxCoeff(), 0.5 * ps + 1e-12);
        }
    }
}

TEST(CanonicalTemplate, SphereFrontBackCoverage) {
    const double voxel = 0.02; // weight-volume voxel size
    const auto mesh    = uv_sphere(0.3, 48, 96);
    const auto ct      = build_canonical_template(mesh, 512);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0, 1);
    std::vector<Vec3d> base;
    for (int i = 0; i < ct.num_valid(); ++i) {
        base.push_back(ct.base_position(i));
    }
    double worst = 0;
    for (int k = 0; k < 1000; ++k) {
        const Vec3d p = 0.3 * Vec3d(n(rng), n(rng), n(rng)).normalized();
        double best   = 1e9;
        for (const auto &b : base) {
            best = std::min(best, (b - p).squaredNorm());
        }
        worst = std::max(worst, std::sqrt(best));
    }
    EXPECT_LE(worst, 2 * voxel);
}

TEST(CanonicalTemplate, CustomFrustumMustFit) {
    const auto mesh = quad(1.0, 1.0, 2);
    auto cams       = default_template_cameras(mesh, 64);
    EXPECT_NO_THROW(build_canonical_template(mesh, cams));
    cams[1].pixels_per_meter *= 1.2; // template now overflows the 5% margin
    EXPECT_THROW(build_canonical_template(mesh, cams), ConfigError);
    cams = default_template_cameras(mesh, 64);
    cams[0].center.x() += 0.3;
    EXPECT_THROW(build_canonical_template(mesh, cams), ConfigError);
}

TEST(CanonicalTemplate, BaseDataOnSurfaceAndWeightsValid) {
    const auto &ct = body().ct;
    for (int s = 0; s < 2; ++s) {
        const TemplateView &v = ct.views[s];
        for (int i = 0; i < v.num_valid(); ++i) {
            const auto &t = ct.mesh.triangles[v.face[i]];
            const Vec3d &a = ct.mesh.vertices[t[0]], &b = ct.mesh.vertices[t[1]],
                        &c = ct.mesh.vertices[t[2]];
            const Vec3d n  = (b - a).cross(c - a).normalized();
            ASSERT_LT(std::abs((v.base_position[i] - a).dot(n)), 1e-12);
            ASSERT_NEAR(v.base_normal[i].norm(), 1.0, 1e-12);
        }
    }
    for (int i = 0; i < ct.num_valid(); ++i) {
        ASSERT_NEAR(ct.base_weights.row(i).sum(), 1.0, 1e-9);
        ASSERT_GE(ct.base_weights.row(i).minCoeff(), 0.0);
    }
}

TEST(PositionMaps, ZeroPoseEqualsBase) {
    const auto &f = body();
    const auto pm = render_position_maps(f.ct, f.skel, Pose::zero(f.skel.size()));
    for (int i = 0; i < f.ct.num_valid(); ++i) {
        ASSERT_LT((pm.points[i] - f.ct.base_position(i)).norm(), 1e-12);
    }
}

TEST(PositionMaps, UniformTranslation) {
    const auto &f = body();
    const Vec3d t(0.1, -0.2, 0.3);
    std::vector<RigidTransform<double>> T(f.skel.size(), RigidTransform<double>{Mat3d::Identity(), t});
    const auto pm = render_position_maps(f.ct, std::span<const RigidTransform<double>>(T));
    for (int i = 0; i < f.ct.num_valid(); ++i) {
        ASSERT_LT((pm.points[i] - (f.ct.base_position(i) + t)).norm(), 1e-12);
    }
}

TEST(PositionMaps, MatchesDirectLbsOfInterpolatedData) {
    const auto &f = body();
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 3; ++trial) {
        const Pose p = random_pose(rng, f.skel.size(), 0.8);
        const auto T = forward_kinematics(f.skel, p);
        const auto pm = render_position_maps(f.ct, f.skel, p);
        int sample    = 0;
        for (int s = 0; s < 2; ++s) {
            const TemplateView &v = f.ct.views[s];
            for (int i = 0; i < v.num_valid(); ++i, ++sample) {
                // Oracle: interpolate vertex data by hand, blend 4x4 matrices, apply.
                const auto &tri = f.mesh.triangles[v.face[i]];
                const Vec3d &b  = v.barycentric[i];
                Vec3d x         = Vec3d::Zero();
                Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(f.skel.size());
                for (int k = 0; k < 3; ++k) {
                    x += b[k] * f.mesh.vertices[tri[k]];
                    w += b[k] * f.mesh.weights.row(tri[k]);
                }
                w /= w.sum();
                Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
                for (int j = 0; j < f.skel.size(); ++j) {
                    Eigen::Matrix4d Tj   = Eigen::Matrix4d::Identity();
                    Tj.block<3, 3>(0, 0) = T[j].rotation;
                    Tj.block<3, 1>(0, 3) = T[j].translation;
                    M += w[j] * Tj;
                }
                const Vec3d expect = (M * x.homogeneous()).head<3>();
                ASSERT_LT((pm.points[sample] - expect).norm(), 1e-6);
            }
        }
    }
}

TEST(PositionMaps, DenseMapsRespectMaskAcrossPoses) {
    const auto &f = body();
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const auto pm = render_position_maps(f.ct, f.skel, random_pose(rng, f.skel.size(), 1.0));
        for (int s = 0; s < 2; ++s) {
            const auto side = static_cast<MapSide>(s);
            const auto d    = pm.dense(f.ct, side);
            for (int p = 0; p < d.height * d.width; ++p) {
                const bool nonzero = d.pixel(p)[0] != 0 || d.pixel(p)[1] != 0 || d.pixel(p)[2] != 0;
                if (!f.ct.views[s].mask[p]) {
                    ASSERT_FALSE(nonzero);
                }
            }
        }
        const auto back = PositionMaps::from_dense(f.ct, pm.dense(f.ct, MapSide::kFront),
                                                   pm.dense(f.ct, MapSide::kBack));
        ASSERT_EQ(back.points, pm.points);
    }
    auto pm    = render_position_maps(f.ct, f.skel, Pose::zero(f.skel.size()));
    auto front = pm.dense(f.ct, MapSide::kFront);
    front.pixel(0)[0] = 1.0; // corner pixel is outside the body mask
    ASSERT_FALSE(f.ct.views[0].mask[0]);
    EXPECT_THROW(PositionMaps::from_dense(f.ct, front, pm.dense(f.ct, MapSide::kBack)), ContractError);
}

TEST(ExtractGaussians, OffsetsAndCount) {
    const auto &ct = body().ct;
    GaussianMaps<float> maps;
    maps.values = GaussianMaps<float>::Rows::Zero(ct.num_valid(), gmap::kChannels);
    maps.values.col(gmap::kRotation).setOnes();
    auto gs = extract_gaussians(ct, maps);
    int mask_count = 0;
    for (const auto &v : ct.views) {
        for (auto m : v.mask) {
            mask_count += m;
        }
    }
    ASSERT_EQ(static_cast<int>(gs.size()), mask_count);
    for (int i = 0; i < ct.num_valid(); ++i) {
        ASSERT_EQ(gs[i].position, ct.base_position(i).cast<float>());
    }
    maps.values.col(gmap::kOffset + 2).setConstant(0.01f);
    gs = extract_gaussians(ct, maps);
    for (int i = 0; i < ct.num_valid(); ++i) {
        const Vec3<float> expect = ct.base_position(i).cast<float>() + Vec3<float>(0, 0, 0.01f);
        ASSERT_EQ(gs[i].position, expect);
    }
}

TEST(ExtractGaussians, CommutesWithSkinning) {
    const auto &f = body();
    std::mt19937_64 rng(14);
    const Pose p = random_pose(rng, f.skel.size(), 0.8);
    const auto T = forward_kinematics(f.skel, p);
    GaussianMaps<double> maps;
    maps.values = GaussianMaps<double>::Rows::Zero(f.ct.num_valid(), gmap::kChannels);
    maps.values.col(gmap::kRotation).setOnes();
    const auto gs = extract_gaussians(f.ct, maps);
    const auto pm = render_position_maps(f.ct, f.skel, p);
    for (int i = 0; i < f.ct.num_valid(); ++i) {
        const auto g = lbs_gaussian(gs[i], f.ct.weights(i), std::span<const RigidTransform<double>>(T));
        ASSERT_LT((g.position - pm.points[i]).norm(), 1e-6);
    }
}

TEST(ViewDirection, FarCameraAndUnitNorm) {
    const auto &f = body();
    const auto cam = PerspectiveCamera<double>::look_at(Vec3d(0, 1, 1e6), Vec3d(0, 1, 0),
                                                        Vec3d(0, 1, 0), 500.0, 64, 64);
    const auto dirs = build_view_direction_map(f.ct, f.skel, Pose::zero(f.skel.size()), cam);
    ASSERT_EQ(static_cast<int>(dirs.size()), f.ct.num_valid());
    for (const auto &d : dirs) {
        ASSERT_NEAR(d.norm(), 1.0, 1e-5);
        ASSERT_LT((d - Vec3d::UnitZ()).norm(), 1e-3);
    }
}

TEST(ViewDirection, EquivariantUnderJointRotation) {
    const auto &f = body();
    std::mt19937_64 rng(15);
    Pose p                 = random_pose(rng, f.skel.size(), 0.5);
    p.global_rotation      = Vec3d(0.2, 0.4, -0.1);
    p.global_translation   = Vec3d(0.3, 0.0, -0.2);
    const auto cam         = PerspectiveCamera<double>::look_at(Vec3d(0.5, 1.2, 3.0), Vec3d(0, 1, 0),
                                                                Vec3d(0, 1, 0), 300.0, 64, 64);
    const auto a           = build_view_direction_map(f.ct, f.skel, p, cam);
    const Mat3d Q          = test::random_rotation(rng);
    Pose q                 = p;
    const Mat3d RG         = Q * p.global_transform().rotation;
    const Eigen::AngleAxisd aa(RG);
    q.global_rotation      = aa.angle() * aa.axis();
    q.global_translation   = Q * p.global_translation;
    auto cam2              = cam;
    cam2.rotation          = cam.rotation * Q.transpose(); // camera center rotates by Q
    const auto b           = build_view_direction_map(f.ct, f.skel, q, cam2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_LT((a[i] - b[i]).norm(), 1e-5);
    }
}
