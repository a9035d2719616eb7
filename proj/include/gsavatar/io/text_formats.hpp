// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsavatar/core/camera.hpp"
#include "gsavatar/io/config.hpp"
#include "gsavatar/kinematics/skeleton.hpp"
#include "gsavatar/kinematics/skinned_template.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

// Text formats. All files accept `#` comments and blank lines.
//
//   mesh (OBJ subset)   v x y z            one vertex
//                       f a b c            one triangle, 1-based; "a/t/n" tokens accepted
//   weights             joints J
//                       <n> j1 w1 ... jn wn   one line per vertex, in OBJ vertex order
//   skeleton            <name> <parent> <ox> <oy> <oz>   one joint per line, topological order
//   poses               joints J
//                       <gx gy gz> <tx ty tz> <r0x r0y r0z> ... one frame per line
//   cameras             <name> <width> <height> <fx> <fy> <cx> <cy> <R 9 row-major> <t 3>

namespace gsavatar::io {

namespace detail {

inline std::ifstream
open_text(const std::string &path) {
    std::ifstream f(path);
    GSAVATAR_CHECK(f.good(), IoError, "cannot open " + path);
    return f;
}

/// Yields non-empty, comment-stripped lines with their 1-based line numbers.
template <class Fn>
void
for_each_line(std::istream &in, Fn &&fn) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (!line.empty()) {
            fn(line, lineno);
        }
    }
}

inline std::string
where(const std::string &path, int line) {
    return path + ":" + std::to_string(line) + ": ";
}

inline std::ofstream
create_text(const std::string &path) {
    std::ofstream f(path);
    GSAVATAR_CHECK(f.good(), IoError, "cannot write " + path);
    f << std::setprecision(17);
    return f;
}

} // namespace detail

inline void
write_obj(const std::string &path, const SkinnedTemplate &mesh) {
    auto f = detail::create_text(path);
    for (const auto &v : mesh.vertices) {
        f << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    for (const auto &t : mesh.triangles) {
        f << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    }
    GSAVATAR_CHECK(f.good(), IoError, "write failed: " + path);
}

/// Reads vertices and triangles; weights and normals are left empty.
inline SkinnedTemplate
read_obj(const std::string &path) {
    auto f = detail::open_text(path);
    SkinnedTemplate m;
    detail::for_each_line(f, [&](const std::string &line, int no) {
        std::istringstream in(line);
        std::string tag;
        in >> tag;
        if (tag == "v") {
            Vec3d v;
            in >> v.x() >> v.y() >> v.z();
            GSAVATAR_CHECK(!in.fail(), IoError, detail::where(path, no) + "bad vertex");
            m.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (in >> tok) {
                idx.push_back(std::stoi(tok.substr(0, tok.find('/'))) - 1);
            }
            GSAVATAR_CHECK(idx.size() >= 3, IoError, detail::where(path, no) + "face needs 3 indices");
            for (std::size_t k = 1; k + 1 < idx.size(); ++k) { // fan-triangulate polygons
                m.triangles.push_back({idx[0], idx[k], idx[k + 1]});
            }
        }
    });
    return m;
}

inline void
write_weights(const std::string &path, const WeightMatrix &w) {
    auto f = detail::create_text(path);
    f << "joints " << w.cols() << '\n';
    for (Eigen::Index v = 0; v < w.rows(); ++v) {
        int n = 0;
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            n += w(v, j) != 0.0;
        }
        f << n;
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            if (w(v, j) != 0.0) {
                f << ' ' << j << ' ' << w(v, j);
            }
        }
        f << '\n';
    }
}

inline WeightMatrix
read_weights(const std::string &path, int vertex_count) {
    auto f = detail::open_text(path);
    int joints = -1;
    std::vector<std::vector<std::pair<int, double>>> rows;
    detail::for_each_line(f, [&](const std::string &line, int no) {
        std::istringstream in(line);
        if (joints < 0) {
            std::string tag;
            in >> tag >> joints;
            GSAVATAR_CHECK(tag == "joints" && !in.fail() && joints > 0, IoError,
                           detail::where(path, no) + "expected 'joints J'");
            return;
        }
        int n = 0;
        in >> n;
        std::vector<std::pair<int, double>> row(n);
        for (auto &[j, w] : row) {
            in >> j >> w;
            GSAVATAR_CHECK(!in.fail() && j >= 0 && j < joints, IoError,
                           detail::where(path, no) + "bad joint/weight pair");
        }
        rows.push_back(std::move(row));
    });
    GSAVATAR_CHECK(static_cast<int>(rows.size()) == vertex_count, IoError,
                   path + ": " + std::to_string(rows.size()) + " weight rows for " +
                       std::to_string(vertex_count) + " vertices");
    WeightMatrix w = WeightMatrix::Zero(vertex_count, joints);
    for (int v = 0; v < vertex_count; ++v) {
        for (const auto &[j, x] : rows[v]) {
            w(v, j) += x;
        }
    }
    return w;
}

inline void
write_skeleton(const std::string &path, const Skeleton &s) {
    auto f = detail::create_text(path);
    for (const auto &j : s.joints) {
        f << j.name << ' ' << j.parent << ' ' << j.offset.x() << ' ' << j.offset.y() << ' '
          << j.offset.z() << '\n';
    }
}

inline Skeleton
read_skeleton(const std::string &path) {
    auto f = detail::open_text(path);
    Skeleton s;
    detail::for_each_line(f, [&](const std::string &line, int no) {
        std::istringstream in(line);
        Joint j;
        in >> j.name >> j.parent >> j.offset.x() >> j.offset.y() >> j.offset.z();
        GSAVATAR_CHECK(!in.fail(), IoError, detail::where(path, no) + "bad joint record");
        s.joints.push_back(j);
    });
    s.validate();
    return s;
}

inline void
write_poses(const std::string &path, const std::vector<Pose> &poses, int joints) {
    auto f = detail::create_text(path);
    f << "joints " << joints << '\n';
    for (const auto &p : poses) {
        GSAVATAR_CHECK(static_cast<int>(p.joint_rotations.size()) == joints, ContractError,
                       "pose joint count mismatch");
        f << p.global_rotation.x() << ' ' << p.global_rotation.y() << ' ' << p.global_rotation.z()
          << ' ' << p.global_translation.x() << ' ' << p.global_translation.y() << ' '
          << p.global_translation.z();
        for (const auto &r : p.joint_rotations) {
            f << ' ' << r.x() << ' ' << r.y() << ' ' << r.z();
        }
        f << '\n';
    }
}

inline std::vector<Pose>
read_poses(const std::string &path) {
    auto f     = detail::open_text(path);
    int joints = -1;
    std::vector<Pose> poses;
    detail::for_each_line(f, [&](const std::string &line, int no) {
        std::istringstream in(line);
        if (joints < 0) {
            std::string tag;
            in >> tag >> joints;
            GSAVATAR_CHECK(tag == "joints" && !in.fail() && joints > 0, IoError,
                           detail::where(path, no) + "expected 'joints J'");
            return;
        }
        Pose p = Pose::zero(joints);
        in >> p.global_rotation.x() >> p.global_rotation.y() >> p.global_rotation.z() >>
            p.global_translation.x() >> p.global_translation.y() >> p.global_translation.z();
        for (auto &r : p.joint_rotations) {
            in >> r.x() >> r.y() >> r.z();
        }
        std::string extra;
        GSAVATAR_CHECK(!in.fail() && !(in >> extra), IoError,
                       detail::where(path, no) + "expected 6 + 3*" + std::to_string(joints) + " values");
        poses.push_back(std::move(p));
    });
    return poses;
}

struct NamedCamera {
    std::string name;
    PerspectiveCamera<double> camera;
};

inline void
write_cameras(const std::string &path, const std::vector<NamedCamera> &cams) {
    auto f = detail::create_text(path);
    for (const auto &[name, c] : cams) {
        f << name << ' ' << c.width << ' ' << c.height << ' ' << c.fx << ' ' << c.fy << ' ' << c.cx
          << ' ' << c.cy;
        for (int r = 0; r < 3; ++r) {
            for (int k = 0; k < 3; ++k) {
                f << ' ' << c.rotation(r, k);
            }
        }
        f << ' ' << c.translation.x() << ' ' << c.translation.y() << ' ' << c.translation.z() << '\n';
    }
}

inline std::vector<NamedCamera>
read_cameras(const std::string &path) {
    auto f = detail::open_text(path);
    std::vector<NamedCamera> cams;
    detail::for_each_line(f, [&](const std::string &line, int no) {
        std::istringstream in(line);
        NamedCamera nc;
        auto &c = nc.camera;
        in >> nc.name >> c.width >> c.height >> c.fx >> c.fy >> c.cx >> c.cy;
        for (int r = 0; r < 3; ++r) {
            for (int k = 0; k < 3; ++k) {
                in >> c.rotation(r, k);
            }
        }
        in >> c.translation.x() >> c.translation.y() >> c.translation.z();
        GSAVATAR_CHECK(!in.fail() && c.width > 0 && c.height > 0, IoError,
                       detail::where(path, no) + "bad camera record");
        cams.push_back(nc);
    });
    return cams;
}

/// Loads an OBJ mesh plus its weight sidecar, computes normals and validates.
inline SkinnedTemplate
read_skinned_template(const std::string &obj_path, const std::string &weights_path) {
    SkinnedTemplate m = read_obj(obj_path);
    m.weights         = read_weights(weights_path, static_cast<int>(m.vertices.size()));
    m.compute_normals();
    m.validate();
    return m;
}

} // namespace gsavatar::io
