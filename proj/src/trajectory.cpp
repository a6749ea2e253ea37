// SPDX-License-Identifier: Apache-2.0

#include "nfbeam/trajectory.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nfbeam {

namespace {

struct ModeSpec {
    double speed0, speed1, yaw_rate_deg, climb_rate;
    bool hover;
};

// One row per task mode.
constexpr std::array<ModeSpec, kTaskModeCount> kModes = {{
    {5.0, 5.0, 0.0, 0.0, false},    // 0 slow cruise
    {12.0, 12.0, 0.0, 0.0, false},  // 1 fast cruise
    {8.0, 8.0, 12.0, 0.0, false},   // 2 left turn
    {8.0, 8.0, -12.0, 0.0, false},  // 3 right turn
    {6.0, 6.0, 0.0, 2.0, false},    // 4 ascend
    {6.0, 6.0, 0.0, -2.0, false},   // 5 descend
    {0.0, 0.0, 0.0, 0.0, true},     // 6 hover
    {4.0, 12.0, 0.0, 0.0, false},   // 7 accelerating
    {12.0, 4.0, 0.0, 0.0, false},   // 8 decelerating
    {8.0, 8.0, 8.0, 1.5, false},    // 9 climbing turn
}};

void check_mode(int mode) {
    if (mode < 0 || mode >= kTaskModeCount) {
        throw std::out_of_range("task mode " + std::to_string(mode) + " outside [0, 10)");
    }
}

}  // namespace

bool position_in_coverage(const Vec3& position, const Vec3& bs, const CoverageRanges& coverage) {
    const Vec3 rel = position - bs;
    const double r = rel.norm();
    if (r < coverage.r_min || r > coverage.r_max) return false;
    const FocalPoint fp = cart_to_focal(rel);
    return fp.theta >= coverage.theta_min && fp.theta <= coverage.theta_max &&
           fp.phi >= coverage.phi_min && fp.phi <= coverage.phi_max;
}

ModeKinematics mode_kinematics(int mode, const Scene& scene, const CoverageRanges& coverage,
                               double hover_jitter, double dt, Rng& rng) {
    check_mode(mode);
    const ModeSpec& spec = kModes[static_cast<std::size_t>(mode)];

    // Sample the start well inside the sector so short runs rarely escape.
    const double theta = rng.uniform(coverage.theta_min * 0.7, coverage.theta_max * 0.7);
    const double phi_lo = std::max(coverage.phi_min * 0.5, deg_to_rad(-10.0));
    const double phi = rng.uniform(phi_lo, coverage.phi_max * 0.6);
    const double r_lo = coverage.r_min + 0.15 * (coverage.r_max - coverage.r_min);
    const double r_hi = coverage.r_min + 0.75 * (coverage.r_max - coverage.r_min);
    const double r = rng.uniform(r_lo, r_hi);

    ModeKinematics kin;
    kin.start = scene.bs_position + focal_to_cart({theta, phi, r});
    kin.heading = rng.uniform(-3.14159265358979323846, 3.14159265358979323846);
    kin.speed0 = spec.speed0;
    kin.speed1 = spec.speed1;
    kin.yaw_rate = deg_to_rad(spec.yaw_rate_deg);
    kin.climb_rate = spec.climb_rate;
    kin.jitter = spec.hover ? hover_jitter : 0.0;
    const double top_speed = std::max(spec.speed0, spec.speed1);
    kin.max_speed = spec.hover ? 2.0 * hover_jitter / dt  // jitter ball diameter per slot
                               : std::hypot(top_speed, spec.climb_rate);
    return kin;
}

std::vector<Vec3> integrate_kinematics(const ModeKinematics& kin, int total_slots, double dt,
                                       Rng& rng) {
    if (total_slots < 2) throw std::invalid_argument("trajectory: need at least 2 slots");
    std::vector<Vec3> pos;
    pos.reserve(static_cast<std::size_t>(total_slots));

    if (kin.jitter > 0.0 || (kin.speed0 == 0.0 && kin.speed1 == 0.0 && kin.climb_rate == 0.0)) {
        for (int t = 0; t < total_slots; ++t) {
            Vec3 p = kin.start;
            if (kin.jitter > 0.0) {
                // Rejection-sample inside the jitter ball so displacement is bounded.
                Vec3 d;
                do {
                    d = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
                } while (d.norm_sq() > 1.0);
                p += d * kin.jitter;
            }
            pos.push_back(p);
        }
        return pos;
    }

    Vec3 p = kin.start;
    double heading = kin.heading;
    pos.push_back(p);
    for (int t = 1; t < total_slots; ++t) {
        const double frac = static_cast<double>(t - 1) / std::max(1, total_slots - 2);
        const double speed = kin.speed0 + (kin.speed1 - kin.speed0) * frac;
        p += Vec3{speed * std::cos(heading), speed * std::sin(heading), kin.climb_rate} * dt;
        heading += kin.yaw_rate * dt;
        pos.push_back(p);
    }
    return pos;
}

std::vector<Vec3> generate_trajectory(const Scene& scene, const CoverageRanges& coverage,
                                      int mode, int total_slots, double dt, std::uint64_t seed,
                                      const TrajectoryParams& params) {
    check_mode(mode);
    if (total_slots < 2) throw std::invalid_argument("trajectory: need at least 2 slots");
    if (dt <= 0.0) throw std::invalid_argument("trajectory: dt must be > 0");

    Rng rng(mix64(seed));
    for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
        ModeKinematics kin = mode_kinematics(mode, scene, coverage, params.hover_jitter, dt, rng);
        std::vector<Vec3> pos = integrate_kinematics(kin, total_slots, dt, rng);
        bool ok = true;
        for (const Vec3& p : pos) {
            if (!position_in_coverage(p, scene.bs_position, coverage)) {
                ok = false;
                break;
            }
            for (const Aabb& box : scene.buildings) {
                if (box.contains(p)) {
                    ok = false;
                    break;
                }
            }
            if (!ok) break;
        }
        if (ok) return pos;
    }
    throw std::runtime_error("trajectory: no collision-free trajectory for mode " +
                             std::to_string(mode) + " after " +
                             std::to_string(params.max_attempts) + " attempts");
}

std::vector<Vec3> add_gps_noise(const std::vector<Vec3>& positions, double sigma_gps,
                                std::uint64_t seed) {
    if (sigma_gps < 0.0) throw std::invalid_argument("gps: sigma must be >= 0");
    std::vector<Vec3> noisy = positions;
    if (sigma_gps == 0.0) return noisy;
    Rng rng(mix64(seed));
    for (Vec3& p : noisy) {
        p.x += rng.normal(0.0, sigma_gps);
        p.y += rng.normal(0.0, sigma_gps);
        p.z += rng.normal(0.0, sigma_gps);
    }
    return noisy;
}

std::vector<Vec3> sample_point_cloud(const Scene& scene, int count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("point cloud: count must be >= 1");
    Rng rng(mix64(seed));
    std::vector<Vec3> points;
    points.reserve(static_cast<std::size_t>(count));

    // Collect BS-visible faces (outward normal toward the BS) of every
    // building; bottom faces never qualify.
    struct FaceRect {
        Vec3 center, u_axis, v_axis;
        double half_u, half_v, area;
    };
    std::vector<FaceRect> faces;
    double total_area = 0.0;
    for (const Aabb& b : scene.buildings) {
        const Vec3 c = b.center();
        const double hx = (b.hi.x - b.lo.x) / 2, hy = (b.hi.y - b.lo.y) / 2,
                     hz = (b.hi.z - b.lo.z) / 2;
        const FaceRect candidates[5] = {
            {{b.hi.x, c.y, c.z}, {0, 1, 0}, {0, 0, 1}, hy, hz, 4 * hy * hz},
            {{b.lo.x, c.y, c.z}, {0, 1, 0}, {0, 0, 1}, hy, hz, 4 * hy * hz},
            {{c.x, b.hi.y, c.z}, {1, 0, 0}, {0, 0, 1}, hx, hz, 4 * hx * hz},
            {{c.x, b.lo.y, c.z}, {1, 0, 0}, {0, 0, 1}, hx, hz, 4 * hx * hz},
            {{c.x, c.y, b.hi.z}, {1, 0, 0}, {0, 1, 0}, hx, hy, 4 * hx * hy},
        };
        const Vec3 normals[5] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}};
        for (int f = 0; f < 5; ++f) {
            if (normals[f].dot(scene.bs_position - candidates[f].center) > 0.0) {
                faces.push_back(candidates[f]);
                total_area += candidates[f].area;
            }
        }
    }

    for (int i = 0; i < count; ++i) {
        if (faces.empty()) {
            points.push_back({rng.uniform(scene.region_min.x, scene.region_max.x),
                              rng.uniform(scene.region_min.y, scene.region_max.y), 0.0});
            continue;
        }
        double pick = rng.uniform() * total_area;
        std::size_t fi = 0;
        for (; fi + 1 < faces.size(); ++fi) {
            if (pick < faces[fi].area) break;
            pick -= faces[fi].area;
        }
        const FaceRect& f = faces[fi];
        points.push_back(f.center + f.u_axis * rng.uniform(-f.half_u, f.half_u) +
                         f.v_axis * rng.uniform(-f.half_v, f.half_v));
    }
    return points;
}

int task_mode_label(int mode) {
    check_mode(mode);
    return mode;
}

}  // namespace nfbeam
