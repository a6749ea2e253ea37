// SPDX-License-Identifier: Apache-2.0
//
// UAV trajectory synthesis, noisy GPS observations, scene-derived point
// clouds and task-mode labels.
//
// Ten parameterized motion modes:
//   0 slow cruise        1 fast cruise        2 left turn
//   3 right turn         4 ascend             5 descend
//   6 hover              7 accelerating       8 decelerating
//   9 climbing turn
// All are constant-speed/rate kinematics except hover (bounded jitter) and
// the accel/decel pair (linear speed ramp).

#pragma once

#include <cstdint>
#include <vector>

#include "nfbeam/array_codebook.hpp"
#include "nfbeam/geometry.hpp"
#include "nfbeam/rng.hpp"
#include "nfbeam/scene_channel.hpp"

namespace nfbeam {

inline constexpr int kTaskModeCount = 10;

struct TrajectoryParams {
    int t_prev = 10;
    int t_pred = 10;
    double dt = 0.1;          // slot interval, seconds
    double sigma_gps = 0.5;   // per-axis GPS noise, meters
    int cloud_points = 1024;  // P
    double hover_jitter = 0.05;
    int max_attempts = 200;

    int total_slots() const { return t_prev + t_pred; }
};

struct TrajectorySequence {
    std::uint64_t id = 0;
    int mode = 0;
    double dt = 0.1;
    std::vector<Vec3> positions;    // T true positions
    std::vector<Vec3> gps;          // T noisy positions
    std::vector<Vec3> point_cloud;  // P points, static per sequence
};

struct ModeKinematics {
    Vec3 start;
    double heading = 0.0;     // initial horizontal heading, radians
    double speed0 = 0.0;      // horizontal speed at first slot, m/s
    double speed1 = 0.0;      // horizontal speed at last slot, m/s
    double yaw_rate = 0.0;    // radians per second
    double climb_rate = 0.0;  // m/s
    double jitter = 0.0;      // hover jitter radius, meters
    double max_speed = 0.0;   // declared cap, used by tests
};

// Seeded draw of a start point and heading for a mode; start points are
// sampled inside the coverage sector relative to the BS.
ModeKinematics mode_kinematics(int mode, const Scene& scene, const CoverageRanges& coverage,
                               double hover_jitter, double dt, Rng& rng);

// Pure kinematic integration starting at kin.start.
std::vector<Vec3> integrate_kinematics(const ModeKinematics& kin, int total_slots, double dt,
                                       Rng& rng);

// Rejection-samples kinematics until every position stays inside the
// coverage sector and outside all buildings. Throws std::runtime_error after
// bounded retries and std::invalid_argument for a bad mode or T < 2.
std::vector<Vec3> generate_trajectory(const Scene& scene, const CoverageRanges& coverage,
                                      int mode, int total_slots, double dt, std::uint64_t seed,
                                      const TrajectoryParams& params);

// Per-axis i.i.d. Gaussian noise with standard deviation sigma_gps.
std::vector<Vec3> add_gps_noise(const std::vector<Vec3>& positions, double sigma_gps,
                                std::uint64_t seed);

// P points sampled by area over BS-visible building faces; empty scenes fall
// back to the ground plane inside the scene region.
std::vector<Vec3> sample_point_cloud(const Scene& scene, int count, std::uint64_t seed);

// Identity mapping into the learnable task-embedding table. Throws
// std::out_of_range outside [0, 10).
int task_mode_label(int mode);

bool position_in_coverage(const Vec3& position, const Vec3& bs, const CoverageRanges& coverage);

}  // namespace nfbeam
