// SPDX-License-Identifier: Apache-2.0
//
// Geometric urban scene with blockage, single-bounce near-field channel
// synthesis and link-quality computation.
//
// The channel at antenna m is h_m = sum_l a_l * exp(-j * k * r_{l,m}) with
// exact per-antenna path distances; path amplitudes use the centroid
// reference distance (LoS: lambda / (4*pi*r), bounce: gamma * lambda /
// (4*pi*(r1+r2))).

#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfbeam/array_codebook.hpp"
#include "nfbeam/geometry.hpp"

namespace nfbeam {

struct Scatterer {
    Vec3 position;
    double reflection = 0.5;  // in (0, 1]
    int building = -1;
    int face = -1;  // 0:+x 1:-x 2:+y 3:-y 4:top
};

struct Scene {
    Vec3 bs_position;  // array centroid in world coordinates
    std::vector<Aabb> buildings;
    std::vector<Scatterer> scatterers;
    std::uint64_t seed = 0;
    // Horizontal extent used for building placement and ground-plane fill.
    Vec3 region_min{20.0, -80.0, 0.0};
    Vec3 region_max{150.0, 80.0, 0.0};
};

enum class PathType { kLos, kBounce };

struct PropagationPath {
    PathType type = PathType::kLos;
    int scatterer = -1;                  // index into Scene::scatterers for bounces
    double reference_distance = 0.0;     // centroid-to-centroid, meters
    std::complex<double> amplitude{0.0, 0.0};
};

using PathSet = std::vector<PropagationPath>;

struct ChannelVector {
    std::vector<std::complex<double>> h;
};

struct LinkParams {
    double p_r = 1.0;     // transmit power, linear
    double sigma2 = 1.0;  // noise power, linear
};

struct SceneGenParams {
    int building_count = 6;
    Vec3 region_min{20.0, -80.0, 0.0};
    Vec3 region_max{150.0, 80.0, 0.0};
    int scatterers_per_building = 4;
    double footprint_min = 10.0, footprint_max = 30.0;
    double height_min = 10.0, height_max = 40.0;
    double reflection_min = 0.3, reflection_max = 0.7;
    double bs_clearance = 15.0;  // keep-out radius around the BS, meters
    int max_attempts = 200;
    Vec3 bs_position{0.0, 0.0, 20.0};
};

// Deterministic for a given seed. Buildings are mutually non-overlapping and
// keep clear of the BS. Scatterers sit on BS-facing faces: face centers
// first, then seeded uniform points on those faces. Throws std::runtime_error
// when placement fails after bounded retries.
Scene generate_scene(std::uint64_t seed, const SceneGenParams& params);

// LoS path iff the BS-UAV segment clears every box; one bounce per scatterer
// whose BS and UAV segments both clear every box (segments start slightly
// off the host face so the host building does not occlude its own
// scatterer). Amplitudes: LoS lambda/(4*pi*r), bounce gamma*lambda/
// (4*pi*(r1+r2)). Throws std::domain_error when uav is inside a building.
PathSet enumerate_paths(const Scene& scene, const Vec3& uav, double wavelength);

ChannelVector channel_vector(const ArrayConfig& cfg, const PathSet& paths, const Scene& scene,
                             const Vec3& uav);

// p_r * |w^H h|^2 / sigma2. Throws std::invalid_argument on dimension
// mismatch.
double beamformed_snr(std::span<const std::complex<double>> w, const ChannelVector& h,
                      const LinkParams& link);

// log2(1 + snr). Throws std::domain_error for negative snr.
double spectral_efficiency(double snr);

// Transmit power such that a matched codeword on a LoS link at
// reference_distance hits target_snr_db: p_r = snr * sigma2 * (4*pi*r /
// (M*lambda))^2.
double calibrate_transmit_power(const ArrayConfig& cfg, double target_snr_db = 20.0,
                                double reference_distance = 100.0, double sigma2 = 1.0);

// Versioned JSON round trip; see docs/formats.md.
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

}  // namespace nfbeam
