// SPDX-License-Identifier: Apache-2.0
//
// Shared test utilities, including the independent far-field reference used
// against the near-field steering vectors.

#pragma once

#include <complex>
#include <vector>

#include "nfbeam/array_codebook.hpp"
#include "nfbeam/geometry.hpp"

namespace nfbeam::testing {

// Far-field plane-wave steering vector, computed from first principles:
// common phase exp(-j*k*r) times the linear term exp(+j*k*(a_m . u)) with u
// the unit vector toward the focal point. Written independently of
// steering_vector on purpose.
inline std::vector<std::complex<double>> plane_wave_vector(const ArrayConfig& cfg, double theta,
                                                           double phi) {
    const Vec3 u{std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta),
                 std::sin(phi)};
    std::vector<std::complex<double>> out;
    out.reserve(static_cast<std::size_t>(cfg.total_antennas()));
    const double cy = (cfg.m_y - 1) / 2.0;
    const double cz = (cfg.m_z - 1) / 2.0;
    for (int iy = 0; iy < cfg.m_y; ++iy) {
        for (int iz = 0; iz < cfg.m_z; ++iz) {
            const Vec3 a{0.0, (iy - cy) * cfg.d_y, (iz - cz) * cfg.d_z};
            const double phase = cfg.wavenumber * a.dot(u);
            out.emplace_back(std::cos(phase), std::sin(phase));
        }
    }
    return out;
}

// |angle| of z on (-pi, pi].
inline double principal_angle(double radians) {
    return std::remainder(radians, 2.0 * 3.14159265358979323846);
}

}  // namespace nfbeam::testing
