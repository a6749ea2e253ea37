// SPDX-License-Identifier: Apache-2.0
//
// Uniform planar array geometry, near-field steering vectors and the 3D
// angle-distance beam codebook.
//
// Array layout (frozen): antennas lie in the y-z plane with the centroid at
// the origin and broadside along +x. Element m = iy * m_z + iz (row-major
// over the y index, then z) sits at
//   y = (iy - (m_y - 1) / 2) * d_y,   z = (iz - (m_z - 1) / 2) * d_z.
//
// Codeword layout (frozen): flat = (i_theta * N + i_phi) * S + i_r.

#pragma once

#include <complex>
#include <span>
#include <vector>

#include "nfbeam/geometry.hpp"

namespace nfbeam {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

struct ArrayConfig {
    int m_y = 1;          // antenna count along y
    int m_z = 1;          // antenna count along z
    double d_y = 0.0;     // element spacing along y, meters
    double d_z = 0.0;     // element spacing along z, meters
    double f_c = 0.0;     // carrier frequency, Hz
    double wavelength = 0.0;
    double wavenumber = 0.0;  // 2*pi / wavelength

    int total_antennas() const { return m_y * m_z; }
};

// Validates and fills the derived fields. Throws std::invalid_argument.
ArrayConfig make_array_config(int m_y, int m_z, double d_y, double d_z, double f_c);

// Paper-scale default: 64x64 UPA at 7 GHz with half-wavelength spacing.
ArrayConfig default_array_config();

// World positions are bs + local position; all steering math is local.
std::vector<Vec3> antenna_positions(const ArrayConfig& cfg);

// Entry m = exp(-j * k * |focal_cart - antenna_m|). Throws std::domain_error
// when fp.r <= 0.
std::vector<std::complex<double>> steering_vector(const ArrayConfig& cfg, const FocalPoint& fp);

// Variant writing into preallocated storage; fp_cart is the Cartesian focal
// point in the array frame.
void steering_vector_into(const std::vector<Vec3>& antennas, double wavenumber,
                          const Vec3& fp_cart, std::span<std::complex<double>> out);

// 2 * D^2 / lambda with D the aperture diagonal.
double rayleigh_distance(const ArrayConfig& cfg);

struct CoverageRanges {
    double theta_min = 0.0, theta_max = 0.0;  // radians
    double phi_min = 0.0, phi_max = 0.0;      // radians
    double r_min = 0.0, r_max = 0.0;          // meters
};

// theta in [-60, 60] deg, phi in [-30, 60] deg, r in [10, 170] m.
CoverageRanges default_coverage();

struct BeamIndex3D {
    int i_theta = 0;
    int i_phi = 0;
    int i_r = 0;
    int flat = 0;

    bool operator==(const BeamIndex3D& o) const {
        return i_theta == o.i_theta && i_phi == o.i_phi && i_r == o.i_r && flat == o.flat;
    }
};

// Throws std::out_of_range on out-of-bounds indices.
int flat_index(int i_theta, int i_phi, int i_r, int n_angle, int n_dist);
BeamIndex3D make_beam_index(int i_theta, int i_phi, int i_r, int n_angle, int n_dist);
BeamIndex3D unflatten(int flat, int n_angle, int n_dist);

struct Codebook3D {
    CoverageRanges ranges;
    std::vector<double> theta_grid;  // N entries
    std::vector<double> phi_grid;    // N entries
    std::vector<double> r_grid;      // S entries
    int n_angle = 0;                 // N
    int n_dist = 0;                  // S
    double wavenumber = 0.0;
    std::vector<Vec3> antennas;                   // M local positions
    std::vector<std::complex<double>> vectors;    // size() * M, row-major; empty when not materialized

    int size() const { return n_angle * n_angle * n_dist; }
    int num_antennas() const { return static_cast<int>(antennas.size()); }
    bool materialized() const { return !vectors.empty(); }

    FocalPoint focal_point(const BeamIndex3D& b) const {
        return {theta_grid[b.i_theta], phi_grid[b.i_phi], r_grid[b.i_r]};
    }

    std::span<const std::complex<double>> codeword(int flat) const {
        const std::size_t m = antennas.size();
        return {vectors.data() + static_cast<std::size_t>(flat) * m, m};
    }

    // Synthesizes codeword `flat` from the grids regardless of materialization.
    void synthesize(int flat, std::span<std::complex<double>> out) const;
};

// Endpoint-inclusive uniform grid; a single sample falls at the midpoint.
std::vector<double> uniform_grid(double lo, double hi, int n);

// Builds the full codebook. materialize=false keeps only grids and antenna
// geometry for streaming sweeps. Throws std::domain_error when r_min <= 0
// and std::invalid_argument on bad counts/ranges.
Codebook3D build_codebook(const ArrayConfig& cfg, int n_angle, int n_dist,
                          const CoverageRanges& ranges, unsigned threads = 1,
                          bool materialize = true);

}  // namespace nfbeam
