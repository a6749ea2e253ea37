// SPDX-License-Identifier: Apache-2.0

#include "nfbeam/array_codebook.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "nfbeam/parallel.hpp"

namespace nfbeam {

ArrayConfig make_array_config(int m_y, int m_z, double d_y, double d_z, double f_c) {
    if (m_y < 1 || m_z < 1) throw std::invalid_argument("array: antenna counts must be >= 1");
    if (d_y <= 0.0 || d_z <= 0.0) throw std::invalid_argument("array: spacings must be > 0");
    if (f_c <= 0.0) throw std::invalid_argument("array: carrier frequency must be > 0");
    ArrayConfig cfg;
    cfg.m_y = m_y;
    cfg.m_z = m_z;
    cfg.d_y = d_y;
    cfg.d_z = d_z;
    cfg.f_c = f_c;
    cfg.wavelength = kSpeedOfLight / f_c;
    cfg.wavenumber = 2.0 * 3.14159265358979323846 / cfg.wavelength;
    return cfg;
}

ArrayConfig default_array_config() {
    const double lambda = kSpeedOfLight / 7e9;
    return make_array_config(64, 64, 0.5 * lambda, 0.5 * lambda, 7e9);
}

std::vector<Vec3> antenna_positions(const ArrayConfig& cfg) {
    std::vector<Vec3> pos;
    pos.reserve(static_cast<std::size_t>(cfg.total_antennas()));
    const double cy = (cfg.m_y - 1) / 2.0;
    const double cz = (cfg.m_z - 1) / 2.0;
    for (int iy = 0; iy < cfg.m_y; ++iy) {
        for (int iz = 0; iz < cfg.m_z; ++iz) {
            pos.push_back({0.0, (iy - cy) * cfg.d_y, (iz - cz) * cfg.d_z});
        }
    }
    return pos;
}

void steering_vector_into(const std::vector<Vec3>& antennas, double wavenumber,
                          const Vec3& fp_cart, std::span<std::complex<double>> out) {
    for (std::size_t m = 0; m < antennas.size(); ++m) {
        const double rm = distance(fp_cart, antennas[m]);
        const double phase = -wavenumber * rm;
        out[m] = {std::cos(phase), std::sin(phase)};
    }
}

std::vector<std::complex<double>> steering_vector(const ArrayConfig& cfg, const FocalPoint& fp) {
    if (fp.r <= 0.0) throw std::domain_error("steering_vector: focal distance must be > 0");
    const auto antennas = antenna_positions(cfg);
    std::vector<std::complex<double>> out(antennas.size());
    steering_vector_into(antennas, cfg.wavenumber, focal_to_cart(fp), out);
    return out;
}

double rayleigh_distance(const ArrayConfig& cfg) {
    const double ly = (cfg.m_y - 1) * cfg.d_y;
    const double lz = (cfg.m_z - 1) * cfg.d_z;
    const double diag = std::hypot(ly, lz);
    return 2.0 * diag * diag / cfg.wavelength;
}

CoverageRanges default_coverage() {
    return {deg_to_rad(-60.0), deg_to_rad(60.0), deg_to_rad(-30.0), deg_to_rad(60.0), 10.0, 170.0};
}

static void check_index(int v, int n, const char* name) {
    if (v < 0 || v >= n) {
        std::ostringstream os;
        os << "beam index " << name << "=" << v << " out of range [0, " << n << ")";
        throw std::out_of_range(os.str());
    }
}

int flat_index(int i_theta, int i_phi, int i_r, int n_angle, int n_dist) {
    check_index(i_theta, n_angle, "i_theta");
    check_index(i_phi, n_angle, "i_phi");
    check_index(i_r, n_dist, "i_r");
    return (i_theta * n_angle + i_phi) * n_dist + i_r;
}

BeamIndex3D make_beam_index(int i_theta, int i_phi, int i_r, int n_angle, int n_dist) {
    return {i_theta, i_phi, i_r, flat_index(i_theta, i_phi, i_r, n_angle, n_dist)};
}

BeamIndex3D unflatten(int flat, int n_angle, int n_dist) {
    check_index(flat, n_angle * n_angle * n_dist, "flat");
    const int i_r = flat % n_dist;
    const int rest = flat / n_dist;
    return {rest / n_angle, rest % n_angle, i_r, flat};
}

std::vector<double> uniform_grid(double lo, double hi, int n) {
    if (n == 1) return {(lo + hi) / 2.0};
    std::vector<double> g(static_cast<std::size_t>(n));
    const double step = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + i * step;
    g.back() = hi;
    return g;
}

void Codebook3D::synthesize(int flat, std::span<std::complex<double>> out) const {
    const BeamIndex3D b = unflatten(flat, n_angle, n_dist);
    steering_vector_into(antennas, wavenumber, focal_to_cart(focal_point(b)), out);
}

Codebook3D build_codebook(const ArrayConfig& cfg, int n_angle, int n_dist,
                          const CoverageRanges& ranges, unsigned threads, bool materialize) {
    if (n_angle < 1 || n_dist < 1) throw std::invalid_argument("codebook: N and S must be >= 1");
    if (ranges.r_min <= 0.0) throw std::domain_error("codebook: r_min must be > 0");
    if (!(ranges.theta_min < ranges.theta_max) || !(ranges.phi_min < ranges.phi_max) ||
        !(ranges.r_min < ranges.r_max)) {
        throw std::invalid_argument("codebook: each range needs min < max");
    }

    Codebook3D cb;
    cb.ranges = ranges;
    cb.n_angle = n_angle;
    cb.n_dist = n_dist;
    cb.theta_grid = uniform_grid(ranges.theta_min, ranges.theta_max, n_angle);
    cb.phi_grid = uniform_grid(ranges.phi_min, ranges.phi_max, n_angle);
    cb.r_grid = uniform_grid(ranges.r_min, ranges.r_max, n_dist);
    cb.wavenumber = cfg.wavenumber;
    cb.antennas = antenna_positions(cfg);

    if (materialize) {
        const std::size_t m = cb.antennas.size();
        const std::size_t count = static_cast<std::size_t>(cb.size());
        cb.vectors.resize(count * m);
        parallel_for(count, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t f = begin; f < end; ++f) {
                cb.synthesize(static_cast<int>(f), {cb.vectors.data() + f * m, m});
            }
        });
    }
    return cb;
}

}  // namespace nfbeam
