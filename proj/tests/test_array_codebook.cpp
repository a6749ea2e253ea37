// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "nfbeam/array_codebook.hpp"
#include "test_helpers.hpp"

using namespace nfbeam;

namespace {

ArrayConfig half_wave_array(int m_y, int m_z, double f_c = 7e9) {
    const double lambda = kSpeedOfLight / f_c;
    return make_array_config(m_y, m_z, 0.5 * lambda, 0.5 * lambda, f_c);
}

}  // namespace

TEST_CASE("array config validation and derived quantities") {
    const auto cfg = half_wave_array(64, 64);
    CHECK(cfg.total_antennas() == 4096);
    CHECK(cfg.wavelength == doctest::Approx(kSpeedOfLight / 7e9).epsilon(1e-15));
    CHECK(cfg.wavenumber == doctest::Approx(2.0 * 3.14159265358979323846 / cfg.wavelength));

    CHECK_THROWS_AS(make_array_config(0, 1, 0.1, 0.1, 1e9), std::invalid_argument);
    CHECK_THROWS_AS(make_array_config(1, 1, -0.1, 0.1, 1e9), std::invalid_argument);
    CHECK_THROWS_AS(make_array_config(1, 1, 0.1, 0.1, 0.0), std::invalid_argument);
}

TEST_CASE("antenna positions: layout, centroid and spacing") {
    SUBCASE("single element sits at the origin") {
        const auto pos = antenna_positions(half_wave_array(1, 1));
        REQUIRE(pos.size() == 1);
        CHECK(pos[0].x == 0.0);
        CHECK(pos[0].y == 0.0);
        CHECK(pos[0].z == 0.0);
    }

    SUBCASE("two elements along y straddle the centroid") {
        const auto cfg = half_wave_array(2, 1);
        const auto pos = antenna_positions(cfg);
        REQUIRE(pos.size() == 2);
        CHECK(pos[0].y == doctest::Approx(-0.25 * cfg.wavelength).epsilon(1e-15));
        CHECK(pos[1].y == doctest::Approx(+0.25 * cfg.wavelength).epsilon(1e-15));
        CHECK(pos[0].x == 0.0);
        CHECK(pos[0].z == 0.0);
    }

    SUBCASE("64x64 aperture side length") {
        const auto cfg = half_wave_array(64, 64);
        const auto pos = antenna_positions(cfg);
        // 63 half-wavelength spacings at 7 GHz.
        const double expected = 63 * 0.5 * (299792458.0 / 7e9);
        CHECK(pos.back().y - pos.front().y == doctest::Approx(expected).epsilon(1e-12));
        CHECK(expected == doctest::Approx(1.349).epsilon(1e-3));
    }

    SUBCASE("row-major index, centroid at origin, exact spacing") {
        const auto cfg = half_wave_array(3, 4);
        const auto pos = antenna_positions(cfg);
        REQUIRE(pos.size() == 12);
        // m = iy * m_z + iz
        CHECK(pos[1 * 4 + 2].y == doctest::Approx((1 - 1.0) * cfg.d_y));
        CHECK(pos[1 * 4 + 2].z == doctest::Approx((2 - 1.5) * cfg.d_z));
        Vec3 centroid{};
        for (const auto& p : pos) centroid += p;
        CHECK(std::abs(centroid.y) < 1e-12);
        CHECK(std::abs(centroid.z) < 1e-12);
        for (int iy = 0; iy + 1 < 3; ++iy) {
            CHECK(pos[(iy + 1) * 4].y - pos[iy * 4].y == doctest::Approx(cfg.d_y).epsilon(1e-15));
        }
        for (int iz = 0; iz + 1 < 4; ++iz) {
            CHECK(pos[iz + 1].z - pos[iz].z == doctest::Approx(cfg.d_z).epsilon(1e-15));
        }
    }
}

TEST_CASE("steering vector values") {
    SUBCASE("single antenna: exp(-j k r), unit modulus") {
        const auto cfg = half_wave_array(1, 1);
        const FocalPoint fp{0.3, -0.1, 42.0};
        const auto v = steering_vector(cfg, fp);
        REQUIRE(v.size() == 1);
        const double expected_phase = -cfg.wavenumber * 42.0;
        CHECK(std::abs(v[0] - std::polar(1.0, expected_phase)) < 1e-12);
        CHECK(std::abs(std::abs(v[0]) - 1.0) < 1e-12);
    }

    SUBCASE("broadside focal point gives equal entries by symmetry") {
        const auto cfg = half_wave_array(2, 1);
        const auto v = steering_vector(cfg, FocalPoint{0.0, 0.0, 25.0});
        REQUIRE(v.size() == 2);
        CHECK(v[0] == v[1]);
    }

    SUBCASE("non-positive focal distance is a domain error") {
        CHECK_THROWS_AS(steering_vector(half_wave_array(2, 2), FocalPoint{0, 0, 0.0}),
                        std::domain_error);
        CHECK_THROWS_AS(steering_vector(half_wave_array(2, 2), FocalPoint{0, 0, -5.0}),
                        std::domain_error);
    }

    SUBCASE("far-field limit matches the plane-wave vector below 1e-3 rad") {
        const auto cfg = half_wave_array(64, 64);
        const double theta = 0.0, phi = 0.0, r = 1e6;
        const auto nf = steering_vector(cfg, FocalPoint{theta, phi, r});
        const auto pw = testing::plane_wave_vector(cfg, theta, phi);
        double worst = 0.0;
        for (std::size_t m = 0; m < nf.size(); ++m) {
            // Remove the common bulk phase exp(-j k r) before comparing.
            const double deviation = testing::principal_angle(
                std::arg(nf[m]) + cfg.wavenumber * r - std::arg(pw[m]));
            worst = std::max(worst, std::abs(deviation));
        }
        CHECK(worst < 1e-3);
    }

    SUBCASE("azimuth mirror symmetry is exact") {
        const auto cfg = half_wave_array(6, 3);
        const FocalPoint fp{0.4, 0.2, 30.0};
        const FocalPoint mirrored{-0.4, 0.2, 30.0};
        const auto v = steering_vector(cfg, fp);
        const auto vm = steering_vector(cfg, mirrored);
        // Mirroring antennas across the z-axis: iy -> m_y-1-iy.
        for (int iy = 0; iy < 6; ++iy) {
            for (int iz = 0; iz < 3; ++iz) {
                const std::size_t m = static_cast<std::size_t>(iy * 3 + iz);
                const std::size_t mm = static_cast<std::size_t>((5 - iy) * 3 + iz);
                CHECK(v[m] == vm[mm]);
            }
        }
    }
}

TEST_CASE("codebook construction") {
    const auto cfg = half_wave_array(8, 8);

    SUBCASE("paper-size codebook has 4000 codewords") {
        const auto cb = build_codebook(cfg, 20, 10, default_coverage(), 1, false);
        CHECK(cb.size() == 4000);
    }

    SUBCASE("single-sample grids land on range midpoints") {
        const auto cb = build_codebook(cfg, 1, 1, default_coverage());
        REQUIRE(cb.theta_grid.size() == 1);
        CHECK(cb.theta_grid[0] == doctest::Approx(0.0));
        CHECK(cb.phi_grid[0] == doctest::Approx(deg_to_rad(15.0)));
        CHECK(cb.r_grid[0] == doctest::Approx(90.0));
        CHECK(static_cast<int>(cb.vectors.size()) == cfg.total_antennas());
    }

    SUBCASE("endpoint-inclusive uniform sampling") {
        const auto cb = build_codebook(cfg, 3, 2, default_coverage(), 1, false);
        CHECK(cb.theta_grid[0] == doctest::Approx(deg_to_rad(-60.0)));
        CHECK(cb.theta_grid[1] == doctest::Approx(0.0));
        CHECK(cb.theta_grid[2] == doctest::Approx(deg_to_rad(60.0)));
        CHECK(cb.r_grid[0] == doctest::Approx(10.0));
        CHECK(cb.r_grid[1] == doctest::Approx(170.0));
    }

    SUBCASE("unit modulus and codeword norm") {
        const auto cb = build_codebook(cfg, 3, 2, default_coverage());
        const int m = cb.num_antennas();
        for (int f = 0; f < cb.size(); ++f) {
            double norm_sq = 0.0;
            for (const auto& v : cb.codeword(f)) {
                CHECK(std::abs(std::abs(v) - 1.0) < 1e-12);
                norm_sq += std::norm(v);
            }
            CHECK(std::abs(norm_sq - m) < 1e-9 * m);
        }
    }

    SUBCASE("materialized vectors match on-demand synthesis") {
        const auto cb = build_codebook(cfg, 3, 2, default_coverage(), 2);
        std::vector<std::complex<double>> scratch(static_cast<std::size_t>(cb.num_antennas()));
        for (int f = 0; f < cb.size(); f += 5) {
            cb.synthesize(f, scratch);
            const auto w = cb.codeword(f);
            for (std::size_t i = 0; i < scratch.size(); ++i) CHECK(w[i] == scratch[i]);
        }
    }

    SUBCASE("parallel build is identical to serial build") {
        const auto serial = build_codebook(cfg, 4, 3, default_coverage(), 1);
        const auto parallel = build_codebook(cfg, 4, 3, default_coverage(), 4);
        REQUIRE(serial.vectors.size() == parallel.vectors.size());
        for (std::size_t i = 0; i < serial.vectors.size(); ++i) {
            CHECK(serial.vectors[i] == parallel.vectors[i]);
        }
    }

    SUBCASE("invalid arguments") {
        auto bad_r = default_coverage();
        bad_r.r_min = 0.0;
        CHECK_THROWS_AS(build_codebook(cfg, 2, 2, bad_r), std::domain_error);
        auto flipped = default_coverage();
        flipped.theta_min = flipped.theta_max;
        CHECK_THROWS_AS(build_codebook(cfg, 2, 2, flipped), std::invalid_argument);
        CHECK_THROWS_AS(build_codebook(cfg, 0, 2, default_coverage()), std::invalid_argument);
    }
}

TEST_CASE("flat index layout") {
    CHECK(flat_index(0, 0, 0, 20, 10) == 0);
    CHECK(flat_index(19, 19, 9, 20, 10) == 3999);
    CHECK(flat_index(1, 0, 0, 20, 10) == 200);

    SUBCASE("round trip is a bijection (exhaustive)") {
        const int n = 7, s = 4;
        std::vector<bool> seen(static_cast<std::size_t>(n * n * s), false);
        for (int it = 0; it < n; ++it) {
            for (int ip = 0; ip < n; ++ip) {
                for (int ir = 0; ir < s; ++ir) {
                    const auto b = make_beam_index(it, ip, ir, n, s);
                    CHECK(unflatten(b.flat, n, s) == b);
                    CHECK(!seen[static_cast<std::size_t>(b.flat)]);
                    seen[static_cast<std::size_t>(b.flat)] = true;
                }
            }
        }
        for (const bool hit : seen) CHECK(hit);
    }

    SUBCASE("out-of-range indices throw") {
        CHECK_THROWS_AS(flat_index(20, 0, 0, 20, 10), std::out_of_range);
        CHECK_THROWS_AS(flat_index(0, -1, 0, 20, 10), std::out_of_range);
        CHECK_THROWS_AS(flat_index(0, 0, 10, 20, 10), std::out_of_range);
        CHECK_THROWS_AS(unflatten(4000, 20, 10), std::out_of_range);
        CHECK_THROWS_AS(unflatten(-1, 20, 10), std::out_of_range);
    }
}

TEST_CASE("rayleigh distance") {
    SUBCASE("paper array is about 170 m") {
        CHECK(rayleigh_distance(half_wave_array(64, 64)) == doctest::Approx(170.0).epsilon(0.006));
    }
    SUBCASE("degenerate single element has zero aperture") {
        CHECK(rayleigh_distance(half_wave_array(1, 1)) == 0.0);
    }
    SUBCASE("2x1 half-wave array: 2 (lambda/2)^2 / lambda") {
        const auto cfg = half_wave_array(2, 1);
        CHECK(rayleigh_distance(cfg) == doctest::Approx(0.5 * cfg.wavelength).epsilon(1e-12));
    }
}
