// SPDX-License-Identifier: Apache-2.0
//
// Deterministic constant-velocity + geometric-mapping baseline: velocity from
// the last two GPS fixes, beams from the nearest codebook grid point per
// dimension. Per-dimension scores are the negated grid distances, which makes
// the nearest grid point the top-1 candidate and gives the top-K ranking a
// geometric meaning.

#pragma once

#include <vector>

#include "nfbeam/array_codebook.hpp"
#include "nfbeam/geometry.hpp"

namespace nfbeam {

struct BaselinePrediction {
    std::vector<Vec3> trajectory;                  // t_pred positions
    std::vector<BeamIndex3D> beams;                // nearest grid triple per slot
    std::vector<std::vector<double>> logits_theta;  // t_pred x N
    std::vector<std::vector<double>> logits_phi;    // t_pred x N
    std::vector<std::vector<double>> logits_r;      // t_pred x S
};

inline BaselinePrediction baseline_cv_geometric(const std::vector<Vec3>& gps_history,
                                                int t_pred, double dt, const Codebook3D& cb,
                                                const Vec3& bs_position) {
    if (gps_history.size() < 2) {
        throw std::invalid_argument("baseline: need at least 2 GPS fixes");
    }
    const Vec3 last = gps_history.back();
    const Vec3 prev = gps_history[gps_history.size() - 2];
    const Vec3 velocity = (last - prev) / dt;

    BaselinePrediction out;
    out.trajectory.reserve(static_cast<std::size_t>(t_pred));
    for (int t = 1; t <= t_pred; ++t) {
        out.trajectory.push_back(last + velocity * (dt * t));
    }

    auto scores = [](const std::vector<double>& grid, double value) {
        std::vector<double> s(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) s[i] = -std::abs(grid[i] - value);
        return s;
    };
    auto argmax = [](const std::vector<double>& s) {
        int best = 0;
        for (int i = 1; i < static_cast<int>(s.size()); ++i) {
            if (s[static_cast<std::size_t>(i)] > s[static_cast<std::size_t>(best)]) best = i;
        }
        return best;
    };

    for (const Vec3& p : out.trajectory) {
        Vec3 rel = p - bs_position;
        if (rel.norm() <= 0.0) rel = {1e-9, 0.0, 0.0};
        const FocalPoint fp = cart_to_focal(rel);
        out.logits_theta.push_back(scores(cb.theta_grid, fp.theta));
        out.logits_phi.push_back(scores(cb.phi_grid, fp.phi));
        out.logits_r.push_back(scores(cb.r_grid, fp.r));
        out.beams.push_back(make_beam_index(argmax(out.logits_theta.back()),
                                            argmax(out.logits_phi.back()),
                                            argmax(out.logits_r.back()), cb.n_angle, cb.n_dist));
    }
    return out;
}

}  // namespace nfbeam
