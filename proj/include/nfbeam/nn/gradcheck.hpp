// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference verification of analytic gradients. The build
// callback must reconstruct the scalar graph from the leaf values on every
// call; leaf data is perturbed in place.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "nfbeam/nn/tensor.hpp"
#include "nfbeam/rng.hpp"

namespace nfbeam::nn {

template <class T>
struct GradCheckOptions {
    double eps = std::is_same_v<T, double> ? 1e-5 : 5e-3;
    // Cap on checked coordinates per leaf; <= 0 checks everything.
    int max_coords_per_leaf = -1;
    std::uint64_t seed = 0;
};

// Returns the max relative error over all checked coordinates, with
// denominator max(|analytic|, |numeric|, 1e-8).
template <class T>
double grad_check(const std::function<Tensor<T>()>& build, std::vector<Tensor<T>> leaves,
                  GradCheckOptions<T> opt = {}) {
    auto out = build();
    if (out.numel() != 1) throw std::invalid_argument("grad_check: output must be scalar");
    out.backward();

    std::vector<std::vector<T>> analytic;
    analytic.reserve(leaves.size());
    for (auto& leaf : leaves) {
        if (leaf.grad().size() != leaf.numel()) {
            analytic.emplace_back(leaf.numel(), T(0));  // leaf unused by the graph
        } else {
            analytic.push_back(leaf.grad());
        }
        leaf.zero_grad();
    }

    Rng rng(mix64(opt.seed));
    double max_rel = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& data = leaves[li].values();
        std::vector<std::size_t> coords(data.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        if (opt.max_coords_per_leaf > 0 &&
            coords.size() > static_cast<std::size_t>(opt.max_coords_per_leaf)) {
            rng.shuffle(coords);
            coords.resize(static_cast<std::size_t>(opt.max_coords_per_leaf));
        }
        for (std::size_t ci : coords) {
            const T saved = data[ci];
            data[ci] = saved + static_cast<T>(opt.eps);
            const double f_plus = static_cast<double>(build().item());
            data[ci] = saved - static_cast<T>(opt.eps);
            const double f_minus = static_cast<double>(build().item());
            data[ci] = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * opt.eps);
            const double a = static_cast<double>(analytic[li][ci]);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace nfbeam::nn
