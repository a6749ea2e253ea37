// SPDX-License-Identifier: Apache-2.0
//
// Adam with bias correction. State lives alongside the registry order, so
// two runs over the same model are bitwise identical.

#pragma once

#include <cmath>
#include <vector>

#include "nfbeam/nn/modules.hpp"

namespace nfbeam::nn {

template <class T>
class AdamOptimizer {
  public:
    AdamOptimizer(ParamRegistry<T>& registry, double lr, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8)
        : registry_(registry), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto& p : registry_.all()) {
            m_.emplace_back(p.value.numel(), T(0));
            v_.emplace_back(p.value.numel(), T(0));
        }
    }

    void zero_grad() { registry_.zero_grad(); }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        auto& params = registry_.all();
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            auto& value = params[pi].value.values();
            auto& grad = params[pi].value.grad();
            if (grad.size() != value.size()) continue;  // never touched by backward
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (std::size_t i = 0; i < value.size(); ++i) {
                const double g = static_cast<double>(grad[i]);
                const double mi = beta1_ * static_cast<double>(m[i]) + (1.0 - beta1_) * g;
                const double vi = beta2_ * static_cast<double>(v[i]) + (1.0 - beta2_) * g * g;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                const double mhat = mi / bc1;
                const double vhat = vi / bc2;
                value[i] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    int steps_taken() const { return t_; }

  private:
    ParamRegistry<T>& registry_;
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<std::vector<T>> m_;
    std::vector<std::vector<T>> v_;
};

}  // namespace nfbeam::nn
