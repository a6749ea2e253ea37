// SPDX-License-Identifier: Apache-2.0
//
// Parameter registry and the small set of neural modules the predictor is
// assembled from. Initialization: weight matrices uniform(-1/sqrt(fan_in),
// +1/sqrt(fan_in)), biases zero, embeddings and query tokens N(0, 0.02^2).

#pragma once

#include <string>
#include <vector>

#include "nfbeam/nn/tensor.hpp"
#include "nfbeam/rng.hpp"

namespace nfbeam::nn {

template <class T>
struct Parameter {
    std::string name;
    Tensor<T> value;
};

template <class T>
class ParamRegistry {
  public:
    Tensor<T> add(const std::string& name, Tensor<T> tensor) {
        for (const auto& p : params_) {
            if (p.name == name) {
                throw std::invalid_argument("parameter name not unique: " + name);
            }
        }
        params_.push_back({name, tensor});
        return tensor;
    }

    std::vector<Parameter<T>>& all() { return params_; }
    const std::vector<Parameter<T>>& all() const { return params_; }

    Tensor<T> find(const std::string& name) const {
        for (const auto& p : params_) {
            if (p.name == name) return p.value;
        }
        throw std::out_of_range("no parameter named " + name);
    }

    void zero_grad() {
        for (auto& p : params_) p.value.zero_grad();
    }

    std::size_t count_scalars() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.numel();
        return n;
    }

  private:
    std::vector<Parameter<T>> params_;
};

template <class T>
Tensor<T> init_weight(int fan_in, int fan_out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<T> data(static_cast<std::size_t>(fan_in) * fan_out);
    for (auto& v : data) v = static_cast<T>(rng.uniform(-bound, bound));
    return Tensor<T>::from_data(fan_in, fan_out, std::move(data), true);
}

template <class T>
Tensor<T> init_embedding(int rows, int cols, Rng& rng) {
    std::vector<T> data(static_cast<std::size_t>(rows) * cols);
    for (auto& v : data) v = static_cast<T>(rng.normal(0.0, 0.02));
    return Tensor<T>::from_data(rows, cols, std::move(data), true);
}

// y = x * W (+ b); x is rows x in, W is in x out.
template <class T>
struct Linear {
    Tensor<T> w;
    Tensor<T> b;
    bool has_bias = true;

    Linear() = default;
    Linear(ParamRegistry<T>& reg, const std::string& name, int in, int out, Rng& rng,
           bool bias = true)
        : has_bias(bias) {
        w = reg.add(name + ".w", init_weight<T>(in, out, rng));
        if (bias) b = reg.add(name + ".b", Tensor<T>::zeros(1, out, true));
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        auto y = matmul(x, w);
        return has_bias ? add_rowvec(y, b) : y;
    }
};

// Two-layer perceptron with gelu hidden activation.
template <class T>
struct Mlp2 {
    Linear<T> l1;
    Linear<T> l2;

    Mlp2() = default;
    Mlp2(ParamRegistry<T>& reg, const std::string& name, int in, int hidden, int out, Rng& rng)
        : l1(reg, name + ".l1", in, hidden, rng), l2(reg, name + ".l2", hidden, out, rng) {}

    Tensor<T> forward(const Tensor<T>& x) const { return l2.forward(gelu(l1.forward(x))); }
};

template <class T>
struct LayerNorm {
    Tensor<T> gain;
    Tensor<T> bias;
    double eps = 1e-5;

    LayerNorm() = default;
    LayerNorm(ParamRegistry<T>& reg, const std::string& name, int dim) {
        gain = reg.add(name + ".gain", Tensor<T>::filled(1, dim, T(1), true));
        bias = reg.add(name + ".bias", Tensor<T>::zeros(1, dim, true));
    }

    Tensor<T> forward(const Tensor<T>& x) const { return layer_norm_rows(x, gain, bias, eps); }
};

inline std::vector<std::uint8_t> causal_mask(int tokens) {
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(tokens) * tokens, 0);
    for (int i = 0; i < tokens; ++i) {
        for (int j = 0; j <= i; ++j) keep[static_cast<std::size_t>(i) * tokens + j] = 1;
    }
    return keep;
}

// Scaled dot-product attention with per-head slicing and output projection.
// mask, when given, is a keep/deny matrix of shape q_tokens x kv_tokens.
template <class T>
Tensor<T> multi_head_attention(const Tensor<T>& q_in, const Tensor<T>& k_in,
                               const Tensor<T>& v_in, const Linear<T>& wq, const Linear<T>& wk,
                               const Linear<T>& wv, const Linear<T>& wo, int heads,
                               const std::vector<std::uint8_t>* mask = nullptr) {
    const int d = wq.w.cols();
    if (d % heads != 0) {
        throw std::invalid_argument("attention: d_model " + std::to_string(d) +
                                    " not divisible by heads " + std::to_string(heads));
    }
    const int dk = d / heads;
    auto q = wq.forward(q_in);
    auto k = wk.forward(k_in);
    auto v = wv.forward(v_in);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    std::vector<Tensor<T>> head_outputs;
    head_outputs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        auto qh = slice_cols(q, h * dk, (h + 1) * dk);
        auto kh = slice_cols(k, h * dk, (h + 1) * dk);
        auto vh = slice_cols(v, h * dk, (h + 1) * dk);
        auto scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dk);
        auto weights = mask ? masked_softmax_rows(scores, *mask) : softmax_rows(scores);
        head_outputs.push_back(matmul(weights, vh));
    }
    return wo.forward(concat_cols(head_outputs));
}

// Parameter bundle for one attention op.
template <class T>
struct Attention {
    Linear<T> wq, wk, wv, wo;
    int heads = 1;

    Attention() = default;
    // The key projection carries no bias: a shared key offset shifts every
    // score of a query by the same amount and cancels in the softmax.
    Attention(ParamRegistry<T>& reg, const std::string& name, int d_kv_in, int d_model,
              int n_heads, Rng& rng)
        : wq(reg, name + ".wq", d_model, d_model, rng),
          wk(reg, name + ".wk", d_kv_in, d_model, rng, /*bias=*/false),
          wv(reg, name + ".wv", d_kv_in, d_model, rng),
          wo(reg, name + ".wo", d_model, d_model, rng),
          heads(n_heads) {}

    Tensor<T> forward(const Tensor<T>& q, const Tensor<T>& kv,
                      const std::vector<std::uint8_t>* mask = nullptr) const {
        return multi_head_attention(q, kv, kv, wq, wk, wv, wo, heads, mask);
    }
};

}  // namespace nfbeam::nn
