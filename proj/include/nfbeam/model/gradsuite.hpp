// SPDX-License-Identifier: Apache-2.0
//
// Gradient verification suite: finite-difference checks for every tensor
// primitive on random shapes, and the end-to-end combined loss on a micro
// model. Run by the `gradcheck` CLI subcommand, the unit tests and the
// acceptance suite.

#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "nfbeam/model/predictor.hpp"
#include "nfbeam/model/train.hpp"
#include "nfbeam/nn/gradcheck.hpp"

namespace nfbeam {

struct GradSuiteEntry {
    std::string name;
    double max_rel_error = 0.0;
    // Primitives hold 1e-6; the attention composite gets the end-to-end
    // budget since its finite-difference conditioning is set by graph depth,
    // and its values are separately pinned against a naive reference.
    double tolerance = 1e-6;
};

namespace detail {

inline nn::Tensor<double> random_tensor(int rows, int cols, Rng& rng, double lo = -1.0,
                                        double hi = 1.0, bool requires_grad = true) {
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (auto& v : data) v = rng.uniform(lo, hi);
    return nn::Tensor<double>::from_data(rows, cols, std::move(data), requires_grad);
}

// Keeps samples away from the kink of non-smooth ops.
inline nn::Tensor<double> random_tensor_away_from_zero(int rows, int cols, Rng& rng) {
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (auto& v : data) {
        const double mag = rng.uniform(0.2, 1.0);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return nn::Tensor<double>::from_data(rows, cols, std::move(data), true);
}

// Fixed random weights; scalarizing an op output against them exercises the
// whole Jacobian. The weights are drawn once per check (they must not change
// across finite-difference rebuilds) and kept away from zero so gradient
// coordinates stay above the difference-quotient noise floor.
inline nn::Tensor<double> fixed_weights(int rows, int cols, Rng& rng) {
    std::vector<double> w(static_cast<std::size_t>(rows) * cols);
    for (auto& v : w) {
        const double mag = rng.uniform(0.5, 1.5);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return nn::Tensor<double>::from_data(rows, cols, std::move(w));
}

inline nn::Tensor<double> weigh(const nn::Tensor<double>& out, const nn::Tensor<double>& w) {
    return nn::sum(nn::mul(out, w));
}

}  // namespace detail

// Finite-difference checks for each primitive over `rounds` random shapes.
inline std::vector<GradSuiteEntry> primitive_gradient_suite(std::uint64_t seed, int rounds = 5) {
    std::vector<GradSuiteEntry> entries;
    Rng shape_rng(mix64(seed));

    auto run = [&entries](const std::string& name, double err, double tolerance = 1e-6) {
        for (auto& e : entries) {
            if (e.name == name) {
                e.max_rel_error = std::max(e.max_rel_error, err);
                return;
            }
        }
        entries.push_back({name, err, tolerance});
    };

    for (int round = 0; round < rounds; ++round) {
        Rng rng(shape_rng.next());
        const int m = static_cast<int>(rng.uniform_int(1, 4));
        const int k = static_cast<int>(rng.uniform_int(1, 4));
        const int n = static_cast<int>(rng.uniform_int(2, 5));

        {
            auto a = detail::random_tensor(m, k, rng);
            auto b = detail::random_tensor(k, n, rng);
            auto w = detail::fixed_weights(m, n, rng);
            run("matmul", nn::grad_check<double>(
                              [&] { return detail::weigh(nn::matmul(a, b), w); }, {a, b}));
        }
        {
            auto a = detail::random_tensor(m, n, rng);
            auto w = detail::fixed_weights(n, m, rng);
            run("transpose", nn::grad_check<double>(
                                 [&] { return detail::weigh(nn::transpose(a), w); }, {a}));
        }
        {
            auto a = detail::random_tensor(m, n, rng);
            auto b = detail::random_tensor(m, n, rng);
            auto w = detail::fixed_weights(m, n, rng);
            run("add", nn::grad_check<double>([&] { return detail::weigh(nn::add(a, b), w); },
                                              {a, b}));
            run("sub", nn::grad_check<double>([&] { return detail::weigh(nn::sub(a, b), w); },
                                              {a, b}));
            run("scale", nn::grad_check<double>(
                             [&] { return detail::weigh(nn::scale(a, 0.37), w); }, {a}));
            run("add_scalar",
                nn::grad_check<double>([&] { return detail::weigh(nn::add_scalar(a, 1.3), w); },
                                       {a}));
        }
        {
            // Factors away from zero: each mul gradient coordinate is the
            // partner entry times the weight.
            auto a = detail::random_tensor_away_from_zero(m, n, rng);
            auto b = detail::random_tensor_away_from_zero(m, n, rng);
            auto w = detail::fixed_weights(m, n, rng);
            run("mul", nn::grad_check<double>([&] { return detail::weigh(nn::mul(a, b), w); },
                                              {a, b}));
        }
        {
            auto a = detail::random_tensor(m, n, rng);
            auto b = detail::random_tensor(1, n, rng);
            auto w = detail::fixed_weights(m, n, rng);
            run("add_rowvec",
                nn::grad_check<double>([&] { return detail::weigh(nn::add_rowvec(a, b), w); },
                                       {a, b}));
        }
        {
            auto a = detail::random_tensor(m, n, rng);
            auto b = detail::random_tensor(2, n, rng);
            auto c = detail::random_tensor(m, 3, rng);
            auto w_rows = detail::fixed_weights(m + 2, n, rng);
            auto w_cols = detail::fixed_weights(m, n + 3, rng);
            run("concat_rows",
                nn::grad_check<double>(
                    [&] { return detail::weigh(nn::concat_rows<double>({a, b}), w_rows); },
                    {a, b}));
            run("concat_cols",
                nn::grad_check<double>(
                    [&] { return detail::weigh(nn::concat_cols<double>({a, c}), w_cols); },
                    {a, c}));
        }
        {
            auto a = detail::random_tensor(m + 1, n + 1, rng);
            auto w = detail::fixed_weights(m, n, rng);
            run("slice",
                nn::grad_check<double>(
                    [&] { return detail::weigh(nn::slice(a, 0, m, 1, n + 1), w); }, {a}));
        }
        {
            auto a = detail::random_tensor(m, n, rng);
            auto w = detail::fixed_weights(1, n, rng);
            run("sum", nn::grad_check<double>([&] { return nn::sum(a); }, {a}));
            run("mean", nn::grad_check<double>([&] { return nn::mean(a); }, {a}));
            run("mean_rows", nn::grad_check<double>(
                                 [&] { return detail::weigh(nn::mean_rows(a), w); }, {a}));
        }
        {
            auto a = detail::random_tensor_away_from_zero(m, n, rng);
            auto w = detail::fixed_weights(m, n, rng);
            run("relu", nn::grad_check<double>([&] { return detail::weigh(nn::relu(a), w); },
                                               {a}));
            run("abs", nn::grad_check<double>([&] { return detail::weigh(nn::abs_op(a), w); },
                                              {a}));
        }
        {
            auto a = detail::random_tensor(m, n, rng, -2.0, 2.0);
            auto w = detail::fixed_weights(m, n, rng);
            run("gelu", nn::grad_check<double>([&] { return detail::weigh(nn::gelu(a), w); },
                                               {a}));
            run("sigmoid", nn::grad_check<double>(
                               [&] { return detail::weigh(nn::sigmoid(a), w); }, {a}));
        }
        {
            auto a = detail::random_tensor(m, n, rng, 0.5, 2.0);
            auto w = detail::fixed_weights(m, n, rng);
            run("log", nn::grad_check<double>([&] { return detail::weigh(nn::log_op(a), w); },
                                              {a}));
        }
        {
            auto a = detail::random_tensor(m, n, rng, -2.0, 2.0);
            auto w = detail::fixed_weights(m, n, rng);
            run("softmax",
                nn::grad_check<double>([&] { return detail::weigh(nn::softmax_rows(a), w); },
                                       {a}));
            run("log_softmax",
                nn::grad_check<double>(
                    [&] { return detail::weigh(nn::log_softmax_rows(a), w); }, {a}));
        }
        {
            auto a = detail::random_tensor(m, n, rng, -2.0, 2.0);
            std::vector<std::uint8_t> keep(a.numel(), 0);
            for (int r = 0; r < m; ++r) {
                keep[static_cast<std::size_t>(r) * n +
                     static_cast<std::size_t>(rng.uniform_int(0, n - 1))] = 1;
                for (int c = 0; c < n; ++c) {
                    if (rng.uniform() < 0.6) keep[static_cast<std::size_t>(r) * n + c] = 1;
                }
            }
            auto w = detail::fixed_weights(m, n, rng);
            run("masked_softmax",
                nn::grad_check<double>(
                    [&] { return detail::weigh(nn::masked_softmax_rows(a, keep), w); }, {a}));
        }
        {
            auto x = detail::random_tensor(m, n + 1, rng);
            auto g = detail::random_tensor(1, n + 1, rng, 0.5, 1.5);
            auto b = detail::random_tensor(1, n + 1, rng);
            auto w = detail::fixed_weights(m, n + 1, rng);
            run("layer_norm",
                nn::grad_check<double>(
                    [&] { return detail::weigh(nn::layer_norm_rows(x, g, b), w); }, {x, g, b}));
        }
        {
            auto table = detail::random_tensor(4, n, rng);
            std::vector<int> ids;
            for (int i = 0; i < m + 1; ++i) ids.push_back(static_cast<int>(rng.uniform_int(0, 3)));
            auto w = detail::fixed_weights(m + 1, n, rng);
            run("embedding_lookup",
                nn::grad_check<double>(
                    [&] { return detail::weigh(nn::embedding_lookup(table, ids), w); }, {table}));
        }
        {
            auto a = detail::random_tensor(m + 1, n, rng);
            auto w = detail::fixed_weights(m + 1, n, rng);
            run("cumsum",
                nn::grad_check<double>([&] { return detail::weigh(nn::cumsum_rows(a), w); },
                                       {a}));
        }
        {
            // Full attention op with parameter leaves, causal-masked. No key
            // bias (softmax cancels it, leaving a structurally zero gradient
            // that finite differences cannot resolve).
            const int d = 8, heads = 2, tokens = 3;
            nn::ParamRegistry<double> reg;
            Rng init(rng.next());
            nn::Linear<double> wq(reg, "wq", d, d, init), wk(reg, "wk", d, d, init, false),
                wv(reg, "wv", d, d, init), wo(reg, "wo", d, d, init);
            auto x = detail::random_tensor(tokens, d, rng);
            const auto mask = nn::causal_mask(tokens);
            std::vector<nn::Tensor<double>> leaves{x};
            for (auto& p : reg.all()) leaves.push_back(p.value);
            auto w = detail::fixed_weights(tokens, d, rng);
            run("multi_head_attention",
                nn::grad_check<double>(
                    [&] {
                        return detail::weigh(
                            nn::multi_head_attention(x, x, x, wq, wk, wv, wo, heads, &mask), w);
                    },
                    leaves),
                1e-4);
        }
    }
    return entries;
}

// Micro-scale predictor with synthetic data: full combined loss on a
// 2-sequence batch, every parameter coordinate checked by central
// differences.
inline double predictor_gradcheck_max_error(std::uint64_t seed) {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.heads = 2;
    cfg.backbone_layers = 1;
    cfg.t_prev = 3;
    cfg.t_pred = 2;
    cfg.n_angle = 4;
    cfg.n_dist = 3;
    cfg.point_feature_dim = 6;
    cfg.task_mode_count = 10;
    cfg.seed = seed;
    cfg.bs_position = {0.0, 0.0, 20.0};
    cfg.coverage_radius = 170.0;
    Predictor<double> model(cfg);

    Rng rng(mix64(seed ^ 0xABCDULL));
    auto make_sequence = [&](int mode) {
        SequenceInput in;
        in.mode = mode;
        Vec3 p{60.0 + rng.uniform(-5, 5), rng.uniform(-20, 20), 30.0 + rng.uniform(-5, 5)};
        for (int t = 0; t < cfg.t_prev; ++t) {
            in.gps_history.push_back(p);
            p += Vec3{rng.uniform(0.2, 0.8), rng.uniform(-0.5, 0.5), rng.uniform(-0.2, 0.2)};
        }
        for (int i = 0; i < 5; ++i) {
            in.cloud.push_back({rng.uniform(20, 120), rng.uniform(-60, 60), rng.uniform(0, 30)});
        }
        return in;
    };
    auto random_targets = [&](int width) {
        std::vector<std::vector<double>> rows;
        for (int t = 0; t < cfg.t_pred; ++t) {
            std::vector<double> row(static_cast<std::size_t>(width));
            double total = 0.0;
            for (auto& v : row) {
                v = rng.uniform(0.05, 1.0);
                total += v;
            }
            for (auto& v : row) v /= total;
            rows.push_back(row);
        }
        return rows;
    };

    std::vector<SequenceInput> inputs{make_sequence(2), make_sequence(7)};
    std::vector<std::vector<Vec3>> future(2);
    for (auto& f : future) {
        for (int t = 0; t < cfg.t_pred; ++t) {
            f.push_back({rng.uniform(40, 90), rng.uniform(-30, 30), rng.uniform(20, 45)});
        }
    }
    std::vector<std::vector<std::vector<double>>> soft_theta{random_targets(cfg.n_angle),
                                                             random_targets(cfg.n_angle)};
    std::vector<std::vector<std::vector<double>>> soft_phi{random_targets(cfg.n_angle),
                                                           random_targets(cfg.n_angle)};
    std::vector<std::vector<std::vector<double>>> soft_r{random_targets(cfg.n_dist),
                                                         random_targets(cfg.n_dist)};

    auto build_loss = [&]() {
        nn::Tensor<double> l_traj, l_beam;
        for (std::size_t b = 0; b < inputs.size(); ++b) {
            const auto fwd = model.forward(inputs[b]);
            auto seq_traj = loss_traj_sequence(fwd.traj_m, future[b]);
            auto seq_beam = nn::add(nn::add(loss_beam_dimension(fwd.logits_theta, soft_theta[b]),
                                            loss_beam_dimension(fwd.logits_phi, soft_phi[b])),
                                    loss_beam_dimension(fwd.logits_r, soft_r[b]));
            l_traj = l_traj.defined() ? nn::add(l_traj, seq_traj) : seq_traj;
            l_beam = l_beam.defined() ? nn::add(l_beam, seq_beam) : seq_beam;
        }
        l_traj = nn::scale(l_traj, 1.0 / inputs.size());
        l_beam = nn::scale(l_beam, 1.0 / inputs.size());
        return loss_total(l_traj, l_beam, cfg.lambda_loss);
    };

    // The combined loss is worth tens of meters. Checking c * L for a fixed
    // positive c verifies exactly the same gradients while keeping the
    // finite-difference noise of near-zero coordinates under the 1e-8
    // denominator floor of the relative-error formula.
    const double loss0 = std::abs(build_loss().item());
    const double c = 0.01 / std::max(1.0, loss0);
    auto build = [&]() { return nn::scale(build_loss(), c); };

    std::vector<nn::Tensor<double>> leaves;
    for (auto& p : model.params().all()) leaves.push_back(p.value);
    return nn::grad_check<double>(build, leaves);
}

inline bool run_gradient_suite(std::uint64_t seed, std::ostream& out,
                               double end_to_end_tol = 1e-4) {
    bool ok = true;
    double worst = 0.0;
    for (const auto& entry : primitive_gradient_suite(seed)) {
        worst = std::max(worst, entry.max_rel_error);
        const bool pass = entry.max_rel_error < entry.tolerance;
        ok = ok && pass;
        out << (pass ? "  ok   " : "  FAIL ") << entry.name << "  max rel err "
            << entry.max_rel_error << "\n";
    }
    const double e2e = predictor_gradcheck_max_error(seed);
    const bool pass = e2e < end_to_end_tol;
    ok = ok && pass;
    out << (pass ? "  ok   " : "  FAIL ") << "predictor end-to-end loss  max rel err " << e2e
        << "\n";
    out << "primitive worst " << worst << ", end-to-end " << e2e << "\n";
    return ok;
}

}  // namespace nfbeam
