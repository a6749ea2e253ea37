// SPDX-License-Identifier: Apache-2.0
//
// Cascaded trajectory-then-beam predictor: modality encoders, feature
// alignment, gated cross-modal fusion, a causal attention backbone with
// learnable future query tokens, and cascaded heads with the combined
// MAE + soft top-K KL loss.
//
// Positions are normalized as (p - bs) / coverage_radius before encoding and
// de-normalized after the trajectory head. Point clouds are sorted
// lexicographically on entry, which makes every downstream value exactly
// permutation-invariant.

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "nfbeam/geometry.hpp"
#include "nfbeam/nn/adam.hpp"
#include "nfbeam/nn/modules.hpp"
#include "nfbeam/nn/tensor.hpp"

namespace nfbeam {

struct ModelConfig {
    int d_model = 64;
    int heads = 4;
    int backbone_layers = 2;
    int t_prev = 10;
    int t_pred = 10;
    int top_k = 3;
    double gamma = 0.5;
    double lambda_loss = 10.0;
    int n_angle = 20;  // N
    int n_dist = 10;   // S
    int point_feature_dim = 32;
    int task_mode_count = 10;
    double lr = 1e-3;
    int batch_size = 16;
    std::uint64_t seed = 0;
    bool detach_traj_for_beam = false;
    int ffn_mult = 4;
    // Normalization constants, filled from the dataset manifest.
    Vec3 bs_position{0.0, 0.0, 20.0};
    double coverage_radius = 170.0;

    void validate() const {
        if (d_model <= 0 || heads <= 0 || backbone_layers < 0 || t_prev <= 0 || t_pred <= 0 ||
            top_k <= 0 || n_angle <= 0 || n_dist <= 0 || point_feature_dim <= 0 ||
            task_mode_count <= 0 || batch_size <= 0) {
            throw std::invalid_argument("model config: all counts must be positive");
        }
        if (d_model % heads != 0) {
            throw std::invalid_argument("model config: d_model % heads != 0");
        }
        if (lambda_loss < 0.0) throw std::invalid_argument("model config: lambda_loss < 0");
        if (coverage_radius <= 0.0) {
            throw std::invalid_argument("model config: coverage radius <= 0");
        }
    }
};

enum class Modality { kPoints = 0, kPosition = 1, kTask = 2 };

struct SequenceInput {
    std::vector<Vec3> gps_history;  // t_prev observed GPS fixes
    std::vector<Vec3> cloud;        // P sensing points
    int mode = 0;
};

// Graph handles from one sequence forward pass.
template <class T>
struct SequenceForward {
    nn::Tensor<T> aligned_points;  // t_prev x d
    nn::Tensor<T> aligned_pos;     // t_prev x d
    nn::Tensor<T> aligned_task;    // t_prev x d
    nn::Tensor<T> fused;           // t_prev x d
    nn::Tensor<T> hidden;          // (t_prev + t_pred) x d
    nn::Tensor<T> traj_norm;       // t_pred x 3, normalized units
    nn::Tensor<T> traj_m;          // t_pred x 3, meters
    nn::Tensor<T> logits_theta;    // t_pred x N
    nn::Tensor<T> logits_phi;      // t_pred x N
    nn::Tensor<T> logits_r;        // t_pred x S
    nn::Tensor<T> c_env;           // 1 x d

    std::vector<Vec3> trajectory() const {
        std::vector<Vec3> out(static_cast<std::size_t>(traj_m.rows()));
        for (int t = 0; t < traj_m.rows(); ++t) {
            out[static_cast<std::size_t>(t)] = {static_cast<double>(traj_m.at(t, 0)),
                                                static_cast<double>(traj_m.at(t, 1)),
                                                static_cast<double>(traj_m.at(t, 2))};
        }
        return out;
    }
};

template <class T>
class Predictor {
  public:
    explicit Predictor(const ModelConfig& config) : cfg(config) {
        cfg.validate();
        Rng rng(mix64(cfg.seed ^ 0x6d6f64656cULL));
        const int d = cfg.d_model;
        const int pf = cfg.point_feature_dim;

        pos_raw_ = nn::Linear<T>(reg_, "encoder.pos_raw", 3, d, rng, /*bias=*/false);
        pos_query_ = nn::Mlp2<T>(reg_, "encoder.pos_query", 3, d, d, rng);
        point_mlp_ = nn::Mlp2<T>(reg_, "encoder.point_mlp", 3, pf, pf, rng);
        point_wq_ = nn::Linear<T>(reg_, "encoder.point_attn.wq", d, d, rng);
        point_wk_ = nn::Linear<T>(reg_, "encoder.point_attn.wk", pf, d, rng, /*bias=*/false);
        point_wv_ = nn::Linear<T>(reg_, "encoder.point_attn.wv", pf, d, rng);
        task_table_ = reg_.add("encoder.task_table",
                               nn::init_embedding<T>(cfg.task_mode_count, d, rng));

        align_w_[0] = nn::Linear<T>(reg_, "align.points.w", d, d, rng, /*bias=*/false);
        align_w_[1] = nn::Linear<T>(reg_, "align.pos.w", d, d, rng, /*bias=*/false);
        align_w_[2] = nn::Linear<T>(reg_, "align.task.w", d, d, rng, /*bias=*/false);
        align_ln_[0] = nn::LayerNorm<T>(reg_, "align.points.ln", d);
        align_ln_[1] = nn::LayerNorm<T>(reg_, "align.pos.ln", d);
        align_ln_[2] = nn::LayerNorm<T>(reg_, "align.task.ln", d);

        fuse_attn_ = nn::Attention<T>(reg_, "fuse.attn", d, d, cfg.heads, rng);
        fuse_gate_ = nn::Linear<T>(reg_, "fuse.gate", 2 * d, d, rng);
        fuse_ln_ = nn::LayerNorm<T>(reg_, "fuse.ln", d);
        fuse_ffn_ = nn::Mlp2<T>(reg_, "fuse.ffn", d, cfg.ffn_mult * d, d, rng);

        const int total = cfg.t_prev + cfg.t_pred;
        temporal_embedding_ =
            reg_.add("backbone.temporal_embedding", nn::init_embedding<T>(total, d, rng));
        future_queries_ =
            reg_.add("backbone.future_queries", nn::init_embedding<T>(cfg.t_pred, d, rng));
        blocks_.resize(static_cast<std::size_t>(cfg.backbone_layers));
        for (int l = 0; l < cfg.backbone_layers; ++l) {
            const std::string base = "backbone.block" + std::to_string(l);
            auto& blk = blocks_[static_cast<std::size_t>(l)];
            blk.ln1 = nn::LayerNorm<T>(reg_, base + ".ln1", d);
            blk.attn = nn::Attention<T>(reg_, base + ".attn", d, d, cfg.heads, rng);
            blk.ln2 = nn::LayerNorm<T>(reg_, base + ".ln2", d);
            blk.ffn = nn::Mlp2<T>(reg_, base + ".ffn", d, cfg.ffn_mult * d, d, rng);
        }

        traj_head_ = nn::Mlp2<T>(reg_, "head.traj", d, d, 3, rng);
        beam_mlp_ = nn::Mlp2<T>(reg_, "head.beam", 3 * d, d, d, rng);
        head_theta_ = nn::Linear<T>(reg_, "head.theta", d, cfg.n_angle, rng);
        head_phi_ = nn::Linear<T>(reg_, "head.phi", d, cfg.n_angle, rng);
        head_r_ = nn::Linear<T>(reg_, "head.r", d, cfg.n_dist, rng);
    }

    nn::ParamRegistry<T>& params() { return reg_; }
    const nn::ParamRegistry<T>& params() const { return reg_; }

    // (p - bs) / coverage_radius, as a no-grad leaf.
    nn::Tensor<T> normalize_positions(const std::vector<Vec3>& positions) const {
        std::vector<T> data;
        data.reserve(positions.size() * 3);
        for (const Vec3& p : positions) {
            data.push_back(static_cast<T>((p.x - cfg.bs_position.x) / cfg.coverage_radius));
            data.push_back(static_cast<T>((p.y - cfg.bs_position.y) / cfg.coverage_radius));
            data.push_back(static_cast<T>((p.z - cfg.bs_position.z) / cfg.coverage_radius));
        }
        return nn::Tensor<T>::from_data(static_cast<int>(positions.size()), 3, std::move(data));
    }

    nn::Tensor<T> encode_position_raw(const nn::Tensor<T>& normalized) const {
        return pos_raw_.forward(normalized);
    }

    nn::Tensor<T> position_query(const nn::Tensor<T>& normalized) const {
        return pos_query_.forward(normalized);
    }

    // Position-guided aggregation over per-point features; queries may hold
    // several slots at once. The cloud tensor must already be normalized.
    nn::Tensor<T> encode_points(const nn::Tensor<T>& cloud_norm,
                                const nn::Tensor<T>& queries) const {
        if (cloud_norm.rows() < 1) throw std::invalid_argument("encode_points: empty cloud");
        auto feats = point_mlp_.forward(cloud_norm);            // P x pf
        auto q = point_wq_.forward(queries);                    // n x d
        auto k = point_wk_.forward(feats);                      // P x d
        auto v = point_wv_.forward(feats);                      // P x d
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
        auto weights = nn::softmax_rows(nn::scale(nn::matmul(q, nn::transpose(k)), inv_sqrt_d));
        return nn::matmul(weights, v);                          // n x d
    }

    nn::Tensor<T> align(const nn::Tensor<T>& raw, Modality u) const {
        const auto i = static_cast<std::size_t>(u);
        return align_ln_[i].forward(align_w_[i].forward(raw));
    }

    // Gated cross-modal fusion for one slot: c_traj is 1 x d, ctx is n x d.
    nn::Tensor<T> fuse_context(const nn::Tensor<T>& c_traj, const nn::Tensor<T>& ctx,
                               double gate_bias_shift = 0.0) const {
        auto attn_out = fuse_attn_.forward(c_traj, ctx);
        auto gate_in = nn::concat_cols<T>({c_traj, attn_out});
        auto gate_logits = fuse_gate_.forward(gate_in);
        if (gate_bias_shift != 0.0) {
            gate_logits = nn::add_scalar(gate_logits, gate_bias_shift);  // test hook
        }
        auto g = nn::sigmoid(gate_logits);
        auto fused = nn::add(c_traj, nn::mul(g, attn_out));
        return nn::add(fused, fuse_ffn_.forward(fuse_ln_.forward(fused)));
    }

    // Appends learnable future queries, adds temporal embeddings and runs the
    // causal backbone. fused must be t_prev x d.
    nn::Tensor<T> backbone_forward(const nn::Tensor<T>& fused) const {
        if (fused.rows() != cfg.t_prev || fused.cols() != cfg.d_model) {
            throw std::invalid_argument(
                "backbone: expected " + std::to_string(cfg.t_prev) + " x " +
                std::to_string(cfg.d_model) + " fused tokens, got " +
                std::to_string(fused.rows()) + " x " + std::to_string(fused.cols()));
        }
        auto tokens = nn::concat_rows<T>({fused, future_queries_});
        auto x = nn::add(tokens, temporal_embedding_);
        const int total = cfg.t_prev + cfg.t_pred;
        const auto mask = nn::causal_mask(total);
        for (const auto& blk : blocks_) {
            auto normed = blk.ln1.forward(x);
            x = nn::add(x, blk.attn.forward(normed, normed, &mask));
            x = nn::add(x, blk.ffn.forward(blk.ln2.forward(x)));
        }
        return x;
    }

    // Incremental offsets accumulated from the anchor (last observed GPS).
    nn::Tensor<T> trajectory_head(const nn::Tensor<T>& s_pred,
                                  const nn::Tensor<T>& anchor_norm) const {
        auto deltas = traj_head_.forward(s_pred);  // t_pred x 3
        return nn::add_rowvec(nn::cumsum_rows(deltas), anchor_norm);
    }

    struct BeamLogits {
        nn::Tensor<T> theta, phi, r;
    };

    BeamLogits beam_head(const nn::Tensor<T>& s_pred, const nn::Tensor<T>& traj_norm,
                         const nn::Tensor<T>& c_env) const {
        auto p = cfg.detach_traj_for_beam ? nn::detach(traj_norm) : traj_norm;
        auto pos_feat = pos_query_.forward(p);  // t_pred x d
        auto ones = nn::Tensor<T>::filled(s_pred.rows(), 1, T(1));
        auto env = nn::matmul(ones, c_env);  // broadcast 1 x d over rows
        auto u = beam_mlp_.forward(nn::concat_cols<T>({s_pred, pos_feat, env}));
        return {head_theta_.forward(u), head_phi_.forward(u), head_r_.forward(u)};
    }

    SequenceForward<T> forward(const SequenceInput& input, double gate_bias_shift = 0.0) const {
        if (static_cast<int>(input.gps_history.size()) != cfg.t_prev) {
            throw std::invalid_argument("forward: expected " + std::to_string(cfg.t_prev) +
                                        " GPS slots, got " +
                                        std::to_string(input.gps_history.size()));
        }
        if (input.mode < 0 || input.mode >= cfg.task_mode_count) {
            throw std::out_of_range("forward: task mode outside table");
        }
        SequenceForward<T> out;

        auto gps_norm = normalize_positions(input.gps_history);

        // Canonical point order makes the encoding exactly permutation
        // invariant.
        std::vector<Vec3> cloud_sorted = input.cloud;
        std::sort(cloud_sorted.begin(), cloud_sorted.end(), [](const Vec3& a, const Vec3& b) {
            if (a.x != b.x) return a.x < b.x;
            if (a.y != b.y) return a.y < b.y;
            return a.z < b.z;
        });
        auto cloud_norm = normalize_positions(cloud_sorted);

        auto pos_raw = encode_position_raw(gps_norm);                  // t_prev x d
        auto queries = position_query(gps_norm);                       // t_prev x d
        auto points_raw = encode_points(cloud_norm, queries);          // t_prev x d
        std::vector<int> ids(static_cast<std::size_t>(cfg.t_prev), input.mode);
        auto task_raw = nn::embedding_lookup(task_table_, ids);        // t_prev x d

        out.aligned_points = align(points_raw, Modality::kPoints);
        out.aligned_pos = align(pos_raw, Modality::kPosition);
        out.aligned_task = align(task_raw, Modality::kTask);

        // Global environmental context: mean over slots and modalities.
        out.c_env = nn::mean_rows(
            nn::concat_rows<T>({out.aligned_points, out.aligned_pos, out.aligned_task}));

        std::vector<nn::Tensor<T>> fused_slots;
        fused_slots.reserve(static_cast<std::size_t>(cfg.t_prev));
        for (int t = 0; t < cfg.t_prev; ++t) {
            auto c_traj = nn::row(out.aligned_pos, t);
            auto ctx = nn::concat_rows<T>({nn::row(out.aligned_points, t),
                                           nn::row(out.aligned_pos, t),
                                           nn::row(out.aligned_task, t)});
            fused_slots.push_back(fuse_context(c_traj, ctx, gate_bias_shift));
        }
        out.fused = nn::concat_rows(fused_slots);

        out.hidden = backbone_forward(out.fused);
        auto s_pred = nn::slice_rows(out.hidden, cfg.t_prev, cfg.t_prev + cfg.t_pred);

        auto anchor = normalize_positions({input.gps_history.back()});
        out.traj_norm = trajectory_head(s_pred, anchor);
        auto bs_row = nn::Tensor<T>::from_data(
            1, 3,
            {static_cast<T>(cfg.bs_position.x), static_cast<T>(cfg.bs_position.y),
             static_cast<T>(cfg.bs_position.z)});
        out.traj_m = nn::add_rowvec(nn::scale(out.traj_norm, cfg.coverage_radius), bs_row);

        auto logits = beam_head(s_pred, out.traj_norm, out.c_env);
        out.logits_theta = logits.theta;
        out.logits_phi = logits.phi;
        out.logits_r = logits.r;
        return out;
    }

    ModelConfig cfg;

  private:
    struct Block {
        nn::LayerNorm<T> ln1;
        nn::Attention<T> attn;
        nn::LayerNorm<T> ln2;
        nn::Mlp2<T> ffn;
    };

    nn::ParamRegistry<T> reg_;
    nn::Linear<T> pos_raw_;
    nn::Mlp2<T> pos_query_;
    nn::Mlp2<T> point_mlp_;
    nn::Linear<T> point_wq_, point_wk_, point_wv_;
    nn::Tensor<T> task_table_;
    nn::Linear<T> align_w_[3];
    nn::LayerNorm<T> align_ln_[3];
    nn::Attention<T> fuse_attn_;
    nn::Linear<T> fuse_gate_;
    nn::LayerNorm<T> fuse_ln_;
    nn::Mlp2<T> fuse_ffn_;
    nn::Tensor<T> temporal_embedding_;
    nn::Tensor<T> future_queries_;
    std::vector<Block> blocks_;
    nn::Mlp2<T> traj_head_;
    nn::Mlp2<T> beam_mlp_;
    nn::Linear<T> head_theta_, head_phi_, head_r_;
};

// ---------------------------------------------------------------------------
// Losses (Eq. forms: L1 summed over axes for the trajectory, KL against the
// decay-weighted soft targets for beams, L = L_traj + lambda * L_beam).

// (1 / t_pred) * sum_t ||pred - target||_1 for one sequence, in meters.
template <class T>
nn::Tensor<T> loss_traj_sequence(const nn::Tensor<T>& pred_m,
                                 const std::vector<Vec3>& target) {
    if (static_cast<int>(target.size()) != pred_m.rows()) {
        throw std::invalid_argument("loss_traj: horizon mismatch, pred " +
                                    std::to_string(pred_m.rows()) + " target " +
                                    std::to_string(target.size()));
    }
    std::vector<T> data;
    data.reserve(target.size() * 3);
    for (const Vec3& p : target) {
        data.push_back(static_cast<T>(p.x));
        data.push_back(static_cast<T>(p.y));
        data.push_back(static_cast<T>(p.z));
    }
    auto tgt = nn::Tensor<T>::from_data(pred_m.rows(), 3, std::move(data));
    return nn::scale(nn::sum(nn::abs_op(nn::sub(pred_m, tgt))), 1.0 / pred_m.rows());
}

// KL(target || softmax(logits)) averaged over slots; rows of `target` must
// be valid distributions. 0 * log(0 / q) contributes zero.
template <class T>
nn::Tensor<T> loss_beam_dimension(const nn::Tensor<T>& logits,
                                  const std::vector<std::vector<double>>& target) {
    if (static_cast<int>(target.size()) != logits.rows()) {
        throw std::invalid_argument("loss_beam: slot count mismatch");
    }
    std::vector<T> tdata;
    tdata.reserve(logits.numel());
    double entropy_term = 0.0;  // sum_t sum_i p * log p
    for (const auto& row : target) {
        if (static_cast<int>(row.size()) != logits.cols()) {
            throw std::invalid_argument("loss_beam: candidate count mismatch");
        }
        for (double p : row) {
            tdata.push_back(static_cast<T>(p));
            if (p > 0.0) entropy_term += p * std::log(p);
        }
    }
    auto tgt = nn::Tensor<T>::from_data(logits.rows(), logits.cols(), std::move(tdata));
    auto cross = nn::scale(nn::sum(nn::mul(tgt, nn::log_softmax_rows(logits))),
                           -1.0 / logits.rows());
    return nn::add_scalar(cross, entropy_term / logits.rows());
}

template <class T>
nn::Tensor<T> loss_total(const nn::Tensor<T>& l_traj, const nn::Tensor<T>& l_beam,
                         double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("loss_total: lambda < 0");
    return nn::add(l_traj, nn::scale(l_beam, lambda));
}

}  // namespace nfbeam
