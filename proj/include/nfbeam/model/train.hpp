// SPDX-License-Identifier: Apache-2.0
//
// Training loop, evaluation, and the CSV training log. Training is
// single-threaded and deterministic: seeded Fisher-Yates shuffling, fixed
// batch assembly order, Adam state in registry order.

#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "nfbeam/beam_oracle.hpp"
#include "nfbeam/dataset.hpp"
#include "nfbeam/model/baseline.hpp"
#include "nfbeam/model/predictor.hpp"
#include "nfbeam/nn/checkpoint.hpp"

namespace nfbeam {

inline SequenceInput input_from_record(const SequenceRecord& rec, int t_prev) {
    SequenceInput in;
    in.mode = static_cast<int>(rec.mode);
    in.gps_history.reserve(static_cast<std::size_t>(t_prev));
    for (int t = 0; t < t_prev; ++t) in.gps_history.push_back(rec.gps_position(t));
    const int p = static_cast<int>(rec.cloud.size() / 3);
    in.cloud.reserve(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) in.cloud.push_back(rec.cloud_point(i));
    return in;
}

inline std::vector<Vec3> future_positions(const SequenceRecord& rec, int t_prev, int t_pred) {
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(t_pred));
    for (int t = 0; t < t_pred; ++t) out.push_back(rec.position(t_prev + t));
    return out;
}

// Soft-target rows for the future slots of one dimension.
inline std::vector<std::vector<double>> future_soft_targets(const std::vector<float>& flat,
                                                            int width, int t_prev, int t_pred) {
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(t_pred));
    for (int t = 0; t < t_pred; ++t) {
        std::vector<double> row(static_cast<std::size_t>(width));
        for (int i = 0; i < width; ++i) {
            row[static_cast<std::size_t>(i)] =
                flat[static_cast<std::size_t>(t_prev + t) * width + i];
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

struct EvalResult {
    std::vector<StepMetricsRow> steps;  // t_pred rows
    double mae = 0.0;                   // mean over steps
    double top1_joint = 0.0;
    double top5_joint = 0.0;
};

namespace detail {

struct EvalAccumulator {
    explicit EvalAccumulator(int t_pred) : rows(static_cast<std::size_t>(t_pred)) {
        for (int t = 0; t < t_pred; ++t) rows[static_cast<std::size_t>(t)].step = t + 1;
    }

    void add_slot(int t, const Vec3& pred, const Vec3& truth,
                  const std::vector<double>& logits_theta, const std::vector<double>& logits_phi,
                  const std::vector<double>& logits_r, const BeamIndex3D& truth_beam) {
        auto& row = rows[static_cast<std::size_t>(t)];
        row.mae_m += (std::abs(pred.x - truth.x) + std::abs(pred.y - truth.y) +
                      std::abs(pred.z - truth.z)) /
                     3.0;
        const TopkFlags f1 = topk_accuracy(logits_theta, logits_phi, logits_r, truth_beam, 1);
        const TopkFlags f5 = topk_accuracy(logits_theta, logits_phi, logits_r, truth_beam, 5);
        row.top1_theta += f1.theta;
        row.top1_phi += f1.phi;
        row.top1_r += f1.r;
        row.top1_joint += f1.joint;
        row.top5_theta += f5.theta;
        row.top5_phi += f5.phi;
        row.top5_r += f5.r;
        row.top5_joint += f5.joint;
        ++counts;
    }

    EvalResult finish() {
        EvalResult res;
        const double n = std::max(1.0, static_cast<double>(counts) / rows.size());
        for (auto& row : rows) {
            row.mae_m /= n;
            row.top1_theta /= n;
            row.top1_phi /= n;
            row.top1_r /= n;
            row.top1_joint /= n;
            row.top5_theta /= n;
            row.top5_phi /= n;
            row.top5_r /= n;
            row.top5_joint /= n;
            res.mae += row.mae_m;
            res.top1_joint += row.top1_joint;
            res.top5_joint += row.top5_joint;
        }
        res.mae /= static_cast<double>(rows.size());
        res.top1_joint /= static_cast<double>(rows.size());
        res.top5_joint /= static_cast<double>(rows.size());
        res.steps = rows;
        return res;
    }

    std::vector<StepMetricsRow> rows;
    long counts = 0;  // slots accumulated (sequences * t_pred)
};

template <class T>
std::vector<double> logits_row(const nn::Tensor<T>& logits, int t) {
    std::vector<double> row(static_cast<std::size_t>(logits.cols()));
    for (int i = 0; i < logits.cols(); ++i) row[static_cast<std::size_t>(i)] = logits.at(t, i);
    return row;
}

}  // namespace detail

template <class T>
EvalResult evaluate_model(const Predictor<T>& model, const std::vector<SequenceRecord>& records,
                          const DatasetManifest& manifest) {
    detail::EvalAccumulator acc(model.cfg.t_pred);
    for (const auto& rec : records) {
        const auto fwd = model.forward(input_from_record(rec, model.cfg.t_prev));
        const auto traj = fwd.trajectory();
        for (int t = 0; t < model.cfg.t_pred; ++t) {
            const BeamIndex3D truth_beam =
                unflatten(static_cast<int>(rec.optimal_flat[static_cast<std::size_t>(
                              model.cfg.t_prev + t)]),
                          manifest.n_angle, manifest.n_dist);
            acc.add_slot(t, traj[static_cast<std::size_t>(t)],
                         rec.position(model.cfg.t_prev + t), detail::logits_row(fwd.logits_theta, t),
                         detail::logits_row(fwd.logits_phi, t), detail::logits_row(fwd.logits_r, t),
                         truth_beam);
        }
    }
    return acc.finish();
}

inline EvalResult evaluate_baseline(const std::vector<SequenceRecord>& records,
                                    const DatasetManifest& manifest, const Codebook3D& grids,
                                    const Vec3& bs_position) {
    detail::EvalAccumulator acc(manifest.t_pred);
    for (const auto& rec : records) {
        std::vector<Vec3> gps_hist;
        for (int t = 0; t < manifest.t_prev; ++t) gps_hist.push_back(rec.gps_position(t));
        const auto pred = baseline_cv_geometric(gps_hist, manifest.t_pred, manifest.dt, grids,
                                                bs_position);
        for (int t = 0; t < manifest.t_pred; ++t) {
            const BeamIndex3D truth_beam = unflatten(
                static_cast<int>(rec.optimal_flat[static_cast<std::size_t>(manifest.t_prev + t)]),
                manifest.n_angle, manifest.n_dist);
            acc.add_slot(t, pred.trajectory[static_cast<std::size_t>(t)],
                         rec.position(manifest.t_prev + t),
                         pred.logits_theta[static_cast<std::size_t>(t)],
                         pred.logits_phi[static_cast<std::size_t>(t)],
                         pred.logits_r[static_cast<std::size_t>(t)], truth_beam);
        }
    }
    return acc.finish();
}

struct TrainOptions {
    int epochs = 40;
    std::string log_csv;     // written when non-empty
    std::string checkpoint;  // best-val checkpoint path, written when non-empty
    // Early stop once both validation thresholds are met (disabled when NaN).
    double stop_top1_at = std::numeric_limits<double>::quiet_NaN();
    double stop_mae_below = std::numeric_limits<double>::quiet_NaN();
    bool verbose = false;
};

struct EpochLog {
    int epoch = 0;
    double l_traj = 0.0;
    double l_beam = 0.0;
    double val_mae = 0.0;
    double val_top1_joint = 0.0;
    double val_top5_joint = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = -1;
    double best_val_top1 = -1.0;
    EvalResult final_val;
};

inline void write_training_log(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("training log: cannot open " + path);
    out << "epoch,l_traj,l_beam,val_mae,val_top1_joint,val_top5_joint\n";
    out.precision(17);
    for (const auto& e : log) {
        out << e.epoch << ',' << e.l_traj << ',' << e.l_beam << ',' << e.val_mae << ','
            << e.val_top1_joint << ',' << e.val_top5_joint << '\n';
    }
}

// Mini-batch Adam over the combined loss. `val` may alias the training split
// (overfit checks); it drives the per-epoch metrics, early stopping and the
// best checkpoint.
template <class T>
TrainResult train_model(Predictor<T>& model, const std::vector<SequenceRecord>& train_recs,
                        const std::vector<SequenceRecord>& val_recs,
                        const DatasetManifest& manifest, const TrainOptions& opt) {
    if (train_recs.empty()) throw std::invalid_argument("train: empty dataset");
    const ModelConfig& cfg = model.cfg;
    nn::AdamOptimizer<T> adam(model.params(), cfg.lr);

    TrainResult result;
    std::vector<std::size_t> order(train_recs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        Rng shuffle_rng(mix64(cfg.seed ^ 0x5348ULL ^ static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double epoch_traj = 0.0, epoch_beam = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const double inv_b = 1.0 / static_cast<double>(stop - start);

            adam.zero_grad();
            nn::Tensor<T> l_traj, l_beam;
            for (std::size_t bi = start; bi < stop; ++bi) {
                const SequenceRecord& rec = train_recs[order[bi]];
                const auto fwd = model.forward(input_from_record(rec, cfg.t_prev));
                auto seq_traj =
                    loss_traj_sequence(fwd.traj_m, future_positions(rec, cfg.t_prev, cfg.t_pred));
                auto kl_theta = loss_beam_dimension(
                    fwd.logits_theta,
                    future_soft_targets(rec.soft_theta, cfg.n_angle, cfg.t_prev, cfg.t_pred));
                auto kl_phi = loss_beam_dimension(
                    fwd.logits_phi,
                    future_soft_targets(rec.soft_phi, cfg.n_angle, cfg.t_prev, cfg.t_pred));
                auto kl_r = loss_beam_dimension(
                    fwd.logits_r,
                    future_soft_targets(rec.soft_r, cfg.n_dist, cfg.t_prev, cfg.t_pred));
                auto seq_beam = nn::add(nn::add(kl_theta, kl_phi), kl_r);
                l_traj = l_traj.defined() ? nn::add(l_traj, seq_traj) : seq_traj;
                l_beam = l_beam.defined() ? nn::add(l_beam, seq_beam) : seq_beam;
            }
            l_traj = nn::scale(l_traj, inv_b);
            l_beam = nn::scale(l_beam, inv_b);
            auto total = loss_total(l_traj, l_beam, cfg.lambda_loss);
            total.backward();
            adam.step();

            epoch_traj += static_cast<double>(l_traj.item()) * static_cast<double>(stop - start);
            epoch_beam += static_cast<double>(l_beam.item()) * static_cast<double>(stop - start);
            seen += stop - start;
        }

        const auto& eval_set = val_recs.empty() ? train_recs : val_recs;
        const EvalResult val = evaluate_model(model, eval_set, manifest);

        EpochLog log;
        log.epoch = epoch;
        log.l_traj = epoch_traj / static_cast<double>(seen);
        log.l_beam = epoch_beam / static_cast<double>(seen);
        log.val_mae = val.mae;
        log.val_top1_joint = val.top1_joint;
        log.val_top5_joint = val.top5_joint;
        result.log.push_back(log);
        result.final_val = val;
        if (opt.verbose) {
            std::printf("epoch %3d  l_traj %.4f  l_beam %.4f  val_mae %.3f  top1 %.3f  top5 %.3f\n",
                        epoch, log.l_traj, log.l_beam, log.val_mae, log.val_top1_joint,
                        log.val_top5_joint);
        }

        if (val.top1_joint > result.best_val_top1) {
            result.best_val_top1 = val.top1_joint;
            result.best_epoch = epoch;
            if (!opt.checkpoint.empty()) nn::save_checkpoint(model.params(), opt.checkpoint);
        }

        const bool stop_metrics_set = !std::isnan(opt.stop_top1_at) && !std::isnan(opt.stop_mae_below);
        if (stop_metrics_set && val.top1_joint >= opt.stop_top1_at &&
            val.mae < opt.stop_mae_below) {
            break;
        }
    }
    if (!opt.log_csv.empty()) write_training_log(result.log, opt.log_csv);
    return result;
}

}  // namespace nfbeam
