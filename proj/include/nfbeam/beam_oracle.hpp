// SPDX-License-Identifier: Apache-2.0
//
// Exhaustive-sweep beam ground truth: optimal and top-K beams per slot,
// decay-weighted per-dimension soft targets, and the evaluation metrics.
//
// Tie rule (frozen): equal SNR resolves to the smaller flat index. Sweeps
// are parallel over codewords; each codeword's dot product is accumulated
// sequentially, so results do not depend on the partitioning.

#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "nfbeam/array_codebook.hpp"
#include "nfbeam/scene_channel.hpp"

namespace nfbeam {

// Raised when every codeword sees zero power (zero channel); callers drop
// the slot or regenerate the sequence.
struct NoSignalError : std::runtime_error {
    NoSignalError() : std::runtime_error("beam sweep: zero channel, no signal") {}
};

struct ScoredBeam {
    BeamIndex3D index;
    double se = 0.0;  // bits/s/Hz
};

struct BeamLabel {
    BeamIndex3D optimal;
    std::vector<ScoredBeam> topk;  // non-increasing SE, topk[0] == optimal
};

struct SoftTarget {
    std::vector<double> theta;  // length N, sums to 1
    std::vector<double> phi;    // length N
    std::vector<double> r;      // length S
};

// SNR of every codeword in flat order. Uses materialized vectors when
// present, otherwise synthesizes codewords on the fly.
std::vector<double> sweep_snrs(const ChannelVector& h, const Codebook3D& cb,
                               const LinkParams& link, unsigned threads = 1);

BeamIndex3D sweep_optimal_beam(const ChannelVector& h, const Codebook3D& cb,
                               const LinkParams& link, unsigned threads = 1);

BeamLabel top_k_beams(const ChannelVector& h, const Codebook3D& cb, const LinkParams& link,
                      int k, unsigned threads = 1);

// Shared selection logic: top-k (snr desc, flat asc) from a full SNR sweep.
BeamLabel select_top_k(std::span<const double> snrs, int n_angle, int n_dist,
                       const LinkParams& link, int k);

// Rank-k beam gets weight gamma^k accumulated on its per-dimension indices;
// each dimension is then normalized to sum 1.
SoftTarget soft_targets(const BeamLabel& label, double gamma, int n_angle, int n_dist);

struct TopkFlags {
    bool theta = false;
    bool phi = false;
    bool r = false;
    bool joint = false;
};

// Per-dimension: true index among the K largest logits (ties by smaller
// index). Joint: flat candidates ranked by the product of per-dimension
// softmax probabilities.
TopkFlags topk_accuracy(std::span<const double> logits_theta, std::span<const double> logits_phi,
                        std::span<const double> logits_r, const BeamIndex3D& truth, int k);

// Mean absolute error in meters: mean over steps and axes.
double trajectory_mae(std::span<const Vec3> pred, std::span<const Vec3> truth);
// Per-step variant, averaging axes only.
std::vector<double> per_step_mae(std::span<const Vec3> pred, std::span<const Vec3> truth);

// float32-packed codebook for bulk label generation. Entries are the
// float-rounded steering phases; dot products accumulate in double in flat
// codeword order, so sweeps stay deterministic for any thread count.
class PackedCodebook {
  public:
    PackedCodebook(const ArrayConfig& cfg, const Codebook3D& grids, unsigned threads = 1);

    void sweep_snrs(const ChannelVector& h, const LinkParams& link, std::vector<double>& out,
                    unsigned threads = 1) const;
    BeamLabel top_k(const ChannelVector& h, const LinkParams& link, int k,
                    unsigned threads = 1) const;

    int size() const { return count_; }
    int num_antennas() const { return antennas_; }
    int n_angle() const { return n_angle_; }
    int n_dist() const { return n_dist_; }

  private:
    int count_ = 0;
    int antennas_ = 0;
    int n_angle_ = 0;
    int n_dist_ = 0;
    std::vector<float> data_;  // interleaved re/im, codeword-major
};

}  // namespace nfbeam
