// SPDX-License-Identifier: Apache-2.0

#include "nfbeam/beam_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nfbeam/parallel.hpp"

namespace nfbeam {

namespace {

bool channel_is_zero(const ChannelVector& h) {
    for (const auto& v : h.h) {
        if (v.real() != 0.0 || v.imag() != 0.0) return false;
    }
    return true;
}

}  // namespace

std::vector<double> sweep_snrs(const ChannelVector& h, const Codebook3D& cb,
                               const LinkParams& link, unsigned threads) {
    const std::size_t m = static_cast<std::size_t>(cb.num_antennas());
    if (h.h.size() != m) {
        std::ostringstream os;
        os << "sweep: channel length " << h.h.size() << " != codebook antennas " << m;
        throw std::invalid_argument(os.str());
    }
    const std::size_t count = static_cast<std::size_t>(cb.size());
    std::vector<double> snrs(count);
    const double scale = link.p_r / link.sigma2;

    if (cb.materialized()) {
        parallel_for(count, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t f = begin; f < end; ++f) {
                const std::complex<double>* w = cb.vectors.data() + f * m;
                double re = 0.0, im = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    re += w[i].real() * h.h[i].real() + w[i].imag() * h.h[i].imag();
                    im += w[i].real() * h.h[i].imag() - w[i].imag() * h.h[i].real();
                }
                snrs[f] = scale * (re * re + im * im);
            }
        });
    } else {
        // Streaming: fuse steering synthesis with the dot product. conj(w_m)
        // = exp(+j*k*r_m), so the phase is accumulated directly.
        parallel_for(count, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t f = begin; f < end; ++f) {
                const BeamIndex3D b = unflatten(static_cast<int>(f), cb.n_angle, cb.n_dist);
                const Vec3 fp = focal_to_cart(cb.focal_point(b));
                double re = 0.0, im = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double rm = distance(fp, cb.antennas[i]);
                    const double phase = cb.wavenumber * rm;
                    const double c = std::cos(phase), s = std::sin(phase);
                    re += c * h.h[i].real() - s * h.h[i].imag();
                    im += c * h.h[i].imag() + s * h.h[i].real();
                }
                snrs[f] = scale * (re * re + im * im);
            }
        });
    }
    return snrs;
}

BeamLabel select_top_k(std::span<const double> snrs, int n_angle, int n_dist,
                       const LinkParams& link, int k) {
    const int count = static_cast<int>(snrs.size());
    if (k < 1 || k > count) throw std::invalid_argument("top-k: K outside [1, N^2*S]");
    (void)link;

    std::vector<int> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), 0);
    const auto better = [&snrs](int a, int b) {
        const double sa = snrs[static_cast<std::size_t>(a)];
        const double sb = snrs[static_cast<std::size_t>(b)];
        return sa > sb || (sa == sb && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + k, order.end(), better);

    BeamLabel label;
    label.topk.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const int flat = order[static_cast<std::size_t>(i)];
        label.topk.push_back({unflatten(flat, n_angle, n_dist),
                              spectral_efficiency(snrs[static_cast<std::size_t>(flat)])});
    }
    label.optimal = label.topk.front().index;
    return label;
}

BeamIndex3D sweep_optimal_beam(const ChannelVector& h, const Codebook3D& cb,
                               const LinkParams& link, unsigned threads) {
    return top_k_beams(h, cb, link, 1, threads).optimal;
}

BeamLabel top_k_beams(const ChannelVector& h, const Codebook3D& cb, const LinkParams& link,
                      int k, unsigned threads) {
    if (channel_is_zero(h)) throw NoSignalError();
    const auto snrs = sweep_snrs(h, cb, link, threads);
    return select_top_k(snrs, cb.n_angle, cb.n_dist, link, k);
}

SoftTarget soft_targets(const BeamLabel& label, double gamma, int n_angle, int n_dist) {
    if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("soft targets: gamma outside (0, 1]");
    SoftTarget t;
    t.theta.assign(static_cast<std::size_t>(n_angle), 0.0);
    t.phi.assign(static_cast<std::size_t>(n_angle), 0.0);
    t.r.assign(static_cast<std::size_t>(n_dist), 0.0);

    double weight = 1.0;
    for (const ScoredBeam& b : label.topk) {
        t.theta[static_cast<std::size_t>(b.index.i_theta)] += weight;
        t.phi[static_cast<std::size_t>(b.index.i_phi)] += weight;
        t.r[static_cast<std::size_t>(b.index.i_r)] += weight;
        weight *= gamma;
    }
    for (auto* v : {&t.theta, &t.phi, &t.r}) {
        const double total = std::accumulate(v->begin(), v->end(), 0.0);
        for (double& x : *v) x /= total;
    }
    return t;
}

namespace {

// True when `truth` ranks among the k best entries (value desc, index asc).
bool in_top_k(std::span<const double> values, int truth, int k) {
    const double vt = values[static_cast<std::size_t>(truth)];
    int better = 0;
    for (int i = 0; i < static_cast<int>(values.size()); ++i) {
        if (i == truth) continue;
        const double v = values[static_cast<std::size_t>(i)];
        if (v > vt || (v == vt && i < truth)) ++better;
    }
    return better < k;
}

std::vector<double> softmax_plain(std::span<const double> logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

}  // namespace

TopkFlags topk_accuracy(std::span<const double> logits_theta, std::span<const double> logits_phi,
                        std::span<const double> logits_r, const BeamIndex3D& truth, int k) {
    if (k < 1) throw std::invalid_argument("topk_accuracy: K must be >= 1");
    TopkFlags flags;
    flags.theta = in_top_k(logits_theta, truth.i_theta, k);
    flags.phi = in_top_k(logits_phi, truth.i_phi, k);
    flags.r = in_top_k(logits_r, truth.i_r, k);

    // Joint ranking over the product distribution induced by the three heads.
    const auto pt = softmax_plain(logits_theta);
    const auto pp = softmax_plain(logits_phi);
    const auto pr = softmax_plain(logits_r);
    const int n_angle = static_cast<int>(pt.size());
    const int n_dist = static_cast<int>(pr.size());
    const double truth_score = pt[static_cast<std::size_t>(truth.i_theta)] *
                               pp[static_cast<std::size_t>(truth.i_phi)] *
                               pr[static_cast<std::size_t>(truth.i_r)];
    const int truth_flat = truth.flat;
    int better = 0;
    for (int it = 0; it < n_angle; ++it) {
        for (int ip = 0; ip < n_angle; ++ip) {
            const double pa = pt[static_cast<std::size_t>(it)] * pp[static_cast<std::size_t>(ip)];
            for (int ir = 0; ir < n_dist; ++ir) {
                const int flat = (it * n_angle + ip) * n_dist + ir;
                if (flat == truth_flat) continue;
                const double score = pa * pr[static_cast<std::size_t>(ir)];
                if (score > truth_score || (score == truth_score && flat < truth_flat)) ++better;
            }
        }
    }
    flags.joint = better < k;
    return flags;
}

double trajectory_mae(std::span<const Vec3> pred, std::span<const Vec3> truth) {
    if (pred.size() != truth.size() || pred.empty()) {
        std::ostringstream os;
        os << "trajectory_mae: shape mismatch, pred " << pred.size() << " truth " << truth.size();
        throw std::invalid_argument(os.str());
    }
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        total += std::abs(pred[i].x - truth[i].x) + std::abs(pred[i].y - truth[i].y) +
                 std::abs(pred[i].z - truth[i].z);
    }
    return total / (3.0 * static_cast<double>(pred.size()));
}

std::vector<double> per_step_mae(std::span<const Vec3> pred, std::span<const Vec3> truth) {
    if (pred.size() != truth.size()) {
        throw std::invalid_argument("per_step_mae: shape mismatch");
    }
    std::vector<double> out(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        out[i] = (std::abs(pred[i].x - truth[i].x) + std::abs(pred[i].y - truth[i].y) +
                  std::abs(pred[i].z - truth[i].z)) /
                 3.0;
    }
    return out;
}

PackedCodebook::PackedCodebook(const ArrayConfig& cfg, const Codebook3D& grids, unsigned threads)
    : count_(grids.size()),
      antennas_(cfg.total_antennas()),
      n_angle_(grids.n_angle),
      n_dist_(grids.n_dist) {
    const std::size_t m = static_cast<std::size_t>(antennas_);
    data_.resize(static_cast<std::size_t>(count_) * m * 2);
    const auto antennas = antenna_positions(cfg);
    const double k = cfg.wavenumber;
    parallel_for(static_cast<std::size_t>(count_), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t f = begin; f < end; ++f) {
            const BeamIndex3D b = unflatten(static_cast<int>(f), n_angle_, n_dist_);
            const Vec3 fp = focal_to_cart(grids.focal_point(b));
            float* out = data_.data() + f * m * 2;
            for (std::size_t i = 0; i < m; ++i) {
                const double phase = -k * distance(fp, antennas[i]);
                out[2 * i] = static_cast<float>(std::cos(phase));
                out[2 * i + 1] = static_cast<float>(std::sin(phase));
            }
        }
    });
}

void PackedCodebook::sweep_snrs(const ChannelVector& h, const LinkParams& link,
                                std::vector<double>& out, unsigned threads) const {
    const std::size_t m = static_cast<std::size_t>(antennas_);
    if (h.h.size() != m) throw std::invalid_argument("packed sweep: channel length mismatch");
    out.resize(static_cast<std::size_t>(count_));
    std::vector<float> hf(2 * m);
    for (std::size_t i = 0; i < m; ++i) {
        hf[2 * i] = static_cast<float>(h.h[i].real());
        hf[2 * i + 1] = static_cast<float>(h.h[i].imag());
    }
    const double scale = link.p_r / link.sigma2;
    parallel_for(static_cast<std::size_t>(count_), threads,
                 [&](std::size_t begin, std::size_t end) {
                     for (std::size_t f = begin; f < end; ++f) {
                         const float* w = data_.data() + f * m * 2;
                         float re = 0.0f, im = 0.0f;
                         for (std::size_t i = 0; i < m; ++i) {
                             const float wr = w[2 * i], wi = w[2 * i + 1];
                             const float hr = hf[2 * i], hi = hf[2 * i + 1];
                             re += wr * hr + wi * hi;
                             im += wr * hi - wi * hr;
                         }
                         out[f] = scale * (static_cast<double>(re) * re +
                                           static_cast<double>(im) * im);
                     }
                 });
}

BeamLabel PackedCodebook::top_k(const ChannelVector& h, const LinkParams& link, int k,
                                unsigned threads) const {
    if (channel_is_zero(h)) throw NoSignalError();
    std::vector<double> snrs;
    sweep_snrs(h, link, snrs, threads);
    return select_top_k(snrs, n_angle_, n_dist_, link, k);
}

}  // namespace nfbeam
