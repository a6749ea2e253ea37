// SPDX-License-Identifier: Apache-2.0
//
// Dataset container and the end-to-end generation pipeline.
//
// Binary payload (little-endian): magic "NFTL", u32 version, u64 record
// count, then length-prefixed records. The manifest rides alongside as JSON.
// Exact layouts are frozen in docs/formats.md.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nfbeam/array_codebook.hpp"
#include "nfbeam/beam_oracle.hpp"
#include "nfbeam/scene_channel.hpp"
#include "nfbeam/trajectory.hpp"

namespace nfbeam {

inline constexpr char kDatasetMagic[4] = {'N', 'F', 'T', 'L'};
inline constexpr std::uint32_t kDatasetVersion = 1;

struct DatasetManifest {
    std::uint32_t version = kDatasetVersion;
    std::string scene_file;
    // Array + codebook parameters.
    int m_y = 64, m_z = 64;
    double d_y = 0.0, d_z = 0.0, f_c = 7e9;
    int n_angle = 20, n_dist = 10;
    CoverageRanges ranges;
    // Generation parameters.
    std::uint64_t master_seed = 0;
    int train_count = 0, val_count = 0, test_count = 0;
    double sigma_gps = 0.5;
    int top_k = 3;
    double gamma = 0.5;
    double dt = 0.1;
    int t_prev = 10, t_pred = 10;
    int cloud_points = 1024;
    double p_r = 1.0, sigma2 = 1.0;

    int total_slots() const { return t_prev + t_pred; }
    ArrayConfig array_config() const { return make_array_config(m_y, m_z, d_y, d_z, f_c); }
};

struct SequenceRecord {
    std::uint64_t id = 0;
    std::uint32_t mode = 0;
    // Packed xyz triples, slot-major.
    std::vector<float> positions;  // T*3
    std::vector<float> gps;        // T*3
    std::vector<float> cloud;      // P*3
    // Per-slot labels, slot-major.
    std::vector<std::uint32_t> optimal_flat;  // T
    std::vector<std::uint32_t> topk_flat;     // T*K
    std::vector<float> topk_se;               // T*K
    std::vector<float> soft_theta;            // T*N
    std::vector<float> soft_phi;              // T*N
    std::vector<float> soft_r;                // T*S

    Vec3 position(int t) const {
        return {positions[3 * static_cast<std::size_t>(t)],
                positions[3 * static_cast<std::size_t>(t) + 1],
                positions[3 * static_cast<std::size_t>(t) + 2]};
    }
    Vec3 gps_position(int t) const {
        return {gps[3 * static_cast<std::size_t>(t)], gps[3 * static_cast<std::size_t>(t) + 1],
                gps[3 * static_cast<std::size_t>(t) + 2]};
    }
    Vec3 cloud_point(int i) const {
        return {cloud[3 * static_cast<std::size_t>(i)], cloud[3 * static_cast<std::size_t>(i) + 1],
                cloud[3 * static_cast<std::size_t>(i) + 2]};
    }
};

// Round-trip is bit-exact for all arrays. Distinct errors for bad magic,
// unsupported version and truncation.
void write_records(const std::vector<SequenceRecord>& records, const std::string& path);
std::vector<SequenceRecord> read_records(const std::string& path);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);
void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Validates record shapes against the manifest (T, P, K, N, S and flat
// index bounds). Throws std::runtime_error on any inconsistency.
void validate_records(const std::vector<SequenceRecord>& records, const DatasetManifest& m,
                      int expected_count);

struct Dataset {
    DatasetManifest manifest;
    Scene scene;
    std::vector<SequenceRecord> train;
    std::vector<SequenceRecord> val;
    std::vector<SequenceRecord> test;
};

// Writes train.nftl / val.nftl / test.nftl / scene.json / manifest.json
// under out_dir and returns the in-memory dataset. Sequences are generated
// with per-sequence seeds mix64(master_seed ^ id), so output is byte
// identical for any thread count. Sequences whose channel vanishes in some
// slot are regenerated with a bumped attempt counter.
Dataset generate_dataset(const Scene& scene, const DatasetManifest& config,
                         const std::string& out_dir, unsigned threads = 1);

Dataset load_dataset(const std::string& dir);

// Codebook export: magic "NFCB", u32 version, counts, ranges, grids, then
// interleaved little-endian float32 re/im codeword data.
void export_codebook(const Codebook3D& cb, const std::string& path);

// Metrics CSV with the frozen column schema
// step,mae_m,top1_theta,top1_phi,top1_r,top1_joint,top5_theta,top5_phi,top5_r,top5_joint
struct StepMetricsRow {
    int step = 0;
    double mae_m = 0.0;
    double top1_theta = 0.0, top1_phi = 0.0, top1_r = 0.0, top1_joint = 0.0;
    double top5_theta = 0.0, top5_phi = 0.0, top5_r = 0.0, top5_joint = 0.0;
};
void write_metrics_csv(const std::vector<StepMetricsRow>& rows, const std::string& path);
std::vector<StepMetricsRow> read_metrics_csv(const std::string& path);

}  // namespace nfbeam
