// SPDX-License-Identifier: Apache-2.0

#include "nfbeam/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "nfbeam/binio.hpp"
#include "nfbeam/parallel.hpp"

namespace nfbeam {

namespace {

template <class T>
void write_sized_array(std::ostream& out, const std::vector<T>& v) {
    write_pod(out, static_cast<std::uint64_t>(v.size()));
    write_array(out, v);
}

template <class T>
void read_sized_array(std::istream& in, std::vector<T>& v, const char* what) {
    const auto n = read_pod<std::uint64_t>(in, what);
    read_array(in, v, static_cast<std::size_t>(n), what);
}

std::string record_to_bytes(const SequenceRecord& r) {
    std::ostringstream os(std::ios::binary);
    write_pod(os, r.id);
    write_pod(os, r.mode);
    write_sized_array(os, r.positions);
    write_sized_array(os, r.gps);
    write_sized_array(os, r.cloud);
    write_sized_array(os, r.optimal_flat);
    write_sized_array(os, r.topk_flat);
    write_sized_array(os, r.topk_se);
    write_sized_array(os, r.soft_theta);
    write_sized_array(os, r.soft_phi);
    write_sized_array(os, r.soft_r);
    return os.str();
}

SequenceRecord record_from_stream(std::istream& in) {
    SequenceRecord r;
    r.id = read_pod<std::uint64_t>(in, "record id");
    r.mode = read_pod<std::uint32_t>(in, "record mode");
    read_sized_array(in, r.positions, "positions");
    read_sized_array(in, r.gps, "gps");
    read_sized_array(in, r.cloud, "cloud");
    read_sized_array(in, r.optimal_flat, "optimal beams");
    read_sized_array(in, r.topk_flat, "topk beams");
    read_sized_array(in, r.topk_se, "topk SE");
    read_sized_array(in, r.soft_theta, "soft theta");
    read_sized_array(in, r.soft_phi, "soft phi");
    read_sized_array(in, r.soft_r, "soft r");
    return r;
}

}  // namespace

void write_records(const std::vector<SequenceRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("dataset: cannot open " + path + " for writing");
    write_magic(out, kDatasetMagic);
    write_pod(out, kDatasetVersion);
    write_pod(out, static_cast<std::uint64_t>(records.size()));
    for (const auto& r : records) {
        const std::string bytes = record_to_bytes(r);
        write_pod(out, static_cast<std::uint64_t>(bytes.size()));
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    if (!out) throw std::runtime_error("dataset: write failed for " + path);
}

std::vector<SequenceRecord> read_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("dataset: cannot open " + path);
    check_magic(in, kDatasetMagic, "dataset");
    const auto version = read_pod<std::uint32_t>(in, "dataset version");
    if (version != kDatasetVersion) {
        throw std::runtime_error("dataset: unsupported version " + std::to_string(version));
    }
    const auto count = read_pod<std::uint64_t>(in, "dataset record count");
    std::vector<SequenceRecord> records;
    records.reserve(static_cast<std::size_t>(count));
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = read_pod<std::uint64_t>(in, "record length");
        std::string bytes(static_cast<std::size_t>(len), '\0');
        in.read(bytes.data(), static_cast<std::streamsize>(len));
        if (!in) throw TruncatedFileError("truncated record payload");
        std::istringstream rs(bytes, std::ios::binary);
        records.push_back(record_from_stream(rs));
    }
    return records;
}

std::string manifest_to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["version"] = m.version;
    j["scene_file"] = m.scene_file;
    j["array"] = {{"m_y", m.m_y}, {"m_z", m.m_z}, {"d_y", m.d_y}, {"d_z", m.d_z}, {"f_c", m.f_c}};
    j["codebook"] = {{"n_angle", m.n_angle},
                     {"n_dist", m.n_dist},
                     {"theta_min", m.ranges.theta_min},
                     {"theta_max", m.ranges.theta_max},
                     {"phi_min", m.ranges.phi_min},
                     {"phi_max", m.ranges.phi_max},
                     {"r_min", m.ranges.r_min},
                     {"r_max", m.ranges.r_max}};
    j["master_seed"] = m.master_seed;
    j["splits"] = {{"train", m.train_count}, {"val", m.val_count}, {"test", m.test_count}};
    j["sigma_gps"] = m.sigma_gps;
    j["top_k"] = m.top_k;
    j["gamma"] = m.gamma;
    j["dt"] = m.dt;
    j["t_prev"] = m.t_prev;
    j["t_pred"] = m.t_pred;
    j["cloud_points"] = m.cloud_points;
    j["p_r"] = m.p_r;
    j["sigma2"] = m.sigma2;
    return j.dump(2);
}

DatasetManifest manifest_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    DatasetManifest m;
    m.version = j.at("version").get<std::uint32_t>();
    if (m.version != kDatasetVersion) {
        throw std::runtime_error("manifest: unsupported version " + std::to_string(m.version));
    }
    m.scene_file = j.at("scene_file").get<std::string>();
    const auto& a = j.at("array");
    m.m_y = a.at("m_y").get<int>();
    m.m_z = a.at("m_z").get<int>();
    m.d_y = a.at("d_y").get<double>();
    m.d_z = a.at("d_z").get<double>();
    m.f_c = a.at("f_c").get<double>();
    const auto& c = j.at("codebook");
    m.n_angle = c.at("n_angle").get<int>();
    m.n_dist = c.at("n_dist").get<int>();
    m.ranges.theta_min = c.at("theta_min").get<double>();
    m.ranges.theta_max = c.at("theta_max").get<double>();
    m.ranges.phi_min = c.at("phi_min").get<double>();
    m.ranges.phi_max = c.at("phi_max").get<double>();
    m.ranges.r_min = c.at("r_min").get<double>();
    m.ranges.r_max = c.at("r_max").get<double>();
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    const auto& s = j.at("splits");
    m.train_count = s.at("train").get<int>();
    m.val_count = s.at("val").get<int>();
    m.test_count = s.at("test").get<int>();
    m.sigma_gps = j.at("sigma_gps").get<double>();
    m.top_k = j.at("top_k").get<int>();
    m.gamma = j.at("gamma").get<double>();
    m.dt = j.at("dt").get<double>();
    m.t_prev = j.at("t_prev").get<int>();
    m.t_pred = j.at("t_pred").get<int>();
    m.cloud_points = j.at("cloud_points").get<int>();
    m.p_r = j.at("p_r").get<double>();
    m.sigma2 = j.at("sigma2").get<double>();
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot open " + path + " for writing");
    out << manifest_to_json(m) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return manifest_from_json(ss.str());
}

void validate_records(const std::vector<SequenceRecord>& records, const DatasetManifest& m,
                      int expected_count) {
    if (static_cast<int>(records.size()) != expected_count) {
        throw std::runtime_error("dataset: record count " + std::to_string(records.size()) +
                                 " does not match manifest " + std::to_string(expected_count));
    }
    const std::size_t t = static_cast<std::size_t>(m.total_slots());
    const std::size_t p = static_cast<std::size_t>(m.cloud_points);
    const std::size_t k = static_cast<std::size_t>(m.top_k);
    const std::uint32_t flat_limit =
        static_cast<std::uint32_t>(m.n_angle * m.n_angle * m.n_dist);
    for (const auto& r : records) {
        const bool ok = r.positions.size() == t * 3 && r.gps.size() == t * 3 &&
                        r.cloud.size() == p * 3 && r.optimal_flat.size() == t &&
                        r.topk_flat.size() == t * k && r.topk_se.size() == t * k &&
                        r.soft_theta.size() == t * static_cast<std::size_t>(m.n_angle) &&
                        r.soft_phi.size() == t * static_cast<std::size_t>(m.n_angle) &&
                        r.soft_r.size() == t * static_cast<std::size_t>(m.n_dist);
        if (!ok) {
            throw std::runtime_error("dataset: record " + std::to_string(r.id) +
                                     " shape inconsistent with manifest");
        }
        for (const auto f : r.optimal_flat) {
            if (f >= flat_limit) {
                throw std::runtime_error("dataset: flat beam index out of range in record " +
                                         std::to_string(r.id));
            }
        }
        for (const auto f : r.topk_flat) {
            if (f >= flat_limit) {
                throw std::runtime_error("dataset: flat beam index out of range in record " +
                                         std::to_string(r.id));
            }
        }
        if (r.mode >= kTaskModeCount) {
            throw std::runtime_error("dataset: task mode out of range in record " +
                                     std::to_string(r.id));
        }
    }
}

namespace {

// Builds one labeled sequence; throws NoSignalError when some slot has a
// dead channel so the caller can retry with a fresh seed.
SequenceRecord build_sequence(std::uint64_t id, std::uint64_t seq_seed, const Scene& scene,
                              const DatasetManifest& cfg, const ArrayConfig& array,
                              const PackedCodebook& packed) {
    Rng seq_rng(mix64(seq_seed));
    const int mode = static_cast<int>(seq_rng.uniform_int(0, kTaskModeCount - 1));
    const int total = cfg.total_slots();

    TrajectoryParams tp;
    tp.t_prev = cfg.t_prev;
    tp.t_pred = cfg.t_pred;
    tp.dt = cfg.dt;
    tp.sigma_gps = cfg.sigma_gps;
    tp.cloud_points = cfg.cloud_points;

    const auto positions = generate_trajectory(scene, cfg.ranges, mode, total, cfg.dt,
                                               mix64(seq_seed ^ 0x1), tp);
    const auto gps = add_gps_noise(positions, cfg.sigma_gps, mix64(seq_seed ^ 0x2));
    const auto cloud = sample_point_cloud(scene, cfg.cloud_points, mix64(seq_seed ^ 0x3));

    SequenceRecord rec;
    rec.id = id;
    rec.mode = static_cast<std::uint32_t>(mode);
    rec.positions.reserve(static_cast<std::size_t>(total) * 3);
    rec.gps.reserve(static_cast<std::size_t>(total) * 3);
    for (int t = 0; t < total; ++t) {
        rec.positions.push_back(static_cast<float>(positions[static_cast<std::size_t>(t)].x));
        rec.positions.push_back(static_cast<float>(positions[static_cast<std::size_t>(t)].y));
        rec.positions.push_back(static_cast<float>(positions[static_cast<std::size_t>(t)].z));
        rec.gps.push_back(static_cast<float>(gps[static_cast<std::size_t>(t)].x));
        rec.gps.push_back(static_cast<float>(gps[static_cast<std::size_t>(t)].y));
        rec.gps.push_back(static_cast<float>(gps[static_cast<std::size_t>(t)].z));
    }
    rec.cloud.reserve(cloud.size() * 3);
    for (const Vec3& p : cloud) {
        rec.cloud.push_back(static_cast<float>(p.x));
        rec.cloud.push_back(static_cast<float>(p.y));
        rec.cloud.push_back(static_cast<float>(p.z));
    }

    const LinkParams link{cfg.p_r, cfg.sigma2};
    for (int t = 0; t < total; ++t) {
        const Vec3 uav = positions[static_cast<std::size_t>(t)];
        const auto paths = enumerate_paths(scene, uav, array.wavelength);
        const auto h = channel_vector(array, paths, scene, uav);
        const BeamLabel label = packed.top_k(h, link, cfg.top_k);  // throws NoSignalError
        rec.optimal_flat.push_back(static_cast<std::uint32_t>(label.optimal.flat));
        for (const auto& sb : label.topk) {
            rec.topk_flat.push_back(static_cast<std::uint32_t>(sb.index.flat));
            rec.topk_se.push_back(static_cast<float>(sb.se));
        }
        const SoftTarget st = soft_targets(label, cfg.gamma, cfg.n_angle, cfg.n_dist);
        for (double v : st.theta) rec.soft_theta.push_back(static_cast<float>(v));
        for (double v : st.phi) rec.soft_phi.push_back(static_cast<float>(v));
        for (double v : st.r) rec.soft_r.push_back(static_cast<float>(v));
    }
    return rec;
}

}  // namespace

Dataset generate_dataset(const Scene& scene, const DatasetManifest& config,
                         const std::string& out_dir, unsigned threads) {
    DatasetManifest manifest = config;
    const ArrayConfig array = manifest.array_config();
    // Calibrate the operating point once per generation run.
    manifest.p_r = calibrate_transmit_power(array, 20.0, 100.0, manifest.sigma2);

    const Codebook3D grids = build_codebook(array, manifest.n_angle, manifest.n_dist,
                                            manifest.ranges, threads, /*materialize=*/false);
    const PackedCodebook packed(array, grids, threads);

    const int total_sequences = manifest.train_count + manifest.val_count + manifest.test_count;
    std::vector<SequenceRecord> records(static_cast<std::size_t>(total_sequences));
    std::string failure;
    std::mutex failure_mutex;
    parallel_for(static_cast<std::size_t>(total_sequences), threads,
                 [&](std::size_t begin, std::size_t end) {
                     for (std::size_t i = begin; i < end; ++i) {
                         const std::uint64_t id = static_cast<std::uint64_t>(i);
                         bool done = false;
                         for (std::uint64_t attempt = 0; attempt < 64 && !done; ++attempt) {
                             const std::uint64_t seq_seed =
                                 mix64(manifest.master_seed ^ id) + attempt;
                             try {
                                 records[i] = build_sequence(id, seq_seed, scene, manifest,
                                                             array, packed);
                                 done = true;
                             } catch (const NoSignalError&) {
                                 // fully blocked slot; retry with bumped seed
                             }
                         }
                         if (!done) {
                             std::lock_guard<std::mutex> lock(failure_mutex);
                             if (failure.empty()) {
                                 failure = "dataset: sequence " + std::to_string(id) +
                                           ": no signal after 64 attempts";
                             }
                         }
                     }
                 });
    if (!failure.empty()) throw std::runtime_error(failure);

    Dataset ds;
    ds.manifest = manifest;
    ds.scene = scene;
    auto take = [&records](int begin, int count) {
        return std::vector<SequenceRecord>(records.begin() + begin,
                                           records.begin() + begin + count);
    };
    ds.train = take(0, manifest.train_count);
    ds.val = take(manifest.train_count, manifest.val_count);
    ds.test = take(manifest.train_count + manifest.val_count, manifest.test_count);

    std::filesystem::create_directories(out_dir);
    const auto dir = std::filesystem::path(out_dir);
    ds.manifest.scene_file = "scene.json";
    save_scene(scene, (dir / "scene.json").string());
    write_records(ds.train, (dir / "train.nftl").string());
    write_records(ds.val, (dir / "val.nftl").string());
    write_records(ds.test, (dir / "test.nftl").string());
    save_manifest(ds.manifest, (dir / "manifest.json").string());
    return ds;
}

Dataset load_dataset(const std::string& dir) {
    const auto path = std::filesystem::path(dir);
    Dataset ds;
    ds.manifest = load_manifest((path / "manifest.json").string());
    ds.scene = load_scene((path / ds.manifest.scene_file).string());
    ds.train = read_records((path / "train.nftl").string());
    ds.val = read_records((path / "val.nftl").string());
    ds.test = read_records((path / "test.nftl").string());
    validate_records(ds.train, ds.manifest, ds.manifest.train_count);
    validate_records(ds.val, ds.manifest, ds.manifest.val_count);
    validate_records(ds.test, ds.manifest, ds.manifest.test_count);
    return ds;
}

void export_codebook(const Codebook3D& cb, const std::string& path) {
    if (!cb.materialized()) {
        throw std::invalid_argument("codebook export: codebook is not materialized");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("codebook export: cannot open " + path);
    const char magic[4] = {'N', 'F', 'C', 'B'};
    write_magic(out, magic);
    write_pod(out, static_cast<std::uint32_t>(1));
    write_pod(out, static_cast<std::uint32_t>(cb.n_angle));
    write_pod(out, static_cast<std::uint32_t>(cb.n_dist));
    write_pod(out, static_cast<std::uint32_t>(cb.num_antennas()));
    for (double v : {cb.ranges.theta_min, cb.ranges.theta_max, cb.ranges.phi_min,
                     cb.ranges.phi_max, cb.ranges.r_min, cb.ranges.r_max}) {
        write_pod(out, v);
    }
    write_array(out, cb.theta_grid);
    write_array(out, cb.phi_grid);
    write_array(out, cb.r_grid);
    std::vector<float> packed;
    packed.reserve(cb.vectors.size() * 2);
    for (const auto& v : cb.vectors) {
        packed.push_back(static_cast<float>(v.real()));
        packed.push_back(static_cast<float>(v.imag()));
    }
    write_array(out, packed);
    if (!out) throw std::runtime_error("codebook export: write failed");
}

void write_metrics_csv(const std::vector<StepMetricsRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("metrics: cannot open " + path + " for writing");
    out << "step,mae_m,top1_theta,top1_phi,top1_r,top1_joint,top5_theta,top5_phi,top5_r,top5_"
           "joint\n";
    out.precision(17);
    for (const auto& r : rows) {
        out << r.step << ',' << r.mae_m << ',' << r.top1_theta << ',' << r.top1_phi << ','
            << r.top1_r << ',' << r.top1_joint << ',' << r.top5_theta << ',' << r.top5_phi << ','
            << r.top5_r << ',' << r.top5_joint << '\n';
    }
}

std::vector<StepMetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("metrics: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("metrics: empty file");
    std::vector<StepMetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        StepMetricsRow r;
        char comma;
        ls >> r.step >> comma >> r.mae_m >> comma >> r.top1_theta >> comma >> r.top1_phi >>
            comma >> r.top1_r >> comma >> r.top1_joint >> comma >> r.top5_theta >> comma >>
            r.top5_phi >> comma >> r.top5_r >> comma >> r.top5_joint;
        if (ls.fail()) throw std::runtime_error("metrics: malformed row: " + line);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace nfbeam
