// SPDX-License-Identifier: Apache-2.0

#include "nfbeam/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nfbeam/dataset.hpp"
#include "nfbeam/model/gradsuite.hpp"
#include "nfbeam/model/train.hpp"
#include "nfbeam/parallel.hpp"

namespace nfbeam {

namespace {

struct ArrayFlags {
    int m_y = 64, m_z = 64;
    double f_c = 7e9;
    double spacing_wavelengths = 0.5;

    void attach(CLI::App* cmd) {
        cmd->add_option("--my", m_y, "antennas along y");
        cmd->add_option("--mz", m_z, "antennas along z");
        cmd->add_option("--fc", f_c, "carrier frequency, Hz");
        cmd->add_option("--spacing", spacing_wavelengths, "element spacing in wavelengths");
    }

    ArrayConfig build() const {
        const double lambda = kSpeedOfLight / f_c;
        return make_array_config(m_y, m_z, spacing_wavelengths * lambda,
                                 spacing_wavelengths * lambda, f_c);
    }
};

struct CodebookFlags {
    int n_angle = 20, n_dist = 10;
    double theta_min_deg = -60, theta_max_deg = 60;
    double phi_min_deg = -30, phi_max_deg = 60;
    double r_min = 10, r_max = 170;

    void attach(CLI::App* cmd) {
        cmd->add_option("--n-angle", n_angle, "angular samples per dimension (N)");
        cmd->add_option("--n-dist", n_dist, "distance samples (S)");
        cmd->add_option("--theta-min-deg", theta_min_deg, "azimuth range lower bound, degrees");
        cmd->add_option("--theta-max-deg", theta_max_deg, "azimuth range upper bound, degrees");
        cmd->add_option("--phi-min-deg", phi_min_deg, "elevation range lower bound, degrees");
        cmd->add_option("--phi-max-deg", phi_max_deg, "elevation range upper bound, degrees");
        cmd->add_option("--r-min", r_min, "distance range lower bound, meters");
        cmd->add_option("--r-max", r_max, "distance range upper bound, meters");
    }

    CoverageRanges ranges() const {
        return {deg_to_rad(theta_min_deg), deg_to_rad(theta_max_deg), deg_to_rad(phi_min_deg),
                deg_to_rad(phi_max_deg), r_min, r_max};
    }
};

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["d_model"] = cfg.d_model;
    j["heads"] = cfg.heads;
    j["backbone_layers"] = cfg.backbone_layers;
    j["t_prev"] = cfg.t_prev;
    j["t_pred"] = cfg.t_pred;
    j["top_k"] = cfg.top_k;
    j["gamma"] = cfg.gamma;
    j["lambda_loss"] = cfg.lambda_loss;
    j["n_angle"] = cfg.n_angle;
    j["n_dist"] = cfg.n_dist;
    j["point_feature_dim"] = cfg.point_feature_dim;
    j["task_mode_count"] = cfg.task_mode_count;
    j["lr"] = cfg.lr;
    j["batch_size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    j["detach_traj_for_beam"] = cfg.detach_traj_for_beam;
    j["ffn_mult"] = cfg.ffn_mult;
    j["bs_position"] = {cfg.bs_position.x, cfg.bs_position.y, cfg.bs_position.z};
    j["coverage_radius"] = cfg.coverage_radius;
    return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.d_model = j.at("d_model").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.backbone_layers = j.at("backbone_layers").get<int>();
    cfg.t_prev = j.at("t_prev").get<int>();
    cfg.t_pred = j.at("t_pred").get<int>();
    cfg.top_k = j.at("top_k").get<int>();
    cfg.gamma = j.at("gamma").get<double>();
    cfg.lambda_loss = j.at("lambda_loss").get<double>();
    cfg.n_angle = j.at("n_angle").get<int>();
    cfg.n_dist = j.at("n_dist").get<int>();
    cfg.point_feature_dim = j.at("point_feature_dim").get<int>();
    cfg.task_mode_count = j.at("task_mode_count").get<int>();
    cfg.lr = j.at("lr").get<double>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.detach_traj_for_beam = j.at("detach_traj_for_beam").get<bool>();
    cfg.ffn_mult = j.at("ffn_mult").get<int>();
    cfg.bs_position = {j.at("bs_position").at(0).get<double>(),
                       j.at("bs_position").at(1).get<double>(),
                       j.at("bs_position").at(2).get<double>()};
    cfg.coverage_radius = j.at("coverage_radius").get<double>();
    return cfg;
}

ModelConfig model_config_from_manifest(const DatasetManifest& m, const Scene& scene) {
    ModelConfig cfg;
    cfg.t_prev = m.t_prev;
    cfg.t_pred = m.t_pred;
    cfg.top_k = m.top_k;
    cfg.gamma = m.gamma;
    cfg.n_angle = m.n_angle;
    cfg.n_dist = m.n_dist;
    cfg.bs_position = scene.bs_position;
    cfg.coverage_radius = m.ranges.r_max;
    return cfg;
}

Scene default_empty_scene() {
    Scene scene;
    scene.bs_position = {0.0, 0.0, 20.0};
    return scene;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"near-field XL-MIMO beam management laboratory"};
    app.require_subcommand(1);

    unsigned default_threads = hardware_threads();
    bool deterministic = false;
    app.add_flag("--deterministic", deterministic, "single-threaded, bit-reproducible mode");

    // --- scene gen ---------------------------------------------------------
    auto* scene_cmd = app.add_subcommand("scene", "scene tools");
    scene_cmd->require_subcommand(1);
    auto* scene_gen = scene_cmd->add_subcommand("gen", "generate an urban scene");
    std::uint64_t scene_seed = 1;
    int buildings = 6;
    int scatterers_per_building = 4;
    std::string scene_out = "scene.json";
    scene_gen->add_option("--seed", scene_seed, "scene seed");
    scene_gen->add_option("--buildings", buildings, "building count");
    scene_gen->add_option("--scatterers-per-building", scatterers_per_building,
                          "scatterers per building");
    scene_gen->add_option("--out", scene_out, "output path");

    // --- dataset gen -------------------------------------------------------
    auto* dataset_cmd = app.add_subcommand("dataset", "dataset tools");
    dataset_cmd->require_subcommand(1);
    auto* dataset_gen = dataset_cmd->add_subcommand("gen", "generate a labeled dataset");
    std::string dg_scene;
    std::string dg_out = "dataset";
    std::uint64_t dg_seed = 1;
    int dg_train = 500, dg_val = 100, dg_test = 100;
    bool dg_paper_scale = false;
    double dg_sigma_gps = 0.5;
    int dg_tprev = 10, dg_tpred = 10, dg_points = 1024, dg_topk = 3;
    double dg_gamma = 0.5, dg_dt = 0.1;
    unsigned dg_threads = default_threads;
    ArrayFlags dg_array;
    CodebookFlags dg_codebook;
    dataset_gen->add_option("--scene", dg_scene, "scene JSON path (generated when omitted)");
    dataset_gen->add_option("--out", dg_out, "output directory");
    dataset_gen->add_option("--seed", dg_seed, "master seed");
    dataset_gen->add_option("--train", dg_train, "training sequences");
    dataset_gen->add_option("--val", dg_val, "validation sequences");
    dataset_gen->add_option("--test", dg_test, "test sequences");
    dataset_gen->add_flag("--paper-scale", dg_paper_scale, "use 12000/1500/1500 splits");
    dataset_gen->add_option("--sigma-gps", dg_sigma_gps, "GPS noise stddev, meters");
    dataset_gen->add_option("--t-prev", dg_tprev, "observed slots");
    dataset_gen->add_option("--t-pred", dg_tpred, "predicted slots");
    dataset_gen->add_option("--cloud-points", dg_points, "points per cloud (P)");
    dataset_gen->add_option("--top-k", dg_topk, "top-K beams per label");
    dataset_gen->add_option("--gamma", dg_gamma, "soft-target decay");
    dataset_gen->add_option("--dt", dg_dt, "slot interval, seconds");
    dataset_gen->add_option("--threads", dg_threads, "worker threads");
    dg_array.attach(dataset_gen);
    dg_codebook.attach(dataset_gen);

    // --- codebook export ---------------------------------------------------
    auto* codebook_cmd = app.add_subcommand("codebook", "codebook tools");
    codebook_cmd->require_subcommand(1);
    auto* codebook_export = codebook_cmd->add_subcommand("export", "write codebook to disk");
    std::string cb_out = "codebook.nfcb";
    unsigned cb_threads = default_threads;
    ArrayFlags cb_array;
    CodebookFlags cb_flags;
    codebook_export->add_option("--out", cb_out, "output path");
    codebook_export->add_option("--threads", cb_threads, "worker threads");
    cb_array.attach(codebook_export);
    cb_flags.attach(codebook_export);

    // --- sweep -------------------------------------------------------------
    auto* sweep_cmd = app.add_subcommand("sweep", "exhaustive beam sweep for one position");
    std::string sweep_scene;
    std::vector<double> sweep_pos{100.0, 0.0, 30.0};
    unsigned sweep_threads = default_threads;
    ArrayFlags sweep_array;
    CodebookFlags sweep_codebook;
    sweep_cmd->add_option("--scene", sweep_scene, "scene JSON path (empty scene when omitted)");
    sweep_cmd->add_option("--pos", sweep_pos, "UAV position x y z, meters")->expected(3);
    sweep_cmd->add_option("--threads", sweep_threads, "worker threads");
    sweep_array.attach(sweep_cmd);
    sweep_codebook.attach(sweep_cmd);

    // --- train -------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "train the predictor");
    std::string tr_data = "dataset";
    std::string tr_out = "model.nfck";
    std::string tr_log = "train_log.csv";
    int tr_epochs = 40;
    std::uint64_t tr_seed = 1;
    double tr_lr = 1e-3;
    int tr_batch = 16;
    bool tr_detach = false;
    bool tr_verbose = false;
    train_cmd->add_option("--data", tr_data, "dataset directory");
    train_cmd->add_option("--out", tr_out, "checkpoint output path");
    train_cmd->add_option("--log", tr_log, "training log CSV path");
    train_cmd->add_option("--epochs", tr_epochs, "training epochs");
    train_cmd->add_option("--seed", tr_seed, "training seed");
    train_cmd->add_option("--lr", tr_lr, "learning rate");
    train_cmd->add_option("--batch-size", tr_batch, "mini-batch size");
    train_cmd->add_flag("--detach-traj", tr_detach,
                        "stop beam-loss gradients at the predicted trajectory");
    train_cmd->add_flag("--verbose", tr_verbose, "per-epoch console output");

    // --- eval --------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a model or the baseline");
    std::string ev_data = "dataset";
    std::string ev_model;
    std::string ev_out = "metrics.csv";
    bool ev_baseline = false;
    eval_cmd->add_option("--data", ev_data, "dataset directory");
    eval_cmd->add_option("--model", ev_model, "checkpoint path (with .json sidecar)");
    eval_cmd->add_option("--out", ev_out, "metrics CSV path");
    eval_cmd->add_flag("--baseline", ev_baseline, "evaluate the constant-velocity baseline");

    // --- gradcheck ---------------------------------------------------------
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::uint64_t gc_seed = 7;
    grad_cmd->add_option("--seed", gc_seed, "suite seed");

    // --- bench-sweep -------------------------------------------------------
    auto* bench_cmd = app.add_subcommand("bench-sweep", "timed exhaustive sweep");
    unsigned bench_threads = default_threads;
    ArrayFlags bench_array;
    CodebookFlags bench_codebook;
    bench_cmd->add_option("--threads", bench_threads, "worker threads for the parallel pass");
    bench_array.attach(bench_cmd);
    bench_codebook.attach(bench_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        err << app.get_name() << ": run with --help for usage\n";
        return 2;
    }

    const unsigned threads_override = deterministic ? 1 : 0;
    auto pick_threads = [threads_override](unsigned requested) {
        return threads_override ? threads_override : std::max(1u, requested);
    };

    try {
        if (*scene_gen) {
            SceneGenParams params;
            params.building_count = buildings;
            params.scatterers_per_building = scatterers_per_building;
            const Scene scene = generate_scene(scene_seed, params);
            save_scene(scene, scene_out);
            out << "scene with " << scene.buildings.size() << " buildings and "
                << scene.scatterers.size() << " scatterers -> " << scene_out << "\n";
            return 0;
        }

        if (*dataset_gen) {
            Scene scene;
            if (dg_scene.empty()) {
                SceneGenParams params;
                scene = generate_scene(dg_seed, params);
            } else {
                scene = load_scene(dg_scene);
            }
            DatasetManifest cfg;
            cfg.m_y = dg_array.m_y;
            cfg.m_z = dg_array.m_z;
            const double lambda = kSpeedOfLight / dg_array.f_c;
            cfg.d_y = dg_array.spacing_wavelengths * lambda;
            cfg.d_z = dg_array.spacing_wavelengths * lambda;
            cfg.f_c = dg_array.f_c;
            cfg.n_angle = dg_codebook.n_angle;
            cfg.n_dist = dg_codebook.n_dist;
            cfg.ranges = dg_codebook.ranges();
            cfg.master_seed = dg_seed;
            cfg.train_count = dg_paper_scale ? 12000 : dg_train;
            cfg.val_count = dg_paper_scale ? 1500 : dg_val;
            cfg.test_count = dg_paper_scale ? 1500 : dg_test;
            cfg.sigma_gps = dg_sigma_gps;
            cfg.top_k = dg_topk;
            cfg.gamma = dg_gamma;
            cfg.dt = dg_dt;
            cfg.t_prev = dg_tprev;
            cfg.t_pred = dg_tpred;
            cfg.cloud_points = dg_points;

            const auto start = std::chrono::steady_clock::now();
            const Dataset ds = generate_dataset(scene, cfg, dg_out, pick_threads(dg_threads));
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            out << "dataset " << ds.manifest.train_count << "/" << ds.manifest.val_count << "/"
                << ds.manifest.test_count << " sequences -> " << dg_out << " (" << secs
                << " s)\n";
            return 0;
        }

        if (*codebook_export) {
            const ArrayConfig array = cb_array.build();
            const Codebook3D cb = build_codebook(array, cb_flags.n_angle, cb_flags.n_dist,
                                                 cb_flags.ranges(), pick_threads(cb_threads));
            export_codebook(cb, cb_out);
            out << "codebook " << cb.size() << " x " << cb.num_antennas() << " -> " << cb_out
                << "\n";
            return 0;
        }

        if (*sweep_cmd) {
            const Scene scene = sweep_scene.empty() ? default_empty_scene() : load_scene(sweep_scene);
            const ArrayConfig array = sweep_array.build();
            const Codebook3D cb =
                build_codebook(array, sweep_codebook.n_angle, sweep_codebook.n_dist,
                               sweep_codebook.ranges(), 1, /*materialize=*/false);
            const Vec3 uav{sweep_pos[0], sweep_pos[1], sweep_pos[2]};
            const auto paths = enumerate_paths(scene, uav, array.wavelength);
            const auto h = channel_vector(array, paths, scene, uav);
            const LinkParams link{calibrate_transmit_power(array), 1.0};
            const BeamLabel label =
                top_k_beams(h, cb, link, 1, pick_threads(sweep_threads));
            out << "paths " << paths.size() << ", best beam i_theta=" << label.optimal.i_theta
                << " i_phi=" << label.optimal.i_phi << " i_r=" << label.optimal.i_r
                << " flat=" << label.optimal.flat << " se=" << label.topk[0].se
                << " bits/s/Hz\n";
            return 0;
        }

        if (*train_cmd) {
            const Dataset ds = load_dataset(tr_data);
            ModelConfig cfg = model_config_from_manifest(ds.manifest, ds.scene);
            cfg.seed = tr_seed;
            cfg.lr = tr_lr;
            cfg.batch_size = tr_batch;
            cfg.detach_traj_for_beam = tr_detach;

            Predictor<float> model(cfg);
            TrainOptions opt;
            opt.epochs = tr_epochs;
            opt.log_csv = tr_log;
            opt.checkpoint = tr_out;
            opt.verbose = tr_verbose;
            const TrainResult result = train_model(model, ds.train, ds.val, ds.manifest, opt);

            std::ofstream sidecar(tr_out + ".json");
            sidecar << model_config_to_json(cfg).dump(2) << "\n";
            out << "trained " << tr_epochs << " epochs, best val joint top-1 "
                << result.best_val_top1 << " at epoch " << result.best_epoch << " -> " << tr_out
                << "\n";
            return 0;
        }

        if (*eval_cmd) {
            const Dataset ds = load_dataset(ev_data);
            EvalResult res;
            if (ev_baseline) {
                const Codebook3D grids =
                    build_codebook(ds.manifest.array_config(), ds.manifest.n_angle,
                                   ds.manifest.n_dist, ds.manifest.ranges, 1, false);
                res = evaluate_baseline(ds.test, ds.manifest, grids, ds.scene.bs_position);
            } else {
                if (ev_model.empty()) throw std::runtime_error("eval: --model or --baseline required");
                std::ifstream sidecar(ev_model + ".json");
                if (!sidecar) throw std::runtime_error("eval: missing config sidecar " + ev_model + ".json");
                std::stringstream ss;
                ss << sidecar.rdbuf();
                ModelConfig cfg = model_config_from_json(nlohmann::json::parse(ss.str()));
                Predictor<float> model(cfg);
                nn::load_checkpoint(model.params(), ev_model);
                res = evaluate_model(model, ds.test, ds.manifest);
            }
            write_metrics_csv(res.steps, ev_out);
            out << (ev_baseline ? "baseline" : "model") << " test MAE " << res.mae
                << " m, joint top-1 " << res.top1_joint << ", joint top-5 " << res.top5_joint
                << " -> " << ev_out << "\n";
            return 0;
        }

        if (*grad_cmd) {
            const bool ok = run_gradient_suite(gc_seed, out);
            return ok ? 0 : 1;
        }

        if (*bench_cmd) {
            const ArrayConfig array = bench_array.build();
            const Codebook3D cb =
                build_codebook(array, bench_codebook.n_angle, bench_codebook.n_dist,
                               bench_codebook.ranges(), 1, /*materialize=*/false);
            Scene scene = default_empty_scene();
            const Vec3 uav = scene.bs_position + focal_to_cart({0.1, 0.2, 80.0});
            const auto h =
                channel_vector(array, enumerate_paths(scene, uav, array.wavelength), scene, uav);
            const LinkParams link{calibrate_transmit_power(array), 1.0};

            auto timed = [&](unsigned threads) {
                const auto start = std::chrono::steady_clock::now();
                const auto snrs = sweep_snrs(h, cb, link, threads);
                const double secs =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                        .count();
                int best = 0;
                for (int i = 1; i < static_cast<int>(snrs.size()); ++i) {
                    if (snrs[static_cast<std::size_t>(i)] > snrs[static_cast<std::size_t>(best)])
                        best = i;
                }
                return std::pair<double, int>(secs, best);
            };
            const auto [single_s, best_single] = timed(1);
            const unsigned par = pick_threads(bench_threads);
            const auto [par_s, best_par] = timed(par);
            out << "sweep " << cb.size() << " codewords x " << cb.num_antennas()
                << " antennas (steering generated on the fly)\n";
            out << "  single-threaded " << single_s << " s\n";
            out << "  " << par << " threads     " << par_s << " s\n";
            out << "  best flat index " << best_single << (best_single == best_par ? "" : " MISMATCH")
                << "\n";
            return best_single == best_par ? 0 : 1;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace nfbeam
