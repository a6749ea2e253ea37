// SPDX-License-Identifier: Apache-2.0

#include "nfbeam/scene_channel.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nfbeam/rng.hpp"

namespace nfbeam {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Offset used to lift a scatterer off its host face for blockage tests.
constexpr double kSurfaceEps = 1e-6;

struct Face {
    Vec3 center;
    Vec3 normal;
    Vec3 u_axis;  // in-plane axes with half extents
    Vec3 v_axis;
    double half_u = 0.0;
    double half_v = 0.0;
    int id = 0;
};

// The five candidate faces of a building (bottom excluded).
std::array<Face, 5> box_faces(const Aabb& b) {
    const Vec3 c = b.center();
    const double hx = (b.hi.x - b.lo.x) / 2;
    const double hy = (b.hi.y - b.lo.y) / 2;
    const double hz = (b.hi.z - b.lo.z) / 2;
    return {{
        {{b.hi.x, c.y, c.z}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, hy, hz, 0},
        {{b.lo.x, c.y, c.z}, {-1, 0, 0}, {0, 1, 0}, {0, 0, 1}, hy, hz, 1},
        {{c.x, b.hi.y, c.z}, {0, 1, 0}, {1, 0, 0}, {0, 0, 1}, hx, hz, 2},
        {{c.x, b.lo.y, c.z}, {0, -1, 0}, {1, 0, 0}, {0, 0, 1}, hx, hz, 3},
        {{c.x, c.y, b.hi.z}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}, hx, hy, 4},
    }};
}

std::vector<Face> visible_faces(const Aabb& b, const Vec3& bs) {
    std::vector<Face> out;
    for (const Face& f : box_faces(b)) {
        if (f.normal.dot(bs - f.center) > 0.0) out.push_back(f);
    }
    return out;
}

bool segment_blocked(const Scene& scene, const Vec3& a, const Vec3& b) {
    for (const Aabb& box : scene.buildings) {
        if (segment_intersects_box(a, b, box)) return true;
    }
    return false;
}

Vec3 scatterer_probe_point(const Scene& scene, const Scatterer& s) {
    // Lift the point off the host face so the host box never occludes it.
    if (s.building >= 0 && s.building < static_cast<int>(scene.buildings.size()) && s.face >= 0) {
        const auto faces = box_faces(scene.buildings[static_cast<std::size_t>(s.building)]);
        return s.position + faces[static_cast<std::size_t>(s.face)].normal * kSurfaceEps;
    }
    return s.position;
}

}  // namespace

Scene generate_scene(std::uint64_t seed, const SceneGenParams& params) {
    if (params.building_count < 0) throw std::invalid_argument("scene: building_count < 0");
    Scene scene;
    scene.seed = seed;
    scene.bs_position = params.bs_position;
    scene.region_min = params.region_min;
    scene.region_max = params.region_max;

    Rng rng(mix64(seed));
    for (int i = 0; i < params.building_count; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
            const double wx = rng.uniform(params.footprint_min, params.footprint_max);
            const double wy = rng.uniform(params.footprint_min, params.footprint_max);
            const double h = rng.uniform(params.height_min, params.height_max);
            const double x0 = rng.uniform(params.region_min.x, params.region_max.x - wx);
            const double y0 = rng.uniform(params.region_min.y, params.region_max.y - wy);
            const Aabb box{{x0, y0, 0.0}, {x0 + wx, y0 + wy, h}};

            if (box.contains(scene.bs_position)) continue;
            const double dx = std::max({box.lo.x - scene.bs_position.x,
                                        scene.bs_position.x - box.hi.x, 0.0});
            const double dy = std::max({box.lo.y - scene.bs_position.y,
                                        scene.bs_position.y - box.hi.y, 0.0});
            if (std::hypot(dx, dy) < params.bs_clearance) continue;
            bool overlap = false;
            for (const Aabb& other : scene.buildings) {
                if (box.overlaps(other)) {
                    overlap = true;
                    break;
                }
            }
            if (overlap) continue;
            scene.buildings.push_back(box);
            placed = true;
            break;
        }
        if (!placed) {
            throw std::runtime_error("scene: no feasible building placement after " +
                                     std::to_string(params.max_attempts) + " attempts");
        }
    }

    for (std::size_t bi = 0; bi < scene.buildings.size(); ++bi) {
        const auto faces = visible_faces(scene.buildings[bi], scene.bs_position);
        if (faces.empty()) continue;
        for (int k = 0; k < params.scatterers_per_building; ++k) {
            const Face& f = faces[static_cast<std::size_t>(k) % faces.size()];
            Vec3 pos = f.center;
            if (static_cast<std::size_t>(k) >= faces.size()) {
                pos = f.center + f.u_axis * rng.uniform(-f.half_u, f.half_u) +
                      f.v_axis * rng.uniform(-f.half_v, f.half_v);
            }
            Scatterer s;
            s.position = pos;
            s.reflection = rng.uniform(params.reflection_min, params.reflection_max);
            s.building = static_cast<int>(bi);
            s.face = f.id;
            scene.scatterers.push_back(s);
        }
    }
    return scene;
}

PathSet enumerate_paths(const Scene& scene, const Vec3& uav, double wavelength) {
    if (wavelength <= 0.0) throw std::invalid_argument("enumerate_paths: wavelength <= 0");
    for (const Aabb& box : scene.buildings) {
        if (box.contains_strict(uav)) {
            throw std::domain_error("enumerate_paths: UAV position is inside a building");
        }
    }
    PathSet paths;
    const double amp_scale = wavelength / (4.0 * kPi);

    if (!segment_blocked(scene, scene.bs_position, uav)) {
        PropagationPath p;
        p.type = PathType::kLos;
        p.reference_distance = distance(uav, scene.bs_position);
        p.amplitude = {amp_scale / p.reference_distance, 0.0};
        paths.push_back(p);
    }
    for (std::size_t si = 0; si < scene.scatterers.size(); ++si) {
        const Scatterer& s = scene.scatterers[si];
        const Vec3 probe = scatterer_probe_point(scene, s);
        if (segment_blocked(scene, scene.bs_position, probe)) continue;
        if (segment_blocked(scene, probe, uav)) continue;
        PropagationPath p;
        p.type = PathType::kBounce;
        p.scatterer = static_cast<int>(si);
        p.reference_distance =
            distance(s.position, scene.bs_position) + distance(uav, s.position);
        p.amplitude = {s.reflection * amp_scale / p.reference_distance, 0.0};
        paths.push_back(p);
    }
    return paths;
}

ChannelVector channel_vector(const ArrayConfig& cfg, const PathSet& paths, const Scene& scene,
                             const Vec3& uav) {
    const auto antennas = antenna_positions(cfg);
    ChannelVector ch;
    ch.h.assign(antennas.size(), {0.0, 0.0});
    const double k = cfg.wavenumber;

    for (const PropagationPath& p : paths) {
        const std::complex<double> a = p.amplitude;
        if (p.type == PathType::kLos) {
            const Vec3 rel = uav - scene.bs_position;
            for (std::size_t m = 0; m < antennas.size(); ++m) {
                const double rm = distance(rel, antennas[m]);
                const double phase = -k * rm;
                ch.h[m] += a * std::complex<double>(std::cos(phase), std::sin(phase));
            }
        } else {
            const Scatterer& s = scene.scatterers[static_cast<std::size_t>(p.scatterer)];
            const Vec3 rel = s.position - scene.bs_position;
            const double hop = distance(uav, s.position);
            for (std::size_t m = 0; m < antennas.size(); ++m) {
                const double rm = distance(rel, antennas[m]) + hop;
                const double phase = -k * rm;
                ch.h[m] += a * std::complex<double>(std::cos(phase), std::sin(phase));
            }
        }
    }
    return ch;
}

double beamformed_snr(std::span<const std::complex<double>> w, const ChannelVector& h,
                      const LinkParams& link) {
    if (w.size() != h.h.size()) {
        std::ostringstream os;
        os << "beamformed_snr: dimension mismatch, |w|=" << w.size() << " |h|=" << h.h.size();
        throw std::invalid_argument(os.str());
    }
    double re = 0.0, im = 0.0;
    for (std::size_t m = 0; m < w.size(); ++m) {
        // conj(w_m) * h_m
        re += w[m].real() * h.h[m].real() + w[m].imag() * h.h[m].imag();
        im += w[m].real() * h.h[m].imag() - w[m].imag() * h.h[m].real();
    }
    return link.p_r * (re * re + im * im) / link.sigma2;
}

double spectral_efficiency(double snr) {
    if (snr < 0.0) throw std::domain_error("spectral_efficiency: negative SNR");
    return std::log2(1.0 + snr);
}

double calibrate_transmit_power(const ArrayConfig& cfg, double target_snr_db,
                                double reference_distance, double sigma2) {
    const double snr = std::pow(10.0, target_snr_db / 10.0);
    const double matched_gain =
        cfg.total_antennas() * cfg.wavelength / (4.0 * kPi * reference_distance);
    return snr * sigma2 / (matched_gain * matched_gain);
}

std::string scene_to_json(const Scene& scene) {
    nlohmann::json j;
    j["version"] = 1;
    j["seed"] = scene.seed;
    j["bs_position"] = {scene.bs_position.x, scene.bs_position.y, scene.bs_position.z};
    j["region_min"] = {scene.region_min.x, scene.region_min.y, scene.region_min.z};
    j["region_max"] = {scene.region_max.x, scene.region_max.y, scene.region_max.z};
    j["boxes"] = nlohmann::json::array();
    for (const Aabb& b : scene.buildings) {
        j["boxes"].push_back({{"min", {b.lo.x, b.lo.y, b.lo.z}}, {"max", {b.hi.x, b.hi.y, b.hi.z}}});
    }
    j["scatterers"] = nlohmann::json::array();
    for (const Scatterer& s : scene.scatterers) {
        j["scatterers"].push_back({{"position", {s.position.x, s.position.y, s.position.z}},
                                   {"reflection", s.reflection},
                                   {"building", s.building},
                                   {"face", s.face}});
    }
    return j.dump(2);
}

static Vec3 vec3_from_json(const nlohmann::json& a) {
    return {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
}

Scene scene_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1) {
        throw std::runtime_error("scene: unsupported schema version");
    }
    Scene scene;
    scene.seed = j.at("seed").get<std::uint64_t>();
    scene.bs_position = vec3_from_json(j.at("bs_position"));
    scene.region_min = vec3_from_json(j.at("region_min"));
    scene.region_max = vec3_from_json(j.at("region_max"));
    for (const auto& b : j.at("boxes")) {
        Aabb box{vec3_from_json(b.at("min")), vec3_from_json(b.at("max"))};
        if (!box.valid()) throw std::runtime_error("scene: degenerate box");
        scene.buildings.push_back(box);
    }
    for (const auto& sj : j.at("scatterers")) {
        Scatterer s;
        s.position = vec3_from_json(sj.at("position"));
        s.reflection = sj.at("reflection").get<double>();
        s.building = sj.at("building").get<int>();
        s.face = sj.at("face").get<int>();
        if (s.reflection <= 0.0 || s.reflection > 1.0) {
            throw std::runtime_error("scene: reflection coefficient out of (0, 1]");
        }
        scene.scatterers.push_back(s);
    }
    return scene;
}

void save_scene(const Scene& scene, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("scene: cannot open " + path + " for writing");
    out << scene_to_json(scene) << "\n";
}

Scene load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("scene: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return scene_from_json(ss.str());
}

}  // namespace nfbeam
