#include "occgrasp/bench.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "occgrasp/completion.hpp"
#include "occgrasp/error.hpp"
#include "occgrasp/losses.hpp"
#include "occgrasp/parallel.hpp"
#include "occgrasp/random.hpp"

namespace occgrasp {
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kRandomSceneSalt = 0x6e3a0101;
constexpr std::uint64_t kTargetedSalt = 0x6e3a0102;
constexpr std::uint64_t kLabelSalt = 0x6e3a0103;
constexpr std::uint64_t kBalanceSalt = 0x6e3a0104;
constexpr std::uint64_t kNoiseSalt = 0x6e3a0105;
constexpr std::uint64_t kRandomPolicySalt = 0x6e3a0106;

constexpr int kRandomChunk = 16;
constexpr int kTargetedRound = 4;  // attempts per unfilled bin per round
constexpr int kOffsetSteps = 9;

const char* kFrameStem = "cluttered";

std::string pad(int v, int width) {
    std::string s = std::to_string(v);
    return std::string(width > static_cast<int>(s.size()) ? width - s.size() : 0, '0') + s;
}

std::string sample_id(const std::string& scene_id, int target) { return scene_id + "_t" + std::to_string(target); }

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

nlohmann::json occlusion_to_json(const OcclusionRecord& r) {
    return {{"level", r.level}, {"bin", r.bin_index}, {"visible", r.visible_pixels}, {"total", r.total_pixels}};
}

OcclusionRecord occlusion_from_json(const nlohmann::json& j) {
    OcclusionRecord r;
    r.level = j.at("level").get<double>();
    r.bin_index = j.at("bin").get<int>();
    r.visible_pixels = j.at("visible").get<std::size_t>();
    r.total_pixels = j.at("total").get<std::size_t>();
    return r;
}

// Occlusion of instance k; `cluttered` may already hold the full render.
std::optional<OcclusionRecord> measure(const Scene& scene, int k, const CameraModel& camera,
                                       const DepthFrame* cluttered) {
    const PixelRegion region = projected_region(scene, k, camera);
    if (region.empty()) return std::nullopt;
    const DepthFrame single = render(derive_single_scene(scene, k), camera, region);
    try {
        if (cluttered) return occlusion_level(single, *cluttered, scene.instances[k].id);
        return occlusion_level(single, render(scene, camera, region), scene.instances[k].id);
    } catch (const MeasurementError&) {
        return std::nullopt;
    }
}

bool inside_workspace_xy(const ObjectInstance& inst, double extent) {
    const Aabb b = inst.world_bounds();
    return b.min.x() >= 0 && b.min.y() >= 0 && b.max.x() <= extent && b.max.y() <= extent;
}

// Adds `count` more instances by rejection; fewer when the table is full.
void fill_random(Scene& scene, const Catalog& catalog, int count, Rng& rng, double min_gap) {
    const double extent = scene.workspace_extent;
    for (int i = 0; i < count; ++i) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            const auto& entry = catalog.at(static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(catalog.size()) - 1)));
            const double yaw = uniform(rng, 0.0, 2.0 * std::numbers::pi);
            auto cand = make_instance(entry, upright_pose(uniform(rng, 0.0, extent), uniform(rng, 0.0, extent), yaw),
                                      static_cast<int>(scene.instances.size()));
            if (!placement_valid(scene, cand, min_gap)) continue;
            scene.instances.push_back(std::move(cand));
            break;
        }
    }
}

struct Candidate {
    Scene scene;
    std::string scene_id;
    std::string placement;
    std::vector<std::optional<OcclusionRecord>> levels;  // per instance, nullopt when unmeasured
    std::shared_ptr<DepthFrame> frame;                    // full render when already made
};

// Target first, then one occluder between it and the camera. The lateral
// offset of the occluder is searched for the level closest to `aim`.
std::optional<Candidate> targeted_scene(const DatasetConfig& config, const Catalog& catalog, const CameraModel& camera,
                                        double aim, std::uint64_t seed) {
    Rng rng(seed);
    const double extent = config.workspace_extent;
    Scene scene;
    scene.workspace_extent = extent;
    scene.seed = seed;
    scene.target_index = 0;
    const double min_gap = 0.002;

    bool placed = false;
    for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
        const auto& entry = catalog.at(static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(catalog.size()) - 1)));
        auto inst = make_instance(entry,
                                  upright_pose(uniform(rng, 0.25 * extent, 0.75 * extent),
                                               uniform(rng, 0.45 * extent, 0.8 * extent),
                                               uniform(rng, 0.0, 2.0 * std::numbers::pi)),
                                  0);
        if (!placement_valid(scene, inst, min_gap)) continue;
        scene.instances.push_back(std::move(inst));
        placed = true;
    }
    if (!placed) return std::nullopt;

    const Aabb tb = scene.instances[0].world_bounds();
    const Vec3 tc = 0.5 * (tb.min + tb.max);
    Vec3 toward = camera.position() - tc;
    toward.z() = 0.0;
    toward.normalize();
    const Vec3 lateral(-toward.y(), toward.x(), 0.0);
    const double target_radius = 0.5 * (tb.max - tb.min).head<2>().norm();

    // Occlusion grows with occluder height, so high aims draw from taller
    // shapes; a few occluders are tried and the closest level wins.
    const double target_height = tb.max.z() - tb.min.z();
    const double wanted = aim * (target_height + target_radius);
    std::vector<const CatalogEntry*> options;
    const CatalogEntry* tallest = nullptr;
    for (int attempt = 0; attempt < 40 && options.size() < 3; ++attempt) {
        const auto& e = catalog.at(static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(catalog.size()) - 1)));
        if (!tallest || e.footprint.z() > tallest->footprint.z()) tallest = &e;
        if (e.footprint.z() >= wanted) options.push_back(&e);
    }
    if (options.empty()) options.push_back(tallest);
    const double yaw = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double phase = uniform(rng, -0.5, 0.5);

    std::optional<ObjectInstance> best;
    double best_err = 1e300;
    for (const CatalogEntry* occluder : options) {
        const Aabb ob = make_instance(*occluder, upright_pose(0, 0, yaw), 1).world_bounds();
        const double span = target_radius + 0.5 * (ob.max - ob.min).head<2>().norm();
        for (int s = 0; s < kOffsetSteps; ++s) {
            const double frac = (s + 0.5 + phase) / kOffsetSteps * 2.0 - 1.0;
            // Nearest admissible stand-off along the camera direction.
            for (double d = 0.5 * span; d < span + 0.05; d += 0.004) {
                const Vec3 c = tc + d * toward + frac * span * lateral;
                auto cand = make_instance(*occluder, upright_pose(c.x(), c.y(), yaw), 1);
                if (!placement_valid(scene, cand, min_gap)) {
                    if (!inside_workspace_xy(cand, extent)) break;
                    continue;
                }
                Scene trial = scene;
                trial.instances.push_back(cand);
                const auto rec = measure(trial, 0, camera, nullptr);
                if (rec && std::abs(rec->level - aim) < best_err) {
                    best_err = std::abs(rec->level - aim);
                    best = std::move(cand);
                }
                break;
            }
        }
        if (best_err < 0.02) break;
    }
    if (!best) return std::nullopt;
    scene.instances.push_back(*best);

    const int total = uniform_int(rng, config.min_objects, config.max_objects);
    fill_random(scene, catalog, total - 2, rng, min_gap);

    Candidate out;
    out.levels.assign(scene.instances.size(), std::nullopt);
    out.levels[0] = measure(scene, 0, camera, nullptr);
    out.scene = std::move(scene);
    out.placement = "targeted";
    return out;
}

std::uint64_t fnv64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fnv_of_bytes(const std::string& bytes) {
    const std::uint64_t h = fnv64(bytes);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<std::string> scene_files(const std::vector<int>& single_frames) {
    std::vector<std::string> out = {"manifest.json", "cluttered.depth.f32", "cluttered.instance.u16", "cluttered.json",
                                    "occlusion.csv", "labels.jsonl"};
    for (int k : single_frames)
        for (const char* ext : {".depth.f32", ".instance.u16", ".json"}) out.push_back("single_t" + std::to_string(k) + ext);
    return out;
}

nlohmann::json sample_to_json(const SampleRecord& s) {
    return {{"id", s.id},
            {"scene", s.scene_id},
            {"target_index", s.target_index},
            {"split", s.split},
            {"placement", s.placement},
            {"occlusion", occlusion_to_json(s.occlusion)},
            {"occluder_count", s.factors.occluder_count},
            {"target_size", s.factors.target_size}};
}

SampleRecord sample_from_json(const nlohmann::json& j) {
    SampleRecord s;
    s.id = j.at("id").get<std::string>();
    s.scene_id = j.at("scene").get<std::string>();
    s.target_index = j.at("target_index").get<int>();
    s.split = j.at("split").get<std::string>();
    s.placement = j.at("placement").get<std::string>();
    s.occlusion = occlusion_from_json(j.at("occlusion"));
    s.factors.occluder_count = j.at("occluder_count").get<int>();
    s.factors.target_size = j.at("target_size").get<double>();
    return s;
}

void write_index(const Dataset& d) {
    nlohmann::json scenes = nlohmann::json::array();
    for (const auto& s : d.scenes)
        scenes.push_back({{"id", s.id}, {"placement", s.placement}, {"seed", s.seed}, {"checksums", s.checksums}});
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : d.samples) samples.push_back(sample_to_json(s));
    nlohmann::json j = {{"format", "occgrasp-dataset-1"},
                        {"config", dataset_config_to_json(d.config)},
                        {"seed", d.config.seed},
                        {"bin_counts", d.bin_counts()},
                        {"shortfall", d.shortfall},
                        {"random_scenes_tried", d.random_scenes_tried},
                        {"targeted_attempts", d.targeted_attempts},
                        {"scenes", scenes},
                        {"samples", samples}};
    write_json(d.root / "index.json", j);
}

void write_scene_labels(const Dataset& d, const std::string& scene_id, const Scene& scene,
                        const std::vector<int>& targets, int count, std::uint64_t seed) {
    std::ofstream out(d.scene_dir(scene_id) / "labels.jsonl", std::ios::binary);
    if (!out) throw IoError("cannot write labels for scene " + scene_id);
    for (int t : targets) {
        if (count <= 0) break;
        Scene s = scene;
        s.target_index = t;
        LabelConfig lc;
        const auto labels = label_pair(s, GripperModel{}, count, derive_seed(seed, static_cast<std::uint64_t>(t)), lc);
        for (const auto& l : labels) out << label_to_json(scene_id, t, l).dump() << '\n';
    }
    if (!out) throw IoError("write failed: labels for scene " + scene_id);
}

void refresh_checksums(Dataset& d, SceneRecord& rec, const std::vector<int>& single_frames) {
    rec.checksums.clear();
    for (const auto& f : scene_files(single_frames)) rec.checksums[f] = fnv1a_hex(d.scene_dir(rec.id) / f);
}

}  // namespace

fs::path default_output_root() {
    if (const char* env = std::getenv("OCCGRASP_OUTPUT_ROOT"); env && *env) return fs::path(env);
    return fs::path("occgrasp_out");
}

std::string fnv1a_hex(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv_of_bytes(ss.str());
}

void DatasetConfig::validate() const {
    if (split != "train" && split != "test") throw InputError("dataset: split must be train or test");
    bins.validate();
    if (per_bin < 0) throw InputError("dataset: per_bin must be >= 0");
    if (per_bin == 0 && scene_count <= 0) throw InputError("dataset: scene_count must be positive without quotas");
    if (random_scenes < 0 || max_attempts_per_bin < 0) throw InputError("dataset: attempt budgets must be >= 0");
    if (min_objects < 1 || max_objects > 10 || min_objects > max_objects)
        throw InputError("dataset: object count range must lie within [1, 10]");
    if (!(workspace_extent > 0)) throw InputError("dataset: workspace_extent must be positive");
    if (grasps_per_sample < 0) throw InputError("dataset: grasps_per_sample must be >= 0");
}

nlohmann::json dataset_config_to_json(const DatasetConfig& c) {
    return {{"split", c.split},
            {"bin_edges", c.bins.edges},
            {"per_bin", c.per_bin},
            {"scene_count", c.scene_count},
            {"random_scenes", c.random_scenes},
            {"max_attempts_per_bin", c.max_attempts_per_bin},
            {"targeted_placement", c.targeted_placement},
            {"seed", c.seed},
            {"catalog_per_kind", c.catalog.per_kind},
            {"catalog_seed", c.catalog.seed},
            {"min_objects", c.min_objects},
            {"max_objects", c.max_objects},
            {"workspace_extent", c.workspace_extent},
            {"grasps_per_sample", c.grasps_per_sample},
            {"write_single_frames", c.write_single_frames}};
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j) {
    DatasetConfig c;
    try {
        c.split = j.at("split").get<std::string>();
        c.bins.edges = j.at("bin_edges").get<std::vector<double>>();
        c.per_bin = j.at("per_bin").get<int>();
        c.scene_count = j.at("scene_count").get<int>();
        c.random_scenes = j.at("random_scenes").get<int>();
        c.max_attempts_per_bin = j.at("max_attempts_per_bin").get<int>();
        c.targeted_placement = j.at("targeted_placement").get<bool>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.catalog.per_kind = j.at("catalog_per_kind").get<int>();
        c.catalog.seed = j.at("catalog_seed").get<std::uint64_t>();
        c.min_objects = j.at("min_objects").get<int>();
        c.max_objects = j.at("max_objects").get<int>();
        c.workspace_extent = j.at("workspace_extent").get<double>();
        c.grasps_per_sample = j.at("grasps_per_sample").get<int>();
        c.write_single_frames = j.at("write_single_frames").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("dataset config: ") + e.what());
    }
    return c;
}

std::vector<int> Dataset::bin_counts() const {
    std::vector<int> counts(std::max(0, config.bins.bin_count()), 0);
    for (const auto& s : samples)
        if (s.occlusion.bin_index >= 0 && s.occlusion.bin_index < static_cast<int>(counts.size()))
            ++counts[s.occlusion.bin_index];
    return counts;
}

Dataset build_dataset(const DatasetConfig& config, const fs::path& root) {
    config.validate();
    if (fs::exists(root / "index.json")) throw IoError("dataset already exists at " + root.string());
    fs::create_directories(root / "scenes");

    Dataset d;
    d.root = root;
    d.config = config;
    d.catalog = std::make_shared<const Catalog>(Catalog::procedural(config.catalog));
    const int bins = config.bins.bin_count();
    const bool quota = config.per_bin > 0;
    const CameraModel camera = default_camera(config.workspace_extent);
    std::vector<int> counts(bins, 0);
    d.targeted_attempts.assign(bins, 0);

    auto unfilled = [&] {
        std::vector<int> out;
        for (int b = 0; b < bins; ++b)
            if (counts[b] < config.per_bin) out.push_back(b);
        return out;
    };

    // Accepted scenes, written after generation.
    struct Accepted {
        Candidate c;
        std::vector<int> targets;
    };
    std::vector<Accepted> accepted;

    auto accept = [&](Candidate& c) {
        std::vector<int> targets;
        for (int k = 0; k < static_cast<int>(c.levels.size()); ++k) {
            if (!c.levels[k]) continue;
            const auto bin = assign_bin(c.levels[k]->level, config.bins);
            if (!bin) continue;
            if (quota && counts[*bin] >= config.per_bin) continue;
            c.levels[k]->bin_index = *bin;
            ++counts[*bin];
            targets.push_back(k);
        }
        if (!targets.empty()) accepted.push_back({std::move(c), std::move(targets)});
    };

    // Random packed scenes; every target is measured on one full render.
    const int random_total = quota ? config.random_scenes : config.scene_count;
    for (int first = 0; first < random_total; first += kRandomChunk) {
        if (quota && unfilled().empty()) break;
        const int n = std::min(kRandomChunk, random_total - first);
        std::vector<std::optional<Candidate>> chunk(n);
        parallel_for(n, config.workers, [&](std::size_t i) {
            const int index = first + static_cast<int>(i);
            SceneConfig sc;
            sc.catalog = d.catalog;
            sc.min_objects = config.min_objects;
            sc.max_objects = config.max_objects;
            sc.workspace_extent = config.workspace_extent;
            sc.seed = derive_seed(config.seed, static_cast<std::uint64_t>(index), kRandomSceneSalt);
            Candidate c;
            try {
                c.scene = generate_packed_scene(sc);
            } catch (const GenerationError&) {
                return;
            }
            c.scene_id = "r" + pad(index, 6);
            c.placement = "random";
            c.frame = std::make_shared<DepthFrame>(render(c.scene, camera));
            for (int k = 0; k < static_cast<int>(c.scene.instances.size()); ++k)
                c.levels.push_back(measure(c.scene, k, camera, c.frame.get()));
            chunk[i] = std::move(c);
        });
        d.random_scenes_tried += n;
        for (auto& c : chunk)
            if (c) accept(*c);
    }

    // Targeted rounds: each unfilled bin with budget left gets a few attempts
    // aimed at it; any accepted level may fill any unfilled bin.
    if (quota && config.targeted_placement) {
        for (;;) {
            std::vector<std::pair<int, int>> jobs;  // (bin, attempt)
            for (int b : unfilled())
                for (int r = 0; r < kTargetedRound && d.targeted_attempts[b] < config.max_attempts_per_bin; ++r)
                    jobs.emplace_back(b, d.targeted_attempts[b]++);
            if (jobs.empty()) break;
            std::vector<std::optional<Candidate>> chunk(jobs.size());
            parallel_for(jobs.size(), config.workers, [&](std::size_t i) {
                const auto [b, a] = jobs[i];
                const std::uint64_t seed =
                    derive_seed(config.seed, static_cast<std::uint64_t>(b) * 1000003ULL + a, kTargetedSalt);
                Rng aim_rng(seed ^ 0x9e37ULL);
                const double lo = config.bins.edges[b], hi = config.bins.edges[b + 1];
                auto c = targeted_scene(config, *d.catalog, camera, uniform(aim_rng, lo, hi), seed);
                if (!c) return;
                c->scene_id = "b" + pad(b, 2) + "_" + pad(a, 5);
                chunk[i] = std::move(c);
            });
            for (auto& c : chunk)
                if (c) accept(*c);
        }
    }

    if (quota) {
        d.shortfall.assign(bins, 0);
        for (int b = 0; b < bins; ++b) d.shortfall[b] = config.per_bin - counts[b];
    }

    // Write phase: each scene directory is independent.
    d.scenes.resize(accepted.size());
    parallel_for(accepted.size(), config.workers, [&](std::size_t i) {
        auto& a = accepted[i];
        const fs::path dir = d.scene_dir(a.c.scene_id);
        fs::create_directories(dir);
        if (!a.c.frame) a.c.frame = std::make_shared<DepthFrame>(render(a.c.scene, camera));
        write_frame(dir / kFrameStem, *a.c.frame);
        nlohmann::json frames = {{"cluttered", kFrameStem}};
        if (config.write_single_frames)
            for (int k : a.targets) {
                const std::string stem = "single_t" + std::to_string(k);
                write_frame(dir / stem, render(derive_single_scene(a.c.scene, k), camera));
                frames["single"][std::to_string(k)] = stem;
            }

        std::vector<OcclusionRow> rows;
        for (int k = 0; k < static_cast<int>(a.c.levels.size()); ++k)
            if (a.c.levels[k]) rows.push_back({a.c.scene_id, k, *a.c.levels[k]});
        write_occlusion_csv(dir / "occlusion.csv", rows);

        write_scene_labels(d, a.c.scene_id, a.c.scene, a.targets, config.grasps_per_sample,
                           derive_seed(config.seed, fnv64(a.c.scene_id), kLabelSalt));

        nlohmann::json targets = nlohmann::json::array();
        for (int k : a.targets) {
            Scene s = a.c.scene;
            s.target_index = k;
            const SceneFactors f = scene_factors(s);
            targets.push_back({{"target_index", k},
                               {"instance_id", a.c.scene.instances[k].id},
                               {"occlusion", occlusion_to_json(*a.c.levels[k])},
                               {"occluder_count", f.occluder_count},
                               {"target_size", f.target_size}});
        }
        nlohmann::json manifest = {{"scene_id", a.c.scene_id},
                                   {"split", config.split},
                                   {"placement", a.c.placement},
                                   {"seed", a.c.scene.seed},
                                   {"scene", scene_to_json(a.c.scene)},
                                   {"camera", camera_to_json(camera)},
                                   {"frames", frames},
                                   {"targets", targets},
                                   {"labels", "labels.jsonl"},
                                   {"occlusion", "occlusion.csv"}};
        write_json(dir / "manifest.json", manifest);

        SceneRecord rec;
        rec.id = a.c.scene_id;
        rec.placement = a.c.placement;
        rec.seed = a.c.scene.seed;
        refresh_checksums(d, rec, config.write_single_frames ? a.targets : std::vector<int>{});
        d.scenes[i] = std::move(rec);
    });

    for (const auto& a : accepted) {
        for (int k : a.targets) {
            SampleRecord s;
            s.id = sample_id(a.c.scene_id, k);
            s.scene_id = a.c.scene_id;
            s.target_index = k;
            s.split = config.split;
            s.placement = a.c.placement;
            s.occlusion = *a.c.levels[k];
            Scene sc = a.c.scene;
            sc.target_index = k;
            s.factors = scene_factors(sc);
            d.samples.push_back(std::move(s));
        }
    }
    write_index(d);
    return d;
}

Dataset load_dataset(const fs::path& root, bool verify) {
    const nlohmann::json j = read_json(root / "index.json");
    Dataset d;
    d.root = root;
    try {
        d.config = dataset_config_from_json(j.at("config"));
        d.shortfall = j.at("shortfall").get<std::vector<int>>();
        d.random_scenes_tried = j.at("random_scenes_tried").get<int>();
        d.targeted_attempts = j.at("targeted_attempts").get<std::vector<int>>();
        for (const auto& s : j.at("scenes")) {
            SceneRecord r;
            r.id = s.at("id").get<std::string>();
            r.placement = s.at("placement").get<std::string>();
            r.seed = s.at("seed").get<std::uint64_t>();
            r.checksums = s.at("checksums").get<std::map<std::string, std::string>>();
            d.scenes.push_back(std::move(r));
        }
        for (const auto& s : j.at("samples")) d.samples.push_back(sample_from_json(s));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("index.json: ") + e.what());
    }
    d.catalog = std::make_shared<const Catalog>(Catalog::procedural(d.config.catalog));
    if (!verify) return d;

    std::map<std::string, const SceneRecord*> by_id;
    for (const auto& s : d.scenes) by_id[s.id] = &s;
    std::map<std::string, bool> checked;
    for (const auto& s : d.samples) {
        const auto it = by_id.find(s.scene_id);
        if (it == by_id.end()) throw IoError("sample " + s.id + ": scene " + s.scene_id + " not in index");
        if (!checked[s.scene_id]) {
            for (const auto& [file, sum] : it->second->checksums) {
                const fs::path p = d.scene_dir(s.scene_id) / file;
                if (!fs::exists(p)) throw IoError("sample " + s.id + ": missing " + p.string());
                if (fnv1a_hex(p) != sum) throw IoError("sample " + s.id + ": checksum mismatch for " + p.string());
            }
            checked[s.scene_id] = true;
        }
        const auto bin = assign_bin(s.occlusion.level, d.config.bins);
        if (!bin || *bin != s.occlusion.bin_index)
            throw IoError("sample " + s.id + ": bin " + std::to_string(s.occlusion.bin_index) +
                          " disagrees with level " + std::to_string(s.occlusion.level));
    }
    return d;
}

Scene load_sample_scene(const Dataset& d, const SampleRecord& s) {
    const fs::path p = d.scene_dir(s.scene_id) / "manifest.json";
    if (!fs::exists(p)) throw IoError("sample " + s.id + ": missing " + p.string());
    Scene scene = scene_from_json(read_json(p).at("scene"), *d.catalog);
    scene.target_index = s.target_index;
    return scene;
}

DepthFrame load_sample_frame(const Dataset& d, const SampleRecord& s) {
    try {
        return read_frame(d.scene_dir(s.scene_id) / kFrameStem);
    } catch (const IoError& e) {
        throw IoError("sample " + s.id + ": " + e.what());
    }
}

std::vector<GraspLabel> load_sample_labels(const Dataset& d, const SampleRecord& s) {
    const fs::path p = d.scene_dir(s.scene_id) / "labels.jsonl";
    std::ifstream in(p);
    if (!in) throw IoError("sample " + s.id + ": missing " + p.string());
    std::vector<GraspLabel> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("sample " + s.id + ": bad label line: " + e.what());
        }
        if (j.at("target_index").get<int>() == s.target_index) out.push_back(label_from_json(j));
    }
    return out;
}

void label_dataset(Dataset& d, int grasps_per_sample, unsigned workers) {
    if (grasps_per_sample < 0) throw InputError("label_dataset: grasps_per_sample must be >= 0");
    d.config.grasps_per_sample = grasps_per_sample;
    std::map<std::string, std::vector<int>> targets;
    for (const auto& s : d.samples) targets[s.scene_id].push_back(s.target_index);
    parallel_for(d.scenes.size(), workers, [&](std::size_t i) {
        auto& rec = d.scenes[i];
        const Scene scene = scene_from_json(read_json(d.scene_dir(rec.id) / "manifest.json").at("scene"), *d.catalog);
        const auto it = targets.find(rec.id);
        const std::vector<int> ts = it == targets.end() ? std::vector<int>{} : it->second;
        write_scene_labels(d, rec.id, scene, ts, grasps_per_sample, derive_seed(d.config.seed, fnv64(rec.id), kLabelSalt));
        refresh_checksums(d, rec, d.config.write_single_frames ? ts : std::vector<int>{});
    });
    write_index(d);
}

BalanceReport balance_grasps(const std::vector<BinnedLabel>& labels, bool per_bin, LabelContext context,
                             std::uint64_t seed) {
    if (labels.empty()) throw InputError("balance_grasps: no labels");
    auto positive = [&](const GraspLabel& l) {
        return context == LabelContext::Single ? l.success_single : l.success_cluttered;
    };
    std::map<int, std::vector<std::size_t>> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int key = per_bin ? labels[i].bin : -1;
        (positive(labels[i].label) ? pos[key] : neg[key]).push_back(i);
        pos[key];
    }
    BalanceReport out;
    for (auto& [key, p] : pos) {
        auto& n = neg[key];
        if (p.empty()) {
            out.warnings.push_back("bin " + std::to_string(key) + ": no positives, emitted empty");
            out.positives[key] = 0;
            out.negatives[key] = 0;
            continue;
        }
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(key + 1), kBalanceSalt);
        std::shuffle(n.begin(), n.end(), rng);
        if (n.size() > p.size()) n.resize(p.size());
        std::vector<std::size_t> keep = p;
        keep.insert(keep.end(), n.begin(), n.end());
        std::sort(keep.begin(), keep.end());
        for (auto i : keep) out.labels.push_back(labels[i]);
        out.positives[key] = p.size();
        out.negatives[key] = n.size();
    }
    return out;
}

Policy make_oracle_policy(const CameraModel& camera, const std::string& completer, PipelineConfig pipeline,
                          OracleScorerConfig scorer_config) {
    auto scorer = std::make_shared<OracleScorer>(camera.position(), scorer_config);
    std::shared_ptr<const Completer> comp = make_completer(completer);
    pipeline.workers = 1;
    return [scorer, comp, pipeline](const Scene& scene, const DepthFrame& frame) -> std::optional<Grasp> {
        return select_best_grasp(scene, frame, *scorer, *comp, pipeline).grasp;
    };
}

Policy make_random_policy(std::uint64_t seed) {
    return [seed](const Scene& scene, const DepthFrame& frame) -> std::optional<Grasp> {
        const PointCloud visible = back_project(frame, scene.target().id);
        if (visible.empty()) return std::nullopt;
        Rng rng = make_rng(seed, scene.seed ^ static_cast<std::uint64_t>(scene.target_index), kRandomPolicySalt);
        const Vec3& p = visible.points[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(visible.size()) - 1))];
        // Approach from the upper hemisphere, closing axis anywhere around it.
        const double az = uniform(rng, 0.0, 2.0 * std::numbers::pi), el = std::acos(uniform(rng, 0.0, 1.0));
        const Vec3 approach(-std::sin(el) * std::cos(az), -std::sin(el) * std::sin(az), -std::cos(el));
        Vec3 ref = std::abs(approach.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
        Vec3 y = approach.cross(ref).normalized();
        const double spin = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        y = std::cos(spin) * y + std::sin(spin) * approach.cross(y);
        const Vec3 x = y.cross(approach);
        Mat3 m;
        m.col(0) = x;
        m.col(1) = y;
        m.col(2) = approach;
        Grasp g;
        g.rotation = Quaternion::from_matrix(m);
        g.center = p + Vec3(uniform(rng, -0.01, 0.01), uniform(rng, -0.01, 0.01), uniform(rng, -0.01, 0.01));
        g.width = uniform(rng, 0.01, 0.08);
        g.quality = 1.0;
        return g;
    };
}

EvalReport evaluate_policy(const Policy& policy, const std::string& policy_name, const Dataset& dataset,
                           const EvalConfig& config) {
    if (config.trials_per_bin < 1) throw InputError("evaluate_policy: trials_per_bin must be >= 1");
    if (config.noise_sigma < 0) throw InputError("evaluate_policy: noise_sigma must be >= 0");
    const int bins = dataset.config.bins.bin_count();
    std::vector<const SampleRecord*> chosen;
    std::vector<int> taken(bins, 0);
    bool has_test = false;
    for (const auto& s : dataset.samples) {
        if (s.split != "test") continue;
        has_test = true;
        const int b = s.occlusion.bin_index;
        if (b < 0 || b >= bins || taken[b] >= config.trials_per_bin) continue;
        ++taken[b];
        chosen.push_back(&s);
    }
    if (!has_test) throw InputError("evaluate_policy: dataset has no test split");

    EvalReport report;
    report.policy = policy_name;
    report.seed = config.seed;
    report.config = {{"policy", policy_name},
                     {"trials_per_bin", config.trials_per_bin},
                     {"noise_sigma", config.noise_sigma},
                     {"seed", config.seed},
                     {"dataset", dataset_config_to_json(dataset.config)}};
    report.outcomes.resize(chosen.size());
    const GripperModel gripper;
    parallel_for(chosen.size(), config.workers, [&](std::size_t i) {
        const SampleRecord& s = *chosen[i];
        const Scene scene = load_sample_scene(dataset, s);
        DepthFrame frame = load_sample_frame(dataset, s);
        if (config.noise_sigma > 0)
            frame = add_depth_noise(frame, config.noise_sigma, derive_seed(config.seed, i, kNoiseSalt));
        Outcome o;
        o.sample_id = s.id;
        o.bin = s.occlusion.bin_index;
        o.level = s.occlusion.level;
        o.occluder_count = s.factors.occluder_count;
        o.target_size = s.factors.target_size;
        const auto grasp = policy(scene, frame);
        if (!grasp) {
            o.no_grasp = true;
            o.reason = "no_grasp";
        } else {
            const auto sim = simulate_grasp(*grasp, scene, gripper);
            o.success = sim.success;
            o.reason = to_string(sim.reason);
        }
        report.outcomes[i] = std::move(o);
    });
    report.bins = aggregate_bins(report.outcomes, dataset.config.bins);
    return report;
}

std::vector<BinResult> aggregate_bins(const std::vector<Outcome>& outcomes, const BinScheme& scheme) {
    std::vector<std::vector<bool>> per(scheme.bin_count());
    for (const auto& o : outcomes)
        if (o.bin >= 0 && o.bin < scheme.bin_count()) per[o.bin].push_back(o.success);
    std::vector<BinResult> out;
    for (int b = 0; b < scheme.bin_count(); ++b) {
        BinResult r;
        r.bin = b;
        r.label = scheme.label(b);
        r.trials = per[b].size();
        r.successes = static_cast<std::size_t>(std::count(per[b].begin(), per[b].end(), true));
        if (r.trials > 0) r.gsr = gsr(per[b]);
        out.push_back(std::move(r));
    }
    return out;
}

FactorTables analyze_factors(const std::vector<Outcome>& outcomes) {
    FactorTables t;
    for (int k = 0; k <= 6; ++k) t.by_occluders[k];
    std::map<int, bool> bins_seen;
    for (const auto& o : outcomes) bins_seen[o.bin] = true;
    const int buckets = static_cast<int>(size_bucket_edges().size()) - 1;
    for (const auto& [b, _] : bins_seen)
        for (int k = 0; k < buckets; ++k) t.by_size[{b, k}];
    for (const auto& o : outcomes) {
        for (FactorCell* cell : {&t.by_occluders[o.occluder_count], &t.by_size[{o.bin, size_bucket(o.target_size)}]}) {
            ++cell->trials;
            cell->successes += o.success;
        }
    }
    auto finish = [](FactorCell& c) {
        if (c.trials > 0) c.gsr = static_cast<double>(c.successes) / static_cast<double>(c.trials);
    };
    for (auto& [_, c] : t.by_occluders) finish(c);
    for (auto& [_, c] : t.by_size) finish(c);
    return t;
}

std::vector<CompletionRow> evaluate_completion(const Dataset& dataset, const CompletionEvalConfig& config) {
    if (!(config.voxel_size > 0)) throw InputError("evaluate_completion: voxel_size must be positive");
    if (config.completers.empty()) throw InputError("evaluate_completion: no completers");
    std::vector<std::unique_ptr<Completer>> completers;
    for (const auto& name : config.completers) completers.push_back(make_completer(name));
    std::vector<const SampleRecord*> chosen;
    std::map<int, int> taken;
    for (const auto& s : dataset.samples)
        if (config.samples_per_bin <= 0 || taken[s.occlusion.bin_index]++ < config.samples_per_bin) chosen.push_back(&s);

    std::vector<std::vector<CompletionRow>> rows(chosen.size());
    parallel_for(chosen.size(), config.workers, [&](std::size_t i) {
        const SampleRecord& s = *chosen[i];
        const Scene scene = load_sample_scene(dataset, s);
        const DepthFrame frame = load_sample_frame(dataset, s);
        const PointCloud partial = back_project(frame, scene.target().id);
        if (partial.empty()) return;
        const PointCloud reference = oracle_completer(partial, scene, config.reference_points, fnv64(s.id));
        CompletionContext ctx;
        ctx.scene = &scene;
        ctx.camera = frame.camera;
        for (const auto& c : completers) {
            const CompletionResult r = c->complete(partial, ctx);
            CompletionRow row;
            row.scene_id = s.scene_id;
            row.target = s.target_index;
            row.completer = c->name();
            row.cd_l1_x1000 = 1000.0 * chamfer_l1(r.cloud, reference);
            row.iou_pct = 100.0 * volumetric_iou(r.cloud, reference, config.voxel_size);
            row.occlusion_level = s.occlusion.level;
            rows[i].push_back(std::move(row));
        }
    });
    std::vector<CompletionRow> out;
    for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    return out;
}

namespace {

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    return out;
}

std::string gsr_text(const std::optional<double>& g) {
    if (!g) return "";
    std::ostringstream os;
    os.precision(17);
    os << *g;
    return os.str();
}

// Comma-separated cells; double quotes protect commas inside a cell.
std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') quoted = !quoted;
        else if (ch == ',' && !quoted) out.emplace_back();
        else out.back() += ch;
    }
    return out;
}

}  // namespace

void write_eval_csv(const fs::path& path, const EvalReport& report) {
    auto out = open_out(path);
    out << "bin,label,trials,successes,gsr\n";
    for (const auto& b : report.bins)
        out << b.bin << ",\"" << b.label << "\"," << b.trials << ',' << b.successes << ',' << gsr_text(b.gsr) << '\n';
}

std::vector<BinResult> read_eval_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "bin,label,trials,successes,gsr") throw IoError(path.string() + ": unexpected header");
    std::vector<BinResult> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split_csv(line);
        if (c.size() != 5) throw IoError(path.string() + ": bad row '" + line + "'");
        BinResult r;
        try {
            r.bin = std::stoi(c[0]);
            r.label = c[1];
            r.trials = std::stoul(c[2]);
            r.successes = std::stoul(c[3]);
            if (!c[4].empty()) r.gsr = std::stod(c[4]);
        } catch (const std::exception&) {
            throw IoError(path.string() + ": bad row '" + line + "'");
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_outcomes_csv(const fs::path& path, const std::vector<Outcome>& outcomes) {
    auto out = open_out(path);
    out << "sample_id,bin,level,occluder_count,target_size,success,no_grasp,reason\n";
    for (const auto& o : outcomes)
        out << o.sample_id << ',' << o.bin << ',' << o.level << ',' << o.occluder_count << ',' << o.target_size << ','
            << int(o.success) << ',' << int(o.no_grasp) << ',' << o.reason << '\n';
}

std::vector<Outcome> read_outcomes_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "sample_id,bin,level,occluder_count,target_size,success,no_grasp,reason")
        throw IoError(path.string() + ": unexpected header");
    std::vector<Outcome> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split_csv(line);
        if (c.size() != 8) throw IoError(path.string() + ": bad row '" + line + "'");
        Outcome o;
        try {
            o.sample_id = c[0];
            o.bin = std::stoi(c[1]);
            o.level = std::stod(c[2]);
            o.occluder_count = std::stoi(c[3]);
            o.target_size = std::stod(c[4]);
            o.success = c[5] == "1";
            o.no_grasp = c[6] == "1";
            o.reason = c[7];
        } catch (const std::exception&) {
            throw IoError(path.string() + ": bad row '" + line + "'");
        }
        out.push_back(std::move(o));
    }
    return out;
}

void write_factor_csvs(const fs::path& dir, const FactorTables& t) {
    {
        auto out = open_out(dir / "factors_occluders.csv");
        out << "occluder_count,trials,successes,gsr\n";
        for (const auto& [k, c] : t.by_occluders)
            out << k << ',' << c.trials << ',' << c.successes << ',' << gsr_text(c.gsr) << '\n';
    }
    auto out = open_out(dir / "factors_size.csv");
    out << "bin,size_bucket,trials,successes,gsr\n";
    for (const auto& [key, c] : t.by_size)
        out << key.first << ",\"" << size_bucket_label(key.second) << "\"," << c.trials << ',' << c.successes << ','
            << gsr_text(c.gsr) << '\n';
}

namespace {

bool encode_png(std::FILE* fp, const std::vector<std::uint8_t>& rgb, int width, int height) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(&rgb[static_cast<std::size_t>(y) * width * 3]));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

}  // namespace

void write_gsr_plot_png(const fs::path& path, const std::vector<std::pair<std::string, std::vector<BinResult>>>& series,
                        const BinScheme& scheme, int width, int height) {
    if (width < 64 || height < 64) throw InputError("plot: image too small");
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * height * 3, 255);
    auto put = [&](int x, int y, const std::array<std::uint8_t, 3>& c) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        auto* p = &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
        p[0] = c[0], p[1] = c[1], p[2] = c[2];
    };
    auto line = [&](int x0, int y0, int x1, int y1, const std::array<std::uint8_t, 3>& c, int thick) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        for (;;) {
            for (int a = -thick / 2; a <= thick / 2; ++a)
                for (int b = -thick / 2; b <= thick / 2; ++b) put(x0 + a, y0 + b, c);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) err += dy, x0 += sx;
            if (e2 <= dx) err += dx, y0 += sy;
        }
    };
    const int left = 48, right = width - 16, top = 16, bottom = height - 40;
    const double xmax = scheme.edges.back();
    auto px = [&](double level) { return left + static_cast<int>(std::lround(level / xmax * (right - left))); };
    auto py = [&](double g) { return bottom - static_cast<int>(std::lround(g * (bottom - top))); };
    const std::array<std::uint8_t, 3> grey{200, 200, 200}, black{0, 0, 0};
    for (int k = 0; k <= 10; ++k) line(left, py(k / 10.0), right, py(k / 10.0), grey, 1);
    for (double e : scheme.edges) line(px(e), bottom, px(e), bottom + 6, black, 1);
    line(left, bottom, right, bottom, black, 1);
    line(left, top, left, bottom, black, 1);
    static const std::array<std::array<std::uint8_t, 3>, 6> palette{
        {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189}, {140, 86, 75}}};
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& color = palette[s % palette.size()];
        bool have_prev = false;
        int prev_x = 0, prev_y = 0;
        for (const auto& b : series[s].second) {
            if (!b.gsr || b.bin < 0 || b.bin >= scheme.bin_count()) {
                have_prev = false;
                continue;
            }
            const double mid = 0.5 * (scheme.edges[b.bin] + scheme.edges[b.bin + 1]);
            const int x = px(mid), y = py(*b.gsr);
            if (have_prev) line(prev_x, prev_y, x, y, color, 3);
            for (int a = -3; a <= 3; ++a)
                for (int c = -3; c <= 3; ++c) put(x + a, y + c, color);
            have_prev = true;
            prev_x = x, prev_y = y;
        }
    }

    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw IoError("cannot write " + path.string());
    const bool ok = encode_png(fp, rgb, width, height);
    std::fclose(fp);
    if (!ok) throw IoError("png encoding failed: " + path.string());
}

}  // namespace occgrasp
