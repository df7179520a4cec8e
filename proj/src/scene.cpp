#include "occgrasp/scene.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "occgrasp/convex.hpp"
#include "occgrasp/error.hpp"
#include "occgrasp/ply.hpp"
#include "occgrasp/primitives.hpp"
#include "occgrasp/random.hpp"

namespace occgrasp {

namespace {

constexpr std::uint64_t kCountSalt = 0x5ce9e0c0u;
constexpr std::uint64_t kInstanceSalt = 0x91ace001u;
constexpr std::uint64_t kCatalogSalt = 0xca7a1096u;

std::vector<Vec3> world_vertices(const ObjectInstance& inst) {
    std::vector<Vec3> out;
    out.reserve(inst.mesh().vertices.size());
    for (const auto& v : inst.mesh().vertices) out.push_back(inst.pose.transform_point(v));
    return out;
}

bool inside_workspace(const Aabb& b, double extent, double tol = 1e-9) {
    return (b.min.array() >= -tol).all() && (b.max.array() <= extent + tol).all();
}

bool clear_of(const ObjectInstance& a, const std::vector<Vec3>& a_world, const ObjectInstance& b,
              const std::vector<Vec3>& b_world, double min_gap) {
    if (!a.world_bounds().inflated(min_gap).overlaps(b.world_bounds())) return true;
    return convex_hull_distance(a_world, b_world) >= min_gap;
}

}  // namespace

std::string to_string(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::Box: return "box";
        case PrimitiveKind::Cylinder: return "cylinder";
        case PrimitiveKind::Sphere: return "sphere";
        case PrimitiveKind::HexPrism: return "hex_prism";
        case PrimitiveKind::Imported: return "mesh";
    }
    return "unknown";
}

Catalog Catalog::procedural(const CatalogConfig& config) {
    if (config.per_kind < 1) throw InputError("catalog: per_kind must be >= 1");
    Catalog catalog;
    Rng rng = make_rng(config.seed, 0, kCatalogSalt);
    auto name = [](const char* prefix, int i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s_%03d", prefix, i);
        return std::string(buf);
    };
    for (int i = 0; i < config.per_kind; ++i) {
        const double l = uniform(rng, config.box_side_min, config.box_side_max);
        const double w = uniform(rng, config.box_side_min, config.box_side_max);
        const double h = uniform(rng, config.box_height_min, config.box_height_max);
        catalog.add(name("box", i), make_box(l, w, h), PrimitiveKind::Box);
    }
    for (int i = 0; i < config.per_kind; ++i) {
        const double r = uniform(rng, config.cylinder_radius_min, config.cylinder_radius_max);
        const double h = uniform(rng, config.height_min, config.height_max);
        catalog.add(name("cylinder", i), make_cylinder(r, h), PrimitiveKind::Cylinder);
    }
    for (int i = 0; i < config.per_kind; ++i) {
        const double r = uniform(rng, config.sphere_radius_min, config.sphere_radius_max);
        catalog.add(name("sphere", i), make_sphere(r), PrimitiveKind::Sphere);
    }
    for (int i = 0; i < config.per_kind; ++i) {
        const double r = uniform(rng, config.hex_radius_min, config.hex_radius_max);
        const double h = uniform(rng, config.height_min, config.height_max);
        catalog.add(name("hex", i), make_hex_prism(r, h), PrimitiveKind::HexPrism);
    }
    return catalog;
}

const CatalogEntry& Catalog::add(const std::string& id, TriMesh mesh, PrimitiveKind kind,
                                 std::filesystem::path source) {
    if (index_.count(id)) throw InputError("catalog: duplicate id '" + id + "'");
    mesh.validate();
    const Aabb b = mesh.bounds();
    const Vec3 shift(-(b.min.x() + b.max.x()) / 2, -(b.min.y() + b.max.y()) / 2, -b.min.z());
    if (shift != Vec3::Zero()) {
        for (auto& v : mesh.vertices) v += shift;
    }
    mesh.compute_face_normals();
    CatalogEntry e;
    e.id = id;
    e.kind = kind;
    e.footprint = b.size();
    e.model = make_mesh_model(std::move(mesh));
    e.source = std::move(source);
    index_[id] = entries_.size();
    entries_.push_back(std::move(e));
    return entries_.back();
}

const CatalogEntry& Catalog::add_ply(const std::string& id, const std::filesystem::path& path) {
    return add(id, read_ply_mesh(path), PrimitiveKind::Imported, path);
}

const CatalogEntry& Catalog::at(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw InputError("catalog: unknown id '" + id + "'");
    return entries_[it->second];
}

std::vector<PlacedMesh> Scene::placed() const {
    std::vector<PlacedMesh> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) out.push_back(inst.placed());
    return out;
}

void Scene::validate(double tolerance) const {
    if (instances.empty()) throw InputError("scene: no instances");
    if (target_index < 0 || target_index >= static_cast<int>(instances.size()))
        throw InputError("scene: target_index out of range");
    if (!(workspace_extent > 0)) throw InputError("scene: workspace_extent must be positive");
    for (const auto& inst : instances) {
        if (!inst.model) throw InputError("scene: instance without mesh");
        const Aabb b = inst.world_bounds();
        if (!inside_workspace(b, workspace_extent, tolerance))
            throw InputError("scene: instance " + std::to_string(inst.id) + " leaves the workspace");
        double lowest = std::numeric_limits<double>::infinity();
        for (const auto& v : inst.mesh().vertices) lowest = std::min(lowest, inst.pose.transform_point(v).z());
        if (std::abs(lowest) > tolerance)
            throw InputError("scene: instance " + std::to_string(inst.id) + " does not rest on the table");
    }
}

Pose upright_pose(double x, double y, double yaw) {
    return {quaternion_about_axis(Vec3::UnitZ(), yaw), Vec3(x, y, 0.0)};
}

ObjectInstance make_instance(const CatalogEntry& entry, const Pose& pose, int id) {
    ObjectInstance inst;
    inst.id = id;
    inst.catalog_id = entry.id;
    inst.model = entry.model;
    inst.pose = pose;
    inst.footprint = entry.footprint;
    return inst;
}

bool placement_valid(const Scene& scene, const ObjectInstance& candidate, double min_gap) {
    if (!inside_workspace(candidate.world_bounds(), scene.workspace_extent)) return false;
    const auto cand_world = world_vertices(candidate);
    for (const auto& other : scene.instances) {
        if (!clear_of(candidate, cand_world, other, world_vertices(other), min_gap)) return false;
    }
    return true;
}

Scene generate_packed_scene(const SceneConfig& config) {
    if (config.min_objects < 1 || config.max_objects > 10 || config.min_objects > config.max_objects)
        throw InputError("generate_packed_scene: object_count_range must lie within [1, 10]");
    if (!(config.workspace_extent > 0)) throw InputError("generate_packed_scene: workspace_extent must be positive");
    if (!config.catalog || config.catalog->size() == 0) throw InputError("generate_packed_scene: empty catalog");
    if (config.max_attempts < 1) throw InputError("generate_packed_scene: max_attempts must be >= 1");

    Scene scene;
    scene.workspace_extent = config.workspace_extent;
    scene.seed = config.seed;
    scene.target_index = 0;
    Rng count_rng = make_rng(config.seed, 0, kCountSalt);
    const int count = uniform_int(count_rng, config.min_objects, config.max_objects);
    const double extent = config.workspace_extent;
    std::vector<std::vector<Vec3>> placed_world;

    for (int i = 0; i < count; ++i) {
        Rng rng = make_rng(config.seed, static_cast<std::uint64_t>(i), kInstanceSalt);
        bool done = false;
        for (int attempt = 0; attempt < config.max_attempts && !done; ++attempt) {
            const auto& entry = config.catalog->at(
                static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(config.catalog->size()) - 1)));
            const double yaw = uniform(rng, 0.0, 2.0 * std::numbers::pi);
            const double ux = uniform(rng, 0.0, 1.0), uy = uniform(rng, 0.0, 1.0);
            // Rotated footprint half extents decide the admissible center range.
            const Aabb local = make_instance(entry, upright_pose(0, 0, yaw), i).world_bounds();
            const double lo_x = -local.min.x(), hi_x = extent - local.max.x();
            const double lo_y = -local.min.y(), hi_y = extent - local.max.y();
            if (lo_x > hi_x || lo_y > hi_y || local.max.z() > extent) continue;
            ObjectInstance cand = make_instance(entry, upright_pose(lo_x + ux * (hi_x - lo_x), lo_y + uy * (hi_y - lo_y), yaw), i);
            if (!inside_workspace(cand.world_bounds(), extent)) continue;
            auto cand_world = world_vertices(cand);
            bool ok = true;
            for (std::size_t j = 0; j < scene.instances.size() && ok; ++j)
                ok = clear_of(cand, cand_world, scene.instances[j], placed_world[j], config.min_gap);
            if (!ok) continue;
            scene.instances.push_back(std::move(cand));
            placed_world.push_back(std::move(cand_world));
            done = true;
        }
        if (!done)
            throw GenerationError("generate_packed_scene: could not place instance " + std::to_string(i) + " of " +
                                  std::to_string(count) + " after " + std::to_string(config.max_attempts) +
                                  " attempts (seed " + std::to_string(config.seed) + ")");
    }
    return scene;
}

Scene derive_single_scene(const Scene& scene, int target_index) {
    if (target_index < 0 || target_index >= static_cast<int>(scene.instances.size()))
        throw InputError("derive_single_scene: invalid target index " + std::to_string(target_index));
    Scene single;
    single.instances = {scene.instances[target_index]};
    single.target_index = 0;
    single.workspace_extent = scene.workspace_extent;
    single.seed = scene.seed;
    return single;
}

std::vector<Scene> enumerate_targets(const Scene& scene) {
    std::vector<Scene> out;
    out.reserve(scene.instances.size());
    for (int i = 0; i < static_cast<int>(scene.instances.size()); ++i) {
        Scene s = scene;
        s.target_index = i;
        out.push_back(std::move(s));
    }
    return out;
}

bool same_pose_exact(const Pose& a, const Pose& b) {
    const double av[7] = {a.rotation.w, a.rotation.x, a.rotation.y, a.rotation.z,
                          a.translation.x(), a.translation.y(), a.translation.z()};
    const double bv[7] = {b.rotation.w, b.rotation.x, b.rotation.y, b.rotation.z,
                          b.translation.x(), b.translation.y(), b.translation.z()};
    return std::memcmp(av, bv, sizeof(av)) == 0;
}

bool same_scene_exact(const Scene& a, const Scene& b) {
    if (a.instances.size() != b.instances.size() || a.target_index != b.target_index ||
        a.workspace_extent != b.workspace_extent || a.seed != b.seed)
        return false;
    for (std::size_t i = 0; i < a.instances.size(); ++i) {
        const auto& x = a.instances[i];
        const auto& y = b.instances[i];
        if (x.id != y.id || x.catalog_id != y.catalog_id || !same_pose_exact(x.pose, y.pose)) return false;
    }
    return true;
}

nlohmann::json scene_to_json(const Scene& scene) {
    nlohmann::json j;
    j["seed"] = scene.seed;
    j["workspace_extent"] = scene.workspace_extent;
    j["target_index"] = scene.target_index;
    j["instances"] = nlohmann::json::array();
    for (const auto& inst : scene.instances) {
        const Pose& p = inst.pose;
        j["instances"].push_back({{"id", inst.id},
                                  {"catalog_id", inst.catalog_id},
                                  {"pose", {p.translation.x(), p.translation.y(), p.translation.z(), p.rotation.w,
                                            p.rotation.x, p.rotation.y, p.rotation.z}},
                                  {"footprint", {inst.footprint.x(), inst.footprint.y(), inst.footprint.z()}}});
    }
    return j;
}

Scene scene_from_json(const nlohmann::json& j, const Catalog& catalog) {
    try {
        Scene scene;
        scene.seed = j.at("seed").get<std::uint64_t>();
        scene.workspace_extent = j.at("workspace_extent").get<double>();
        scene.target_index = j.at("target_index").get<int>();
        for (const auto& ji : j.at("instances")) {
            const auto& entry = catalog.at(ji.at("catalog_id").get<std::string>());
            const auto& pv = ji.at("pose");
            if (pv.size() != 7) throw IoError("scene manifest: pose must have 7 values");
            Pose pose;
            pose.translation = Vec3(pv[0].get<double>(), pv[1].get<double>(), pv[2].get<double>());
            // Stored quaternions are already unit; keep them bit-exact.
            pose.rotation = {pv[3].get<double>(), pv[4].get<double>(), pv[5].get<double>(), pv[6].get<double>()};
            scene.instances.push_back(make_instance(entry, pose, ji.at("id").get<int>()));
        }
        if (scene.target_index < 0 || scene.target_index >= static_cast<int>(scene.instances.size()))
            throw IoError("scene manifest: target_index out of range");
        return scene;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("scene manifest: ") + e.what());
    } catch (const InputError& e) {
        throw IoError(std::string("scene manifest: ") + e.what());
    }
}

}  // namespace occgrasp
