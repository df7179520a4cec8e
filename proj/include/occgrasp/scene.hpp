#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "occgrasp/mesh_model.hpp"

namespace occgrasp {

enum class PrimitiveKind { Box, Cylinder, Sphere, HexPrism, Imported };

std::string to_string(PrimitiveKind kind);

/// One catalog object in its canonical frame (footprint centered, base on z = 0).
struct CatalogEntry {
    std::string id;
    PrimitiveKind kind = PrimitiveKind::Box;
    MeshModelPtr model;
    /// Canonical bounding-box extents (length along x, width along y, height).
    Vec3 footprint = Vec3::Zero();
    /// Set for meshes loaded from PLY.
    std::filesystem::path source;
};

struct CatalogConfig {
    int per_kind = 25;
    std::uint64_t seed = 0;
    double box_side_min = 0.03, box_side_max = 0.09;
    double box_height_min = 0.04, box_height_max = 0.12;
    double cylinder_radius_min = 0.015, cylinder_radius_max = 0.04;
    double sphere_radius_min = 0.02, sphere_radius_max = 0.04;
    double hex_radius_min = 0.02, hex_radius_max = 0.045;
    double height_min = 0.04, height_max = 0.12;
};

class Catalog {
public:
    /// Procedural catalog: per_kind boxes, cylinders, spheres and hex prisms
    /// with dimensions drawn uniformly from the config ranges.
    static Catalog procedural(const CatalogConfig& config = {});

    /// Adds a mesh; it is shifted so its footprint is centered and its base
    /// rests on z = 0. Throws InputError on a duplicate id.
    const CatalogEntry& add(const std::string& id, TriMesh mesh, PrimitiveKind kind = PrimitiveKind::Imported,
                            std::filesystem::path source = {});
    const CatalogEntry& add_ply(const std::string& id, const std::filesystem::path& path);

    const CatalogEntry& at(const std::string& id) const;
    const CatalogEntry& at(std::size_t index) const { return entries_.at(index); }
    std::size_t size() const { return entries_.size(); }
    bool contains(const std::string& id) const { return index_.count(id) > 0; }

private:
    std::vector<CatalogEntry> entries_;
    std::map<std::string, std::size_t> index_;
};

using CatalogPtr = std::shared_ptr<const Catalog>;

struct ObjectInstance {
    /// Stable identity within the originating cluttered scene; survives
    /// derive_single_scene and is the value written to instance-id images.
    int id = 0;
    std::string catalog_id;
    MeshModelPtr model;
    Pose pose;
    Vec3 footprint = Vec3::Zero();

    const TriMesh& mesh() const { return model->mesh(); }
    PlacedMesh placed() const { return {model, pose}; }
    Aabb world_bounds() const { return placed().world_bounds(); }
};

struct Scene {
    std::vector<ObjectInstance> instances;
    int target_index = 0;
    double workspace_extent = 0.3;
    std::uint64_t seed = 0;

    const ObjectInstance& target() const { return instances.at(target_index); }
    std::vector<PlacedMesh> placed() const;
    /// Throws InputError when an ObjectInstance or Scene invariant is broken.
    void validate(double tolerance = 1e-6) const;
};

struct SceneConfig {
    int min_objects = 4;
    int max_objects = 6;
    double workspace_extent = 0.3;
    CatalogPtr catalog;
    std::uint64_t seed = 0;
    int max_attempts = 1000;
    /// Required clearance between placed objects.
    double min_gap = 0.002;
};

/// Upright pose with yaw `yaw` whose footprint center sits at (x, y) on the table.
Pose upright_pose(double x, double y, double yaw);

/// Instance of `entry` at `pose`; the id is left for the caller.
ObjectInstance make_instance(const CatalogEntry& entry, const Pose& pose, int id);

/// True when `candidate` lies inside the workspace and keeps at least
/// `min_gap` from every instance already in `scene`.
bool placement_valid(const Scene& scene, const ObjectInstance& candidate, double min_gap);

/// Packed tabletop scene by per-instance rejection sampling. Throws
/// GenerationError naming the instance that could not be placed.
Scene generate_packed_scene(const SceneConfig& config);

/// Scene holding only instance `target_index`, pose and id unchanged.
Scene derive_single_scene(const Scene& scene, int target_index);
std::vector<Scene> enumerate_targets(const Scene& scene);

/// Exact pose equality (bitwise on every component).
bool same_pose_exact(const Pose& a, const Pose& b);
bool same_scene_exact(const Scene& a, const Scene& b);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j, const Catalog& catalog);

}  // namespace occgrasp
