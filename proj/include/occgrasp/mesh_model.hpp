#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "occgrasp/oriented_box.hpp"
#include "occgrasp/tri_mesh.hpp"

namespace occgrasp {

/// Bounding-volume hierarchy over the triangles of one mesh (mesh-local frame).
class Bvh {
public:
    struct Node {
        Aabb box;
        int left = -1;   // child indices; -1 for leaves
        int right = -1;
        int first = 0;   // leaf range into order()
        int count = 0;
    };

    struct Hit {
        double t = 0.0;
        int face = -1;
    };

    Bvh() = default;
    explicit Bvh(const TriMesh& mesh, int leaf_size = 4);

    /// Nearest hit with t in (t_min, t_max) along origin + t * dir.
    std::optional<Hit> ray_cast(const TriMesh& mesh, const Vec3& origin, const Vec3& dir,
                                double t_min, double t_max) const;
    /// Number of triangle crossings along the ray for t > t_min.
    int count_crossings(const TriMesh& mesh, const Vec3& origin, const Vec3& dir, double t_min) const;
    /// Visits every face whose bounding box overlaps `query`.
    void visit_overlapping(const Aabb& query, const std::function<bool(int)>& visit) const;

    const std::vector<Node>& nodes() const { return nodes_; }

private:
    int build(std::vector<int>& faces, std::vector<Aabb>& boxes, std::vector<Vec3>& centers,
              int begin, int end, int leaf_size);

    std::vector<Node> nodes_;
    std::vector<int> order_;
};

/// Immutable mesh plus its acceleration structure; shared between instances.
class MeshModel {
public:
    explicit MeshModel(TriMesh mesh);

    const TriMesh& mesh() const { return mesh_; }
    const Bvh& bvh() const { return bvh_; }
    const Aabb& bounds() const { return bounds_; }

    /// Parity test along a fixed skew direction; requires a watertight mesh.
    bool contains(const Vec3& p) const;
    /// Solid-box / solid-mesh overlap, box given in the mesh frame.
    bool intersects_box(const OrientedBox& box) const;

private:
    TriMesh mesh_;
    Bvh bvh_;
    Aabb bounds_;
};

using MeshModelPtr = std::shared_ptr<const MeshModel>;

MeshModelPtr make_mesh_model(TriMesh mesh);

/// A mesh placed in the world.
struct PlacedMesh {
    MeshModelPtr model;
    Pose pose;

    Aabb world_bounds() const;
};

struct RayHit {
    double distance = 0.0;
    int instance_index = -1;
    int face = -1;
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
};

/// Nearest intersection of the ray with any placed mesh. `direction` must be
/// unit length (InputError otherwise); `mesh_set` must be non-empty.
std::optional<RayHit> ray_cast(std::span<const PlacedMesh> mesh_set, const Vec3& origin,
                               const Vec3& direction);

/// As ray_cast but without precondition checks and with a distance cap; used
/// by the renderer on its hot path.
std::optional<RayHit> ray_cast_unchecked(std::span<const PlacedMesh> mesh_set,
                                         std::span<const Aabb> world_bounds, const Vec3& origin,
                                         const Vec3& direction, double max_distance);

}  // namespace occgrasp
