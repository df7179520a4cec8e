#pragma once

#include <array>
#include <vector>

#include "occgrasp/aabb.hpp"
#include "occgrasp/pose.hpp"

namespace occgrasp {

/// Indexed triangle mesh. Triangles wind counter-clockwise seen from outside.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    /// Optional per-face outward normals; compute_face_normals() fills them.
    std::vector<Vec3> face_normals;

    void compute_face_normals();
    double triangle_area(std::size_t face) const;
    double surface_area() const;
    Aabb bounds() const;
    TriMesh transformed(const Pose& pose) const;

    /// Throws InputError when an index is out of range.
    void validate() const;
    /// Every undirected edge is shared by exactly two triangles.
    bool is_watertight() const;
};

/// Points with optional unit normals (empty, or one per point).
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_normals() const { return !normals.empty() && normals.size() == points.size(); }

    /// Throws InputError on NaN/Inf points, mismatched or non-unit normals.
    void validate() const;
    Aabb bounds() const;
    PointCloud transformed(const Pose& pose) const;
    void append(const PointCloud& other);
};

}  // namespace occgrasp
