#include "occgrasp/tri_mesh.hpp"

#include <cmath>
#include <map>
#include <string>

#include "occgrasp/error.hpp"

namespace occgrasp {

void TriMesh::compute_face_normals() {
    face_normals.resize(triangles.size());
    for (std::size_t f = 0; f < triangles.size(); ++f) {
        const auto& t = triangles[f];
        const Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
        const double len = n.norm();
        face_normals[f] = len > 0.0 ? Vec3(n / len) : Vec3::UnitZ();
    }
}

double TriMesh::triangle_area(std::size_t face) const {
    const auto& t = triangles[face];
    return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

double TriMesh::surface_area() const {
    double a = 0.0;
    for (std::size_t f = 0; f < triangles.size(); ++f) a += triangle_area(f);
    return a;
}

Aabb TriMesh::bounds() const {
    Aabb b;
    for (const auto& v : vertices) b.extend(v);
    return b;
}

TriMesh TriMesh::transformed(const Pose& pose) const {
    TriMesh out;
    out.triangles = triangles;
    out.vertices.reserve(vertices.size());
    for (const auto& v : vertices) out.vertices.push_back(pose.transform_point(v));
    out.face_normals.reserve(face_normals.size());
    for (const auto& n : face_normals) out.face_normals.push_back(pose.transform_vector(n));
    return out;
}

void TriMesh::validate() const {
    const int n = static_cast<int>(vertices.size());
    for (const auto& t : triangles)
        for (int i : t)
            if (i < 0 || i >= n) throw InputError("mesh: triangle index " + std::to_string(i) + " out of range");
    if (!face_normals.empty() && face_normals.size() != triangles.size())
        throw InputError("mesh: face normal count does not match triangle count");
}

bool TriMesh::is_watertight() const {
    std::map<std::pair<int, int>, int> edges;
    for (const auto& t : triangles) {
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            ++edges[{a, b}];
        }
    }
    if (edges.empty()) return false;
    for (const auto& [edge, count] : edges)
        if (count != 2) return false;
    return true;
}

void PointCloud::validate() const {
    for (const auto& p : points)
        if (!p.allFinite()) throw InputError("point cloud: non-finite coordinate");
    if (normals.empty()) return;
    if (normals.size() != points.size()) throw InputError("point cloud: normal count mismatch");
    for (const auto& n : normals)
        if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-6)
            throw InputError("point cloud: normal is not unit length");
}

Aabb PointCloud::bounds() const {
    Aabb b;
    for (const auto& p : points) b.extend(p);
    return b;
}

PointCloud PointCloud::transformed(const Pose& pose) const {
    PointCloud out;
    out.points.reserve(points.size());
    for (const auto& p : points) out.points.push_back(pose.transform_point(p));
    out.normals.reserve(normals.size());
    for (const auto& n : normals) out.normals.push_back(pose.transform_vector(n));
    return out;
}

void PointCloud::append(const PointCloud& other) {
    const bool keep_normals = (empty() || has_normals()) && other.has_normals();
    points.insert(points.end(), other.points.begin(), other.points.end());
    if (keep_normals)
        normals.insert(normals.end(), other.normals.begin(), other.normals.end());
    else
        normals.clear();
}

}  // namespace occgrasp
