#include "occgrasp/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "occgrasp/error.hpp"
#include "occgrasp/random.hpp"

namespace occgrasp {

PointCloud surface_sample(const TriMesh& mesh, int count, std::uint64_t seed) {
    if (count < 1) throw InputError("surface_sample: count must be >= 1");
    mesh.validate();
    std::vector<double> cumulative(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
        total += mesh.triangle_area(f);
        cumulative[f] = total;
    }
    if (!(total > 0.0)) throw InputError("surface_sample: mesh has zero surface area");

    TriMesh normals_source;
    const std::vector<Vec3>* normals = &mesh.face_normals;
    if (mesh.face_normals.size() != mesh.triangles.size()) {
        normals_source = mesh;
        normals_source.compute_face_normals();
        normals = &normals_source.face_normals;
    }

    Rng rng(mix_seed(seed));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PointCloud cloud;
    cloud.points.reserve(count);
    cloud.normals.reserve(count);
    for (int i = 0; i < count; ++i) {
        const double pick = unit(rng) * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
        if (it == cumulative.end()) --it;
        const auto f = static_cast<std::size_t>(it - cumulative.begin());
        const auto& t = mesh.triangles[f];
        const double r1 = std::sqrt(unit(rng));
        const double r2 = unit(rng);
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3& b = mesh.vertices[t[1]];
        const Vec3& c = mesh.vertices[t[2]];
        cloud.points.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
        cloud.normals.push_back((*normals)[f]);
    }
    return cloud;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace occgrasp
