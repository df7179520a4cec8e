#include "occgrasp/primitives.hpp"

#include <cmath>
#include <numbers>

#include "occgrasp/error.hpp"

namespace occgrasp {

namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string("primitive: ") + what + " must be positive");
}

// Prism over a convex CCW polygon (seen from +z), base at z = 0.
TriMesh make_prism(const std::vector<Eigen::Vector2d>& polygon, double height) {
    TriMesh m;
    const int n = static_cast<int>(polygon.size());
    for (const auto& p : polygon) m.vertices.emplace_back(p.x(), p.y(), 0.0);
    for (const auto& p : polygon) m.vertices.emplace_back(p.x(), p.y(), height);
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        m.triangles.push_back({i, j, n + j});
        m.triangles.push_back({i, n + j, n + i});
    }
    for (int i = 1; i + 1 < n; ++i) {
        m.triangles.push_back({0, i + 1, i});          // bottom, facing -z
        m.triangles.push_back({n, n + i, n + i + 1});  // top, facing +z
    }
    m.compute_face_normals();
    return m;
}

}  // namespace

TriMesh make_box(double length, double width, double height) {
    require_positive(length, "length");
    require_positive(width, "width");
    require_positive(height, "height");
    const double a = 0.5 * length, b = 0.5 * width;
    return make_prism({{-a, -b}, {a, -b}, {a, b}, {-a, b}}, height);
}

TriMesh make_cylinder(double radius, double height, int segments) {
    require_positive(radius, "radius");
    require_positive(height, "height");
    if (segments < 3) throw InputError("primitive: cylinder needs at least 3 segments");
    std::vector<Eigen::Vector2d> poly;
    for (int i = 0; i < segments; ++i) {
        const double t = 2.0 * std::numbers::pi * i / segments;
        poly.emplace_back(radius * std::cos(t), radius * std::sin(t));
    }
    return make_prism(poly, height);
}

TriMesh make_hex_prism(double circumradius, double height) {
    require_positive(circumradius, "circumradius");
    require_positive(height, "height");
    std::vector<Eigen::Vector2d> poly;
    for (int i = 0; i < 6; ++i) {
        const double t = std::numbers::pi / 3.0 * i;
        poly.emplace_back(circumradius * std::cos(t), circumradius * std::sin(t));
    }
    return make_prism(poly, height);
}

TriMesh make_sphere(double radius, int slices, int stacks) {
    require_positive(radius, "radius");
    if (slices < 3 || stacks < 2) throw InputError("primitive: sphere tessellation too coarse");
    TriMesh m;
    m.vertices.emplace_back(0.0, 0.0, 0.0);  // south pole on the table
    for (int s = 1; s < stacks; ++s) {
        const double phi = std::numbers::pi * s / stacks;  // from the south pole
        const double z = radius - radius * std::cos(phi);
        const double r = radius * std::sin(phi);
        for (int i = 0; i < slices; ++i) {
            const double t = 2.0 * std::numbers::pi * i / slices;
            m.vertices.emplace_back(r * std::cos(t), r * std::sin(t), z);
        }
    }
    const int north = static_cast<int>(m.vertices.size());
    m.vertices.emplace_back(0.0, 0.0, 2.0 * radius);
    auto ring = [&](int s, int i) { return 1 + (s - 1) * slices + (i % slices); };
    for (int i = 0; i < slices; ++i) m.triangles.push_back({0, ring(1, i + 1), ring(1, i)});
    for (int s = 1; s + 1 < stacks; ++s) {
        for (int i = 0; i < slices; ++i) {
            m.triangles.push_back({ring(s, i), ring(s, i + 1), ring(s + 1, i + 1)});
            m.triangles.push_back({ring(s, i), ring(s + 1, i + 1), ring(s + 1, i)});
        }
    }
    for (int i = 0; i < slices; ++i) m.triangles.push_back({ring(stacks - 1, i), ring(stacks - 1, i + 1), north});
    m.compute_face_normals();
    return m;
}

}  // namespace occgrasp
