#include "occgrasp/oriented_box.hpp"

#include <algorithm>
#include <cmath>

namespace occgrasp {

OrientedBox OrientedBox::from_local_bounds(const Pose& frame, const Vec3& lo, const Vec3& hi) {
    OrientedBox box;
    box.axes = frame.rotation.to_matrix();
    box.center = frame.transform_point(0.5 * (lo + hi));
    box.half_extents = 0.5 * (hi - lo);
    return box;
}

Aabb OrientedBox::bounds() const {
    const Vec3 extent = axes.cwiseAbs() * half_extents;
    return {center - extent, center + extent};
}

std::array<Vec3, 8> OrientedBox::corners() const {
    std::array<Vec3, 8> out;
    for (int i = 0; i < 8; ++i) {
        const Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
        out[i] = center + axes * s.cwiseProduct(half_extents);
    }
    return out;
}

OrientedBox OrientedBox::transformed(const Pose& pose) const {
    return {pose.transform_point(center), pose.rotation.to_matrix() * axes, half_extents};
}

OrientedBox OrientedBox::inflated(double margin) const {
    return {center, axes, (half_extents.array() + margin).matrix()};
}

bool OrientedBox::contains(const Vec3& p) const {
    const Vec3 l = to_local(p);
    return (l.cwiseAbs().array() <= half_extents.array()).all();
}

namespace {

// True when `axis` separates the box (centered at origin, axis-aligned, half
// extents h) from the triangle v0 v1 v2.
bool separated_on(const Vec3& axis, const Vec3& h, const Vec3& v0, const Vec3& v1, const Vec3& v2) {
    if (axis.squaredNorm() < 1e-24) return false;
    const double p0 = axis.dot(v0), p1 = axis.dot(v1), p2 = axis.dot(v2);
    const double r = h.x() * std::abs(axis.x()) + h.y() * std::abs(axis.y()) + h.z() * std::abs(axis.z());
    return std::min({p0, p1, p2}) > r || std::max({p0, p1, p2}) < -r;
}

}  // namespace

bool box_intersects_triangle(const OrientedBox& box, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 v0 = box.to_local(a), v1 = box.to_local(b), v2 = box.to_local(c);
    const Vec3& h = box.half_extents;
    const Vec3 edges[3] = {v1 - v0, v2 - v1, v0 - v2};
    for (int i = 0; i < 3; ++i)
        if (separated_on(Vec3::Unit(i), h, v0, v1, v2)) return false;
    if (separated_on(edges[0].cross(edges[1]), h, v0, v1, v2)) return false;
    for (int i = 0; i < 3; ++i)
        for (const auto& e : edges)
            if (separated_on(Vec3::Unit(i).cross(e), h, v0, v1, v2)) return false;
    return true;
}

bool segment_intersects_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b,
                                 const Vec3& c) {
    // Moller-Trumbore on the segment parameter range [0, 1].
    const Vec3 dir = q - p;
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-300) return false;
    const double inv = 1.0 / det;
    const Vec3 tv = p - a;
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) return false;
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    const double t = e2.dot(qv) * inv;
    return t >= 0.0 && t <= 1.0;
}

}  // namespace occgrasp
