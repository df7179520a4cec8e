#pragma once

#include <array>

#include "occgrasp/aabb.hpp"
#include "occgrasp/pose.hpp"

namespace occgrasp {

/// Solid box: center, orthonormal axes (columns), half extents along each axis.
struct OrientedBox {
    Vec3 center = Vec3::Zero();
    Mat3 axes = Mat3::Identity();
    Vec3 half_extents = Vec3::Zero();

    static OrientedBox from_local_bounds(const Pose& frame, const Vec3& lo, const Vec3& hi);

    Aabb bounds() const;
    std::array<Vec3, 8> corners() const;
    OrientedBox transformed(const Pose& pose) const;
    OrientedBox inflated(double margin) const;
    Vec3 to_local(const Vec3& p) const { return axes.transpose() * (p - center); }
    bool contains(const Vec3& p) const;
};

/// Separating-axis test between a solid box and a triangle.
bool box_intersects_triangle(const OrientedBox& box, const Vec3& a, const Vec3& b, const Vec3& c);

/// Closed-segment / triangle intersection (used by brute-force oracles and parity tests).
bool segment_intersects_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b,
                                 const Vec3& c);

}  // namespace occgrasp
