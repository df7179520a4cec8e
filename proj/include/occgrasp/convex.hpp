#pragma once

#include <span>

#include "occgrasp/quaternion.hpp"

namespace occgrasp {

/// Euclidean distance between the convex hulls of two point sets (GJK).
/// Returns 0 when the hulls overlap. Exact for convex meshes; for non-convex
/// meshes it is a lower bound on the true mesh distance.
double convex_hull_distance(std::span<const Vec3> a, std::span<const Vec3> b);

}  // namespace occgrasp
