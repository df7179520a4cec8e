#pragma once

#include <cstdint>

#include "occgrasp/tri_mesh.hpp"

namespace occgrasp {

/// Area-weighted uniform surface samples with face normals. Throws InputError
/// for count < 1 or a zero-area mesh. Deterministic in `seed`.
PointCloud surface_sample(const TriMesh& mesh, int count, std::uint64_t seed);

/// Closest point on triangle abc to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace occgrasp
