#pragma once

#include "occgrasp/tri_mesh.hpp"

namespace occgrasp {

/// PCA normals from the k nearest neighbours, flipped to face `viewpoint`.
/// Clouds with fewer than 3 points get normals pointing at the viewpoint.
PointCloud estimate_normals(const PointCloud& cloud, const Vec3& viewpoint, int k = 12);

}  // namespace occgrasp
