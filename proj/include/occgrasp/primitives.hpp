#pragma once

#include "occgrasp/tri_mesh.hpp"

namespace occgrasp {

// Catalog primitives. Each is watertight, wound outward, and expressed in its
// canonical frame: footprint centered on the origin, base on z = 0.

TriMesh make_box(double length, double width, double height);
TriMesh make_cylinder(double radius, double height, int segments = 24);
/// UV sphere with poles on the z axis, so the lowest vertex touches z = 0.
TriMesh make_sphere(double radius, int slices = 20, int stacks = 12);
/// Regular hexagonal prism; `circumradius` is the center-to-corner distance.
TriMesh make_hex_prism(double circumradius, double height);

}  // namespace occgrasp
