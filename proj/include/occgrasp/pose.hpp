#pragma once

#include "occgrasp/quaternion.hpp"

namespace occgrasp {

/// Rigid transform x -> R x + t.
struct Pose {
    Quaternion rotation;
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return {}; }
    static Pose from_translation(const Vec3& t) { return {Quaternion::identity(), t}; }

    Pose inverse() const;
    Vec3 transform_point(const Vec3& p) const { return rotation.rotate(p) + translation; }
    Vec3 transform_vector(const Vec3& v) const { return rotation.rotate(v); }
};

/// a * b applies b first, then a.
Pose operator*(const Pose& a, const Pose& b);

}  // namespace occgrasp
