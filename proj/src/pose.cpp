#include "occgrasp/pose.hpp"

namespace occgrasp {

Pose Pose::inverse() const {
    const Quaternion inv = rotation.conjugate();
    return {inv, -inv.rotate(translation)};
}

Pose operator*(const Pose& a, const Pose& b) {
    return {(a.rotation * b.rotation).normalized(), a.rotation.rotate(b.translation) + a.translation};
}

}  // namespace occgrasp
