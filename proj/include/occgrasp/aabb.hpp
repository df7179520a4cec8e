#pragma once

#include <limits>

#include "occgrasp/quaternion.hpp"

namespace occgrasp {

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    bool empty() const { return (min.array() > max.array()).any(); }
    void extend(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    void extend(const Aabb& b) {
        min = min.cwiseMin(b.min);
        max = max.cwiseMax(b.max);
    }
    Aabb inflated(double margin) const {
        return {(min.array() - margin).matrix(), (max.array() + margin).matrix()};
    }
    Vec3 center() const { return 0.5 * (min + max); }
    Vec3 size() const { return max - min; }
    bool overlaps(const Aabb& b) const {
        return (min.array() <= b.max.array()).all() && (b.min.array() <= max.array()).all();
    }
    bool contains(const Vec3& p) const {
        return (min.array() <= p.array()).all() && (p.array() <= max.array()).all();
    }

    /// Slab test against the parameter interval [t_min, t_max].
    bool intersect_ray(const Vec3& origin, const Vec3& inv_dir, double t_min, double t_max) const {
        for (int a = 0; a < 3; ++a) {
            double t0 = (min[a] - origin[a]) * inv_dir[a];
            double t1 = (max[a] - origin[a]) * inv_dir[a];
            if (t0 > t1) std::swap(t0, t1);
            // NaN from 0 * inf leaves the bounds untouched.
            if (t0 > t_min) t_min = t0;
            if (t1 < t_max) t_max = t1;
            if (t_min > t_max) return false;
        }
        return true;
    }
};

}  // namespace occgrasp
