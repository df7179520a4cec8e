#pragma once

#include <span>
#include <vector>

#include "occgrasp/quaternion.hpp"

namespace occgrasp {

/// Static 3-d tree over a borrowed point array; exact nearest / radius queries.
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(std::span<const Vec3> points);

    /// Index of the nearest point (lowest index on ties) or -1 when empty.
    int nearest(const Vec3& q, double* squared_distance = nullptr) const;
    /// Indices of the k nearest points ordered by distance.
    std::vector<int> k_nearest(const Vec3& q, int k) const;
    /// All indices within `radius` (inclusive), in ascending index order.
    std::vector<int> within_radius(const Vec3& q, double radius) const;

    bool empty() const { return points_.empty(); }

private:
    struct Node {
        int point = -1;
        int axis = 0;
        int left = -1;
        int right = -1;
    };
    int build(std::vector<int>& idx, int begin, int end, int depth);
    void nearest_rec(int node, const Vec3& q, int& best, double& best_d2) const;

    std::span<const Vec3> points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace occgrasp
