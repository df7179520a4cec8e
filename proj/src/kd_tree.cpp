#include "occgrasp/kd_tree.hpp"

#include "occgrasp/aabb.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace occgrasp {

KdTree::KdTree(std::span<const Vec3> points) : points_(points) {
    std::vector<int> idx(points.size());
    std::iota(idx.begin(), idx.end(), 0);
    nodes_.reserve(points.size());
    root_ = build(idx, 0, static_cast<int>(idx.size()), 0);
}

int KdTree::build(std::vector<int>& idx, int begin, int end, int depth) {
    if (begin >= end) return -1;
    Aabb box;
    for (int i = begin; i < end; ++i) box.extend(points_[idx[i]]);
    int axis = 0;
    box.size().maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(idx.begin() + begin, idx.begin() + mid, idx.begin() + end, [&](int a, int b) {
        if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
        return a < b;
    });
    const int node = static_cast<int>(nodes_.size());
    nodes_.push_back({idx[mid], axis, -1, -1});
    const int left = build(idx, begin, mid, depth + 1);
    const int right = build(idx, mid + 1, end, depth + 1);
    nodes_[node].left = left;
    nodes_[node].right = right;
    return node;
}

void KdTree::nearest_rec(int node, const Vec3& q, int& best, double& best_d2) const {
    if (node < 0) return;
    const Node& n = nodes_[node];
    const Vec3& p = points_[n.point];
    const double d2 = (p - q).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && n.point < best)) {
        best_d2 = d2;
        best = n.point;
    }
    const double diff = q[n.axis] - p[n.axis];
    const int near = diff <= 0.0 ? n.left : n.right;
    const int far = diff <= 0.0 ? n.right : n.left;
    nearest_rec(near, q, best, best_d2);
    if (diff * diff <= best_d2) nearest_rec(far, q, best, best_d2);
}

int KdTree::nearest(const Vec3& q, double* squared_distance) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    nearest_rec(root_, q, best, best_d2);
    if (squared_distance) *squared_distance = best_d2;
    return best;
}

std::vector<int> KdTree::k_nearest(const Vec3& q, int k) const {
    std::vector<int> out;
    if (root_ < 0 || k <= 0) return out;
    // Max-heap of (distance, index) holding the current k best.
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry> heap;
    const auto limit = static_cast<std::size_t>(k);
    auto visit = [&](auto&& self, int node) -> void {
        if (node < 0) return;
        const Node& n = nodes_[node];
        const Vec3& p = points_[n.point];
        const Entry e{(p - q).squaredNorm(), n.point};
        if (heap.size() < limit) {
            heap.push(e);
        } else if (e < heap.top()) {
            heap.pop();
            heap.push(e);
        }
        const double diff = q[n.axis] - p[n.axis];
        self(self, diff <= 0.0 ? n.left : n.right);
        const double bound = heap.size() < limit ? std::numeric_limits<double>::infinity() : heap.top().first;
        if (diff * diff <= bound) self(self, diff <= 0.0 ? n.right : n.left);
    };
    visit(visit, root_);
    out.resize(heap.size());
    for (int i = static_cast<int>(heap.size()) - 1; i >= 0; --i) {
        out[i] = heap.top().second;
        heap.pop();
    }
    return out;
}

std::vector<int> KdTree::within_radius(const Vec3& q, double radius) const {
    std::vector<int> out;
    const double r2 = radius * radius;
    std::vector<int> stack;
    if (root_ >= 0) stack.push_back(root_);
    while (!stack.empty()) {
        const int node = stack.back();
        stack.pop_back();
        const Node& n = nodes_[node];
        const Vec3& p = points_[n.point];
        if ((p - q).squaredNorm() <= r2) out.push_back(n.point);
        const double diff = q[n.axis] - p[n.axis];
        if (n.left >= 0 && diff <= radius) stack.push_back(n.left);
        if (n.right >= 0 && diff >= -radius) stack.push_back(n.right);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace occgrasp
