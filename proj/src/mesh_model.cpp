#include "occgrasp/mesh_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "occgrasp/error.hpp"

namespace occgrasp {

namespace {

// Watertight ray/triangle test (Woop, Benthin, Wald 2013), double precision.
struct WatertightRay {
    Vec3 origin;
    int kx = 0, ky = 1, kz = 2;
    double sx = 0.0, sy = 0.0, sz = 0.0;

    WatertightRay(const Vec3& o, const Vec3& dir) : origin(o) {
        dir.cwiseAbs().maxCoeff(&kz);
        kx = (kz + 1) % 3;
        ky = (kx + 1) % 3;
        if (dir[kz] < 0.0) std::swap(kx, ky);
        sx = dir[kx] / dir[kz];
        sy = dir[ky] / dir[kz];
        sz = 1.0 / dir[kz];
    }

    // Returns t (in units of |dir|) or NaN on miss.
    double intersect(const Vec3& v0, const Vec3& v1, const Vec3& v2) const {
        const Vec3 a = v0 - origin, b = v1 - origin, c = v2 - origin;
        const double ax = a[kx] - sx * a[kz], ay = a[ky] - sy * a[kz];
        const double bx = b[kx] - sx * b[kz], by = b[ky] - sy * b[kz];
        const double cx = c[kx] - sx * c[kz], cy = c[ky] - sy * c[kz];
        const double u = cx * by - cy * bx;
        const double v = ax * cy - ay * cx;
        const double w = bx * ay - by * ax;
        if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0))
            return std::numeric_limits<double>::quiet_NaN();
        const double det = u + v + w;
        if (det == 0.0) return std::numeric_limits<double>::quiet_NaN();
        const double t = (u * sz * a[kz] + v * sz * b[kz] + w * sz * c[kz]) / det;
        return t;
    }
};

Vec3 safe_inverse(const Vec3& d) {
    Vec3 inv;
    for (int i = 0; i < 3; ++i)
        inv[i] = d[i] != 0.0 ? 1.0 / d[i] : std::copysign(std::numeric_limits<double>::infinity(), d[i]);
    return inv;
}

}  // namespace

Bvh::Bvh(const TriMesh& mesh, int leaf_size) {
    const int n = static_cast<int>(mesh.triangles.size());
    std::vector<int> faces(n);
    std::iota(faces.begin(), faces.end(), 0);
    std::vector<Aabb> boxes(n);
    std::vector<Vec3> centers(n);
    for (int f = 0; f < n; ++f) {
        for (int k : mesh.triangles[f]) boxes[f].extend(mesh.vertices[k]);
        centers[f] = boxes[f].center();
    }
    if (n > 0) build(faces, boxes, centers, 0, n, std::max(1, leaf_size));
    order_ = std::move(faces);
}

int Bvh::build(std::vector<int>& faces, std::vector<Aabb>& boxes, std::vector<Vec3>& centers,
               int begin, int end, int leaf_size) {
    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    Aabb box, centroid_box;
    for (int i = begin; i < end; ++i) {
        box.extend(boxes[faces[i]]);
        centroid_box.extend(centers[faces[i]]);
    }
    nodes_[index].box = box;
    if (end - begin <= leaf_size) {
        nodes_[index].first = begin;
        nodes_[index].count = end - begin;
        return index;
    }
    int axis = 0;
    centroid_box.size().maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(faces.begin() + begin, faces.begin() + mid, faces.begin() + end,
                     [&](int a, int b) {
                         if (centers[a][axis] != centers[b][axis]) return centers[a][axis] < centers[b][axis];
                         return a < b;
                     });
    const int left = build(faces, boxes, centers, begin, mid, leaf_size);
    const int right = build(faces, boxes, centers, mid, end, leaf_size);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
}

std::optional<Bvh::Hit> Bvh::ray_cast(const TriMesh& mesh, const Vec3& origin, const Vec3& dir,
                                      double t_min, double t_max) const {
    if (nodes_.empty()) return std::nullopt;
    const WatertightRay ray(origin, dir);
    const Vec3 inv = safe_inverse(dir);
    std::optional<Hit> best;
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (!node.box.intersect_ray(origin, inv, t_min, t_max)) continue;
        if (node.left < 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const int f = order_[i];
                const auto& tri = mesh.triangles[f];
                const double t = ray.intersect(mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                               mesh.vertices[tri[2]]);
                if (t > t_min && t < t_max) {
                    // Ties resolve to the lower face index for determinism.
                    if (!best || t < best->t || (t == best->t && f < best->face)) best = Hit{t, f};
                    t_max = t;
                }
            }
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return best;
}

int Bvh::count_crossings(const TriMesh& mesh, const Vec3& origin, const Vec3& dir, double t_min) const {
    if (nodes_.empty()) return 0;
    const WatertightRay ray(origin, dir);
    const Vec3 inv = safe_inverse(dir);
    const double t_max = std::numeric_limits<double>::infinity();
    int count = 0;
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (!node.box.intersect_ray(origin, inv, t_min, t_max)) continue;
        if (node.left < 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const auto& tri = mesh.triangles[order_[i]];
                const double t = ray.intersect(mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                               mesh.vertices[tri[2]]);
                if (t > t_min) ++count;
            }
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return count;
}

void Bvh::visit_overlapping(const Aabb& query, const std::function<bool(int)>& visit) const {
    if (nodes_.empty()) return;
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (!node.box.overlaps(query)) continue;
        if (node.left < 0) {
            for (int i = node.first; i < node.first + node.count; ++i)
                if (!visit(order_[i])) return;
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
}

MeshModel::MeshModel(TriMesh mesh) : mesh_(std::move(mesh)) {
    mesh_.validate();
    if (mesh_.face_normals.size() != mesh_.triangles.size()) mesh_.compute_face_normals();
    bvh_ = Bvh(mesh_);
    bounds_ = mesh_.bounds();
}

bool MeshModel::contains(const Vec3& p) const {
    if (!bounds_.contains(p)) return false;
    // Irrational-ish direction keeps the ray off edges and vertices of axis-aligned geometry.
    static const Vec3 dir = Vec3(0.5773502691896258, 0.6123724356957945, 0.5400617248673217).normalized();
    return (bvh_.count_crossings(mesh_, p, dir, 0.0) % 2) == 1;
}

bool MeshModel::intersects_box(const OrientedBox& box) const {
    const Aabb query = box.bounds();
    if (!query.overlaps(bounds_)) return false;
    bool hit = false;
    bvh_.visit_overlapping(query, [&](int f) {
        const auto& t = mesh_.triangles[f];
        if (box_intersects_triangle(box, mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]])) {
            hit = true;
            return false;
        }
        return true;
    });
    if (hit) return true;
    // No surface crossing: either disjoint or the box is buried inside the solid.
    return contains(box.center);
}

MeshModelPtr make_mesh_model(TriMesh mesh) { return std::make_shared<const MeshModel>(std::move(mesh)); }

Aabb PlacedMesh::world_bounds() const {
    const Aabb local = model->bounds();
    const OrientedBox box = OrientedBox::from_local_bounds(pose, local.min, local.max);
    return box.bounds();
}

std::optional<RayHit> ray_cast_unchecked(std::span<const PlacedMesh> mesh_set,
                                         std::span<const Aabb> world_bounds, const Vec3& origin,
                                         const Vec3& direction, double max_distance) {
    std::optional<RayHit> best;
    const Vec3 inv = safe_inverse(direction);
    for (std::size_t i = 0; i < mesh_set.size(); ++i) {
        const double limit = best ? best->distance : max_distance;
        if (!world_bounds.empty() && !world_bounds[i].intersect_ray(origin, inv, 0.0, limit)) continue;
        const PlacedMesh& pm = mesh_set[i];
        const Pose inv_pose = pm.pose.inverse();
        const Vec3 o = inv_pose.transform_point(origin);
        const Vec3 d = inv_pose.transform_vector(direction);
        const auto hit = pm.model->bvh().ray_cast(pm.model->mesh(), o, d, 0.0, limit);
        if (hit && (!best || hit->t < best->distance)) {
            RayHit h;
            h.distance = hit->t;
            h.instance_index = static_cast<int>(i);
            h.face = hit->face;
            h.point = origin + hit->t * direction;
            h.normal = pm.pose.transform_vector(pm.model->mesh().face_normals[hit->face]);
            best = h;
        }
    }
    return best;
}

std::optional<RayHit> ray_cast(std::span<const PlacedMesh> mesh_set, const Vec3& origin,
                               const Vec3& direction) {
    if (mesh_set.empty()) throw InputError("ray_cast: empty mesh set");
    if (!direction.allFinite() || std::abs(direction.norm() - 1.0) > 1e-9)
        throw InputError("ray_cast: direction must be unit length");
    return ray_cast_unchecked(mesh_set, {}, origin, direction, std::numeric_limits<double>::infinity());
}

}  // namespace occgrasp
