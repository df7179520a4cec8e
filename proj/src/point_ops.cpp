#include "occgrasp/point_ops.hpp"

#include <Eigen/Eigenvalues>

#include "occgrasp/kd_tree.hpp"

namespace occgrasp {

PointCloud estimate_normals(const PointCloud& cloud, const Vec3& viewpoint, int k) {
    PointCloud out;
    out.points = cloud.points;
    out.normals.resize(cloud.size());
    const KdTree tree(cloud.points);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.points[i];
        const Vec3 to_view = (viewpoint - p).normalized();
        Vec3 n = to_view;
        if (cloud.size() >= 3) {
            const auto nn = tree.k_nearest(p, k);
            Vec3 mean = Vec3::Zero();
            for (int j : nn) mean += cloud.points[j];
            mean /= static_cast<double>(nn.size());
            Mat3 cov = Mat3::Zero();
            for (int j : nn) {
                const Vec3 d = cloud.points[j] - mean;
                cov += d * d.transpose();
            }
            Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
            const Vec3 candidate = solver.eigenvectors().col(0);
            if (candidate.allFinite() && candidate.norm() > 0.5) n = candidate.normalized();
        }
        if (n.dot(to_view) < 0.0) n = -n;
        out.normals[i] = n;
    }
    return out;
}

}  // namespace occgrasp
