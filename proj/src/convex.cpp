#include "occgrasp/convex.hpp"

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>

#include "occgrasp/error.hpp"

namespace occgrasp {

namespace {

Vec3 support(std::span<const Vec3> pts, const Vec3& d) {
    double best = -std::numeric_limits<double>::infinity();
    Vec3 out = pts.front();
    for (const auto& p : pts) {
        const double s = p.dot(d);
        if (s > best) {
            best = s;
            out = p;
        }
    }
    return out;
}

struct Simplex {
    std::array<Vec3, 4> v;
    int n = 0;
};

// Closest point to the origin of conv(simplex). Enumerates every face of the
// simplex (Johnson's distance sub-algorithm in brute-force form) and keeps the
// smallest-norm projection whose barycentric weights are all non-negative.
// The simplex is reduced to the supporting face.
Vec3 closest_to_origin(Simplex& s) {
    double best = std::numeric_limits<double>::infinity();
    Vec3 best_point = s.v[0];
    int best_mask = 1;
    for (int mask = 1; mask < (1 << s.n); ++mask) {
        std::array<int, 4> ids{};
        int m = 0;
        for (int i = 0; i < s.n; ++i)
            if (mask & (1 << i)) ids[m++] = i;
        Vec3 point;
        if (m == 1) {
            point = s.v[ids[0]];
        } else {
            // Minimize |v0 + sum_j mu_j (vj - v0)| over mu, then check weights.
            Eigen::MatrixXd e(3, m - 1);
            for (int j = 1; j < m; ++j) e.col(j - 1) = s.v[ids[j]] - s.v[ids[0]];
            // Affinely dependent subsets are skipped; their hull is covered by smaller faces.
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(e);
            qr.setThreshold(1e-10);
            if (qr.rank() < m - 1) continue;
            const Eigen::VectorXd mu = qr.solve(-s.v[ids[0]]);
            double sum = 0.0;
            bool valid = true;
            for (int j = 0; j < m - 1; ++j) {
                if (mu[j] < 0.0) valid = false;
                sum += mu[j];
            }
            if (!valid || sum > 1.0) continue;
            point = s.v[ids[0]] + e * mu;
        }
        const double d = point.squaredNorm();
        if (d < best - 1e-18 || (d <= best && __builtin_popcount(mask) < __builtin_popcount(best_mask))) {
            best = d;
            best_point = point;
            best_mask = mask;
        }
    }
    Simplex reduced;
    for (int i = 0; i < s.n; ++i)
        if (best_mask & (1 << i)) reduced.v[reduced.n++] = s.v[i];
    s = reduced;
    return best_point;
}

}  // namespace

double convex_hull_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw InputError("convex_hull_distance: empty point set");
    auto minkowski_support = [&](const Vec3& d) -> Vec3 { return support(a, d) - support(b, -d); };
    Vec3 v = a.front() - b.front();
    Simplex s;
    s.v[0] = v;
    s.n = 1;
    for (int iter = 0; iter < 128; ++iter) {
        const double vv = v.squaredNorm();
        if (vv < 1e-24) return 0.0;
        const Vec3 w = minkowski_support(-v);
        // Converged when w makes no progress toward the origin.
        if (vv - v.dot(w) <= 1e-12 * vv + 1e-20) return std::sqrt(vv);
        bool duplicate = false;
        for (int i = 0; i < s.n; ++i)
            if ((s.v[i] - w).squaredNorm() < 1e-24) duplicate = true;
        if (duplicate) return std::sqrt(vv);
        s.v[s.n++] = w;
        v = closest_to_origin(s);
        if (s.n == 4) return 0.0;  // origin enclosed by a full tetrahedron
    }
    return v.norm();
}

}  // namespace occgrasp
