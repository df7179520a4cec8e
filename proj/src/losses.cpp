#include "occgrasp/losses.hpp"

#include <cmath>
#include <numbers>

#include "occgrasp/error.hpp"

namespace occgrasp {

namespace {

constexpr double kUnitTolerance = 1e-9;

Eigen::Vector4d vec(const Quaternion& q) { return {q.w, q.x, q.y, q.z}; }
Quaternion quat(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }

void require_unit(const Quaternion& q, const char* what) {
    if (std::abs(q.norm() - 1.0) > kUnitTolerance) throw InputError(std::string(what) + " must be a unit quaternion");
}

void check_quality_inputs(double q_hat, int q) {
    if (!(q_hat > 0.0 && q_hat < 1.0)) throw InputError("quality_loss: q_hat must lie strictly inside (0, 1)");
    if (q != 0 && q != 1) throw InputError("quality_loss: q must be 0 or 1");
}

// Signed dot products with both ground-truth branches.
std::pair<double, double> branch_dots(const Quaternion& r_hat, const Quaternion& r, const Vec3& axis) {
    require_unit(r_hat, "rotation_loss: r_hat");
    require_unit(r, "rotation_loss: r");
    if (std::abs(axis.norm() - 1.0) > kUnitTolerance) throw InputError("rotation_loss: wrist_axis must be unit");
    return {dot(r_hat, r), dot(r_hat, mirrored_rotation(r, axis))};
}

Eigen::Vector4d tangent_basis_vector(const Eigen::Vector4d& q, int k) {
    // Gram-Schmidt of the coordinate axes against q, skipping the most aligned one.
    int skip = 0;
    q.cwiseAbs().maxCoeff(&skip);
    std::vector<Eigen::Vector4d> basis;
    for (int a = 0; a < 4 && static_cast<int>(basis.size()) <= k; ++a) {
        if (a == skip) continue;
        Eigen::Vector4d e = Eigen::Vector4d::Unit(a);
        e -= e.dot(q) * q;
        for (const auto& b : basis) e -= e.dot(b) * b;
        basis.push_back(e.normalized());
    }
    return basis[k];
}

}  // namespace

double quality_loss(double q_hat, int q) {
    check_quality_inputs(q_hat, q);
    return q == 1 ? -std::log(q_hat) : -std::log1p(-q_hat);
}

double quality_loss_grad(double q_hat, int q) {
    check_quality_inputs(q_hat, q);
    return q == 1 ? -1.0 / q_hat : 1.0 / (1.0 - q_hat);
}

double width_loss(double w_hat, double w) {
    if (!std::isfinite(w_hat) || !std::isfinite(w)) throw InputError("width_loss: widths must be finite");
    return (w_hat - w) * (w_hat - w);
}

double width_loss_grad(double w_hat, double w) {
    if (!std::isfinite(w_hat) || !std::isfinite(w)) throw InputError("width_loss: widths must be finite");
    return 2.0 * (w_hat - w);
}

Quaternion mirrored_rotation(const Quaternion& r, const Vec3& axis) {
    return r * quaternion_about_axis(axis, std::numbers::pi);
}

double rotation_loss(const Quaternion& r_hat, const Quaternion& r, const Vec3& axis) {
    const auto [d0, d1] = branch_dots(r_hat, r, axis);
    return std::clamp(std::min(1.0 - std::abs(d0), 1.0 - std::abs(d1)), 0.0, 1.0);
}

Eigen::Vector4d rotation_loss_grad(const Quaternion& r_hat, const Quaternion& r, const Vec3& axis) {
    const auto [d0, d1] = branch_dots(r_hat, r, axis);
    const bool first = std::abs(d0) >= std::abs(d1);
    const double d = first ? d0 : d1;
    const Eigen::Vector4d g = first ? vec(r) : vec(mirrored_rotation(r, axis));
    return -(d >= 0 ? 1.0 : -1.0) * g;
}

double total_loss(const GraspPrediction& p, const GraspTarget& t) {
    const double lq = quality_loss(p.q_hat, t.q);
    if (t.q == 0) return lq;
    return lq + rotation_loss(p.r_hat, t.r, t.wrist_axis) + width_loss(p.w_hat, t.w);
}

TotalLossGradient total_loss_grad(const GraspPrediction& p, const GraspTarget& t) {
    TotalLossGradient g;
    g.q_hat = quality_loss_grad(p.q_hat, t.q);
    if (t.q == 0) return g;
    g.r_hat = rotation_loss_grad(p.r_hat, t.r, t.wrist_axis);
    g.w_hat = width_loss_grad(p.w_hat, t.w);
    return g;
}

double gsr(const std::vector<bool>& outcomes) {
    if (outcomes.empty()) throw InputError("gsr: no outcomes");
    std::size_t ok = 0;
    for (bool b : outcomes) ok += b;
    return static_cast<double>(ok) / static_cast<double>(outcomes.size());
}

LossFunction quality_loss_function(int q) {
    LossFunction f;
    f.value = [q](const std::vector<double>& x) { return quality_loss(x[0], q); };
    f.gradient = [q](const std::vector<double>& x) { return std::vector<double>{quality_loss_grad(x[0], q)}; };
    f.check_smooth = [q](const std::vector<double>& x, double eps) {
        check_quality_inputs(x[0], q);
        if (x[0] - eps <= 0.0 || x[0] + eps >= 1.0) throw KinkError("quality_loss: stencil leaves (0, 1)");
    };
    return f;
}

LossFunction width_loss_function(double w) {
    LossFunction f;
    f.value = [w](const std::vector<double>& x) { return width_loss(x[0], w); };
    f.gradient = [w](const std::vector<double>& x) { return std::vector<double>{width_loss_grad(x[0], w)}; };
    f.check_smooth = [](const std::vector<double>&, double) {};
    return f;
}

namespace {

void check_rotation_smooth(const Quaternion& r_hat, const Quaternion& r, const Vec3& axis, double eps) {
    const auto [d0, d1] = branch_dots(r_hat, r, axis);
    // |.| kink where the selected dot product vanishes, min kink where the branches tie.
    const double margin = 10.0 * eps;
    if (std::abs(std::abs(d0) - std::abs(d1)) < margin)
        throw KinkError("rotation_loss: both mirrored branches are equally close");
    if (std::max(std::abs(d0), std::abs(d1)) < margin) throw KinkError("rotation_loss: dot product at zero");
}

}  // namespace

LossFunction rotation_loss_function(const Quaternion& r, const Vec3& axis) {
    LossFunction f;
    f.value = [r, axis](const std::vector<double>& x) { return rotation_loss(quat({x[0], x[1], x[2], x[3]}), r, axis); };
    f.gradient = [r, axis](const std::vector<double>& x) {
        const Eigen::Vector4d g = rotation_loss_grad(quat({x[0], x[1], x[2], x[3]}), r, axis);
        return std::vector<double>{g[0], g[1], g[2], g[3]};
    };
    f.quaternion_blocks = {0};
    f.check_smooth = [r, axis](const std::vector<double>& x, double eps) {
        check_rotation_smooth(quat({x[0], x[1], x[2], x[3]}), r, axis, eps);
    };
    return f;
}

LossFunction total_loss_function(const GraspTarget& t) {
    auto unpack = [](const std::vector<double>& x) {
        return GraspPrediction{x[0], quat({x[2], x[3], x[4], x[5]}), x[1]};
    };
    LossFunction f;
    f.value = [t, unpack](const std::vector<double>& x) { return total_loss(unpack(x), t); };
    f.gradient = [t, unpack](const std::vector<double>& x) {
        const auto g = total_loss_grad(unpack(x), t);
        return std::vector<double>{g.q_hat, g.w_hat, g.r_hat[0], g.r_hat[1], g.r_hat[2], g.r_hat[3]};
    };
    f.quaternion_blocks = {2};
    f.check_smooth = [t, unpack](const std::vector<double>& x, double eps) {
        quality_loss_function(t.q).check_smooth({x[0]}, eps);
        if (t.q == 1) check_rotation_smooth(unpack(x).r_hat, t.r, t.wrist_axis, eps);
    };
    return f;
}

double grad_check(const LossFunction& f, const std::vector<double>& x, double eps) {
    if (!(eps > 0)) throw InputError("grad_check: epsilon must be positive");
    f.check_smooth(x, eps);
    const std::vector<double> g = f.gradient(x);
    if (g.size() != x.size()) throw InputError("grad_check: gradient size mismatch");
    std::vector<bool> in_block(x.size(), false);
    for (int b : f.quaternion_blocks)
        for (int k = 0; k < 4; ++k) in_block.at(b + k) = true;
    double worst = 0.0;
    auto compare = [&](double numeric, double analytic) {
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
        worst = std::max(worst, std::abs(numeric - analytic) / denom);
    };
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (in_block[i]) continue;
        std::vector<double> hi = x, lo = x;
        hi[i] += eps;
        lo[i] -= eps;
        compare((f.value(hi) - f.value(lo)) / ((hi[i] - x[i]) + (x[i] - lo[i])), g[i]);
    }
    for (int b : f.quaternion_blocks) {
        const Eigen::Vector4d q(x[b], x[b + 1], x[b + 2], x[b + 3]);
        const Eigen::Vector4d gq(g[b], g[b + 1], g[b + 2], g[b + 3]);
        for (int k = 0; k < 3; ++k) {
            const Eigen::Vector4d e = tangent_basis_vector(q, k);
            std::vector<double> hi = x, lo = x;
            const Eigen::Vector4d qh = (q + eps * e).normalized(), ql = (q - eps * e).normalized();
            for (int c = 0; c < 4; ++c) {
                hi[b + c] = qh[c];
                lo[b + c] = ql[c];
            }
            compare((f.value(hi) - f.value(lo)) / (2.0 * eps), gq.dot(e));
        }
    }
    return worst;
}

}  // namespace occgrasp
