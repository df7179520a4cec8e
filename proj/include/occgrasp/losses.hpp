#pragma once

#include <functional>
#include <vector>

#include "occgrasp/quaternion.hpp"

namespace occgrasp {

struct GraspPrediction {
    double q_hat = 0.5;  // (0, 1)
    Quaternion r_hat;
    double w_hat = 0.0;
};

struct GraspTarget {
    int q = 0;  // 0 or 1
    Quaternion r;
    double w = 0.0;
    Vec3 wrist_axis = Vec3::UnitZ();  // in the grasp frame
};

/// Binary cross-entropy. Throws InputError unless 0 < q_hat < 1 and q in {0, 1}.
double quality_loss(double q_hat, int q);
double quality_loss_grad(double q_hat, int q);

double width_loss(double w_hat, double w);
double width_loss_grad(double w_hat, double w);

/// r composed with a half turn about `wrist_axis`.
Quaternion mirrored_rotation(const Quaternion& r, const Vec3& wrist_axis);

/// min(1 - |r_hat . r|, 1 - |r_hat . r_pi|). Throws InputError on non-unit inputs.
double rotation_loss(const Quaternion& r_hat, const Quaternion& r, const Vec3& wrist_axis);
/// Gradient with respect to the four components (w, x, y, z) of r_hat.
Eigen::Vector4d rotation_loss_grad(const Quaternion& r_hat, const Quaternion& r, const Vec3& wrist_axis);

/// L_q + q (L_r + L_w).
double total_loss(const GraspPrediction& pred, const GraspTarget& target);

struct TotalLossGradient {
    double q_hat = 0.0;
    Eigen::Vector4d r_hat = Eigen::Vector4d::Zero();
    double w_hat = 0.0;
};
TotalLossGradient total_loss_grad(const GraspPrediction& pred, const GraspTarget& target);

/// Fraction of successes. Throws InputError on an empty list.
double gsr(const std::vector<bool>& outcomes);

/// A scalar loss over a flat parameter vector, with its analytic gradient.
/// Entries [q, q + 4) for each q in `quaternion_blocks` hold a unit quaternion
/// (w, x, y, z) and are perturbed on the sphere.
struct LossFunction {
    std::function<double(const std::vector<double>&)> value;
    std::function<std::vector<double>(const std::vector<double>&)> gradient;
    std::vector<int> quaternion_blocks;
    /// Throws KinkError when finite differences of half-width eps would straddle
    /// a non-differentiable point or leave the domain.
    std::function<void(const std::vector<double>&, double eps)> check_smooth;
};

LossFunction quality_loss_function(int q);          // inputs {q_hat}
LossFunction width_loss_function(double w);         // inputs {w_hat}
LossFunction rotation_loss_function(const Quaternion& r, const Vec3& wrist_axis);  // inputs {r_hat}
LossFunction total_loss_function(const GraspTarget& target);  // inputs {q_hat, w_hat, r_hat}

/// Central differences against the analytic gradient. Scalar coordinates are
/// perturbed one at a time; quaternion blocks along three tangent directions
/// with re-normalization. Returns the largest
/// |numeric - analytic| / max(|numeric|, |analytic|, 1e-8).
double grad_check(const LossFunction& loss, const std::vector<double>& inputs, double epsilon = 1e-6);

}  // namespace occgrasp
