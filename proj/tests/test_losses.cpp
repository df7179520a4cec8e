#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "occgrasp/error.hpp"
#include "occgrasp/losses.hpp"
#include "occgrasp/random.hpp"

using namespace occgrasp;

namespace {

Quaternion random_unit(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Quaternion::from_components(n(rng), n(rng), n(rng), n(rng)).normalized();
}

Vec3 random_axis(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Vec3(n(rng), n(rng), n(rng)).normalized();
}

std::vector<double> qvec(const Quaternion& q) { return {q.w, q.x, q.y, q.z}; }

}  // namespace

TEST(QualityLoss, ClosedForms) {
    EXPECT_NEAR(quality_loss(0.5, 1), std::log(2.0), 1e-15);
    EXPECT_NEAR(quality_loss(0.5, 1), 0.6931, 1e-4);
    EXPECT_NEAR(quality_loss(0.9, 0), -std::log(0.1), 1e-14);
    EXPECT_NEAR(quality_loss(0.9, 0), 2.3026, 1e-4);
    EXPECT_LT(quality_loss(1.0 - 1e-9, 1), 1.1e-9);
    EXPECT_LT(quality_loss(1e-9, 0), 1.1e-9);
    EXPECT_THROW(quality_loss(0.0, 1), InputError);
    EXPECT_THROW(quality_loss(1.0, 0), InputError);
    EXPECT_THROW(quality_loss(0.5, 2), InputError);
}

TEST(WidthLoss, ClosedForms) {
    EXPECT_EQ(width_loss(0.04, 0.04), 0.0);
    EXPECT_NEAR(width_loss(0.05, 0.03), 4e-4, 1e-18);
    EXPECT_EQ(width_loss(0.03 + 0.0078125, 0.03), width_loss(0.03 - 0.0078125, 0.03));
}

TEST(RotationLoss, Examples) {
    const Vec3 z = Vec3::UnitZ();
    const Quaternion id;
    EXPECT_EQ(rotation_loss(id, id, z), 0.0);
    EXPECT_NEAR(rotation_loss(mirrored_rotation(id, z), id, z), 0.0, 1e-15);
    const Quaternion quarter = quaternion_about_axis(z, std::numbers::pi / 2);
    EXPECT_NEAR(rotation_loss(quarter, id, z), 1.0 - std::cos(std::numbers::pi / 4), 1e-15);
    EXPECT_NEAR(rotation_loss(quarter, id, z), 0.29289, 1e-5);
    EXPECT_THROW(rotation_loss(Quaternion{1, 1, 0, 0}, id, z), InputError);
    EXPECT_THROW(rotation_loss(id, id, Vec3(0, 0, 2)), InputError);
}

TEST(RotationLoss, OrbitZeroAndSignInvariance) {
    Rng rng(mix_seed(11));
    for (int i = 0; i < 1000; ++i) {
        const Quaternion r = random_unit(rng);
        const Vec3 axis = random_axis(rng);
        EXPECT_LE(rotation_loss(r, r, axis), 1e-12);
        EXPECT_LE(rotation_loss(mirrored_rotation(r, axis), r, axis), 1e-12);
        EXPECT_LE(rotation_loss(-mirrored_rotation(r, axis), r, axis), 1e-12);
        const Quaternion h = random_unit(rng);
        const double l = rotation_loss(h, r, axis);
        EXPECT_GE(l, 0.0);
        EXPECT_LE(l, 1.0);
        EXPECT_EQ(rotation_loss(-h, r, axis), l);
        EXPECT_EQ(rotation_loss(h, -r, axis), l);
    }
}

TEST(TotalLoss, GatingAndSum) {
    const Vec3 z = Vec3::UnitZ();
    GraspTarget t{0, Quaternion{}, 0.03, z};
    GraspPrediction p{0.3, quaternion_about_axis(Vec3::UnitX(), 1.0), 0.2};
    EXPECT_EQ(total_loss(p, t), quality_loss(0.3, 0));
    const auto g = total_loss_grad(p, t);
    EXPECT_EQ(g.w_hat, 0.0);
    EXPECT_TRUE(g.r_hat.isZero(0.0));
    t.q = 1;
    EXPECT_LT(total_loss({1.0 - 1e-12, Quaternion{}, 0.03}, t), 1e-11);
    const GraspPrediction off{0.5, quaternion_about_axis(z, std::numbers::pi / 2), 0.05};
    EXPECT_NEAR(total_loss(off, t), std::log(2.0) + (1.0 - std::sqrt(0.5)) + 4e-4, 1e-12);
    // The quoted sum adds terms rounded to four decimals (0.6931 + 0.29289 + 0.0004).
    EXPECT_NEAR(total_loss(off, t), 0.98639, 1e-4);
}

TEST(Gsr, Values) {
    std::vector<bool> seven(10, false);
    for (int i = 0; i < 7; ++i) seven[i] = true;
    EXPECT_DOUBLE_EQ(gsr(seven), 0.7);
    EXPECT_EQ(gsr(std::vector<bool>(5, false)), 0.0);
    EXPECT_THROW(gsr({}), InputError);
    Rng rng(mix_seed(4));
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<bool> a(uniform_int(rng, 1, 40)), b(uniform_int(rng, 1, 40));
        for (auto&& v : a) v = uniform(rng, 0, 1) < 0.5;
        for (auto&& v : b) v = uniform(rng, 0, 1) < 0.5;
        std::vector<bool> ab = a;
        ab.insert(ab.end(), b.begin(), b.end());
        // Both sides are integer counts, exactly representable.
        EXPECT_EQ(std::round(gsr(ab) * ab.size()), std::round(gsr(a) * a.size()) + std::round(gsr(b) * b.size()));
        EXPECT_NEAR(gsr(ab) * ab.size(), gsr(a) * a.size() + gsr(b) * b.size(), 1e-12);
    }
}

TEST(GradCheck, QualityWidthRotation) {
    EXPECT_LT(grad_check(quality_loss_function(1), {0.3}, 1e-6), 1e-6);
    EXPECT_LT(grad_check(quality_loss_function(0), {0.3}, 1e-6), 1e-6);
    Rng rng(mix_seed(5));
    for (int i = 0; i < 50; ++i) {
        const double w = uniform(rng, 0.0, 0.08);
        EXPECT_LT(grad_check(width_loss_function(w), {uniform(rng, 0.0, 0.08)}, 1e-6), 1e-8);
    }
    const Quaternion r = quaternion_about_axis(Vec3(1, 2, 3).normalized(), 0.7);
    const Quaternion h = quaternion_about_axis(Vec3(-1, 0.5, 2).normalized(), 1.1);
    EXPECT_LT(grad_check(rotation_loss_function(r, Vec3::UnitZ()), qvec(h), 1e-6), 1e-5);
}

TEST(GradCheck, RandomDifferentiablePoints) {
    Rng rng(mix_seed(6));
    int checked = 0;
    while (checked < 100) {
        const Quaternion r = random_unit(rng), h = random_unit(rng);
        const Vec3 axis = random_axis(rng);
        const double q_hat = uniform(rng, 0.05, 0.95), w_hat = uniform(rng, 0, 0.08), w = uniform(rng, 0, 0.08);
        const int q = uniform_int(rng, 0, 1);
        try {
            EXPECT_LT(grad_check(quality_loss_function(q), {q_hat}), 1e-5);
            EXPECT_LT(grad_check(width_loss_function(w), {w_hat}), 1e-5);
            EXPECT_LT(grad_check(rotation_loss_function(r, axis), qvec(h)), 1e-5);
            const auto hv = qvec(h);
            EXPECT_LT(grad_check(total_loss_function({q, r, w, axis}), {q_hat, w_hat, hv[0], hv[1], hv[2], hv[3]}), 1e-5);
            ++checked;
        } catch (const KinkError&) {
            // Only a tie between branches can land here; draw again.
        }
    }
}

TEST(GradCheck, KinksAreReported) {
    const Vec3 z = Vec3::UnitZ();
    // Equidistant from both mirrored branches.
    const Quaternion r;
    const Quaternion tie = quaternion_about_axis(z, std::numbers::pi / 2);
    EXPECT_THROW(grad_check(rotation_loss_function(r, z), qvec(tie)), KinkError);
    // Orthogonal to both branches: |dot| kink.
    const Quaternion ortho = Quaternion::from_components(0, 1, 0, 0);
    EXPECT_THROW(grad_check(rotation_loss_function(r, z), qvec(ortho)), KinkError);
    EXPECT_THROW(grad_check(quality_loss_function(1), {1e-9}, 1e-6), KinkError);
}

TEST(GradCheck, GatingDerivativeVanishesWhenUnsuccessful) {
    Rng rng(mix_seed(7));
    for (int i = 0; i < 100; ++i) {
        const GraspTarget t{0, random_unit(rng), uniform(rng, 0, 0.08), random_axis(rng)};
        const Quaternion h = random_unit(rng);
        const double w_hat = uniform(rng, 0, 0.08), q_hat = uniform(rng, 0.05, 0.95);
        const auto g = total_loss_grad({q_hat, h, w_hat}, t);
        EXPECT_EQ(g.w_hat, 0.0);
        EXPECT_TRUE(g.r_hat.isZero(0.0));
        // Numerically too: the loss does not move with w_hat or r_hat.
        const auto f = total_loss_function(t);
        const auto hv = qvec(h);
        EXPECT_EQ(f.value({q_hat, w_hat + 1e-3, hv[0], hv[1], hv[2], hv[3]}), f.value({q_hat, w_hat, hv[0], hv[1], hv[2], hv[3]}));
        EXPECT_EQ(total_loss({q_hat, random_unit(rng), w_hat}, t), total_loss({q_hat, h, w_hat}, t));
    }
}
