#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "occgrasp/completion.hpp"
#include "occgrasp/error.hpp"
#include "occgrasp/random.hpp"
#include "occgrasp/sampling.hpp"
#include "test_support.hpp"

using namespace occgrasp;
using namespace occgrasp::testing;

namespace {

PointCloud random_cloud(int n, std::uint64_t seed) {
    Rng rng(mix_seed(seed));
    PointCloud c;
    for (int i = 0; i < n; ++i) c.points.emplace_back(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
    return c;
}

double brute_chamfer(const PointCloud& a, const PointCloud& b) {
    auto dir = [](const PointCloud& x, const PointCloud& y) {
        double sum = 0.0;
        for (const Vec3& p : x.points) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : y.points) best = std::min(best, (p - q).norm());
            sum += best;
        }
        return sum / x.size();
    };
    return 0.5 * (dir(a, b) + dir(b, a));
}

PointCloud ground_truth(const Scene& s, int n, std::uint64_t seed) {
    return surface_sample(s.target().mesh().transformed(s.target().pose), n, seed);
}

}  // namespace

TEST(Chamfer, Examples) {
    const PointCloud a = random_cloud(50, 1);
    EXPECT_EQ(chamfer_l1(a, a), 0.0);
    PointCloud p, q;
    p.points = {Vec3(0, 0, 0)};
    q.points = {Vec3(1, 0, 0)};
    EXPECT_DOUBLE_EQ(chamfer_l1(p, q), 1.0);
    EXPECT_THROW(chamfer_l1(PointCloud{}, q), InputError);
    EXPECT_THROW(chamfer_l1(q, PointCloud{}), InputError);
}

TEST(Chamfer, MatchesBruteForceAndIsSymmetric) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const PointCloud a = random_cloud(100, 2 * seed), b = random_cloud(100, 2 * seed + 1);
        EXPECT_NEAR(chamfer_l1(a, b), brute_chamfer(a, b), 1e-12);
        EXPECT_EQ(chamfer_l1(a, b), chamfer_l1(b, a));
    }
}

TEST(Chamfer, ZeroExactlyForMutualSubsets) {
    const PointCloud a = random_cloud(30, 5);
    PointCloud dup = a;
    dup.points.insert(dup.points.end(), a.points.begin(), a.points.begin() + 10);
    EXPECT_EQ(chamfer_l1(a, dup), 0.0);
    PointCloud extra = a;
    extra.points.push_back(Vec3(2, 2, 2));
    EXPECT_GT(chamfer_l1(a, extra), 0.0);
}

TEST(Iou, ConstructedCases) {
    const double v = 0.01;
    auto cell = [v](int i) { return Vec3((i + 0.5) * v, 0.5 * v, 0.5 * v); };
    PointCloud a, b, c;
    for (int i = 0; i < 20; ++i) a.points.push_back(cell(i));
    for (int i = 10; i < 30; ++i) b.points.push_back(cell(i));
    for (int i = 100; i < 120; ++i) c.points.push_back(cell(i));
    EXPECT_DOUBLE_EQ(volumetric_iou(a, a, v), 1.0);
    EXPECT_DOUBLE_EQ(volumetric_iou(a, c, v), 0.0);
    EXPECT_DOUBLE_EQ(volumetric_iou(a, b, v), 1.0 / 3.0);
    EXPECT_THROW(volumetric_iou(a, b, 0.0), InputError);
    EXPECT_THROW(volumetric_iou(PointCloud{}, PointCloud{}, v), InputError);
    EXPECT_DOUBLE_EQ(volumetric_iou(a, PointCloud{}, v), 0.0);
}

TEST(OracleCompleter, ReachesSamplingFloor) {
    const Scene s = generate_packed_scene(packed_config(8));
    const PointCloud gt = ground_truth(s, 4096, 100);
    const double floor = chamfer_l1(ground_truth(s, 4096, 101), gt);
    PointCloud junk;
    junk.points = {Vec3(0, 0, 0)};
    for (const PointCloud& partial : {PointCloud{}, junk}) {
        const PointCloud out = oracle_completer(partial, s, 4096, 7);
        EXPECT_LE(chamfer_l1(out, gt), 1.5 * floor);
    }
    const OracleCompleter oc;
    CompletionContext ctx;
    EXPECT_THROW(oc.complete(junk, ctx), InputError);
    ctx.scene = &s;
    EXPECT_EQ(oc.complete(PointCloud{}, ctx).cloud.size(), 4096u);
}

TEST(OracleCompleter, IouAgainstGroundTruth) {
    const Scene s = generate_packed_scene(packed_config(9));
    const double iou = volumetric_iou(oracle_completer({}, s, 30000, 1), ground_truth(s, 30000, 2), 0.0075);
    EXPECT_GE(iou, 0.95);
}

TEST(MirrorCompleter, HalfVisibleCylinderRecoversDiameter) {
    const double r = 0.03;
    const Scene s = SceneBuilder().add(make_cylinder(r, 0.08, 48), upright_pose(0.15, 0.15, 0.0)).target(0).build();
    const CameraModel cam = default_camera();
    const PointCloud partial = back_project(render(s, cam), s.target().id);
    const auto res = mirror_completer(partial, Vec3::UnitZ(), cam);
    EXPECT_FALSE(res.passthrough);
    Vec3 view = Vec3(0.15, 0.15, 0.04) - cam.position();
    view.z() = 0;
    view.normalize();
    const Vec3 side = Vec3::UnitZ().cross(view);
    auto extent = [](const PointCloud& c, const Vec3& d) {
        double lo = 1e9, hi = -1e9;
        for (const Vec3& p : c.points) {
            lo = std::min(lo, p.dot(d));
            hi = std::max(hi, p.dot(d));
        }
        return hi - lo;
    };
    EXPECT_NEAR(extent(res.cloud, view), 2 * r, 0.1 * 2 * r);
    EXPECT_NEAR(extent(res.cloud, side), 2 * r, 0.1 * 2 * r);
    // The far side of the wall, invisible in the input, is populated.
    int behind = 0;
    for (const Vec3& p : res.cloud.points)
        behind += (p - Vec3(0.15, 0.15, 0)).dot(view) > 0.8 * r && p.z() < 0.07;
    EXPECT_GT(behind, 50);
}

TEST(MirrorCompleter, CompleteSymmetricCloudBarelyChanges) {
    const Scene s = SceneBuilder().add(make_cylinder(0.03, 0.08, 48), upright_pose(0.15, 0.15, 0.0)).target(0).build();
    const PointCloud full = ground_truth(s, 4096, 3), gt = ground_truth(s, 4096, 4);
    const double floor = chamfer_l1(full, gt);
    const auto res = mirror_completer(full, Vec3::UnitZ(), default_camera());
    EXPECT_LT(std::abs(chamfer_l1(res.cloud, gt) - floor), 2 * floor);
}

TEST(MirrorCompleter, TinyInputPassesThrough) {
    PointCloud three;
    three.points = {Vec3(0.1, 0.1, 0.01), Vec3(0.11, 0.1, 0.01), Vec3(0.1, 0.11, 0.02)};
    const auto res = mirror_completer(three, Vec3::UnitZ(), default_camera());
    EXPECT_TRUE(res.passthrough);
    EXPECT_FALSE(res.warning.empty());
    EXPECT_EQ(res.cloud.points, three.points);
}

TEST(Completers, OrderingOverRenderedTargets) {
    const CameraModel cam = default_camera();
    double sum_oracle = 0, sum_mirror = 0, sum_pass = 0;
    int n = 0;
    for (std::uint64_t seed = 1; n < 100; ++seed) {
        const Scene s = generate_packed_scene(packed_config(seed));
        const PointCloud partial = back_project(render(s, cam), s.target().id);
        if (partial.empty()) continue;
        const PointCloud gt = ground_truth(s, 4096, seed + 1000);
        sum_oracle += chamfer_l1(oracle_completer(partial, s, 4096, seed), gt);
        sum_mirror += chamfer_l1(mirror_completer(partial, Vec3::UnitZ(), cam).cloud, gt);
        sum_pass += chamfer_l1(partial, gt);
        ++n;
    }
    EXPECT_LE(sum_oracle, sum_mirror);
    EXPECT_LE(sum_mirror, sum_pass);
}

TEST(Completers, FactoryAndCsv) {
    EXPECT_EQ(make_completer("oracle")->name(), "oracle");
    EXPECT_EQ(make_completer("mirror")->name(), "mirror");
    EXPECT_EQ(make_completer("passthrough")->name(), "passthrough");
    EXPECT_THROW(make_completer("adapointr"), InputError);
    const std::vector<CompletionRow> rows = {{"scene_000001", 0, "oracle", 2.5, 93.25, 0.125},
                                             {"scene_000002", 3, "mirror", 10.0, 40.0, 0.8}};
    const auto path = std::filesystem::temp_directory_path() / "occgrasp_completion.csv";
    write_completion_csv(path, rows);
    const auto back = read_completion_csv(path);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].scene_id, "scene_000002");
    EXPECT_EQ(back[1].target, 3);
    EXPECT_EQ(back[0].iou_pct, 93.25);
    std::filesystem::remove(path);
}
