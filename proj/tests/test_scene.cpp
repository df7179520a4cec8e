#include <gtest/gtest.h>

#include <set>

#include "occgrasp/error.hpp"
#include "occgrasp/oriented_box.hpp"
#include "test_support.hpp"

using namespace occgrasp;
using namespace occgrasp::testing;

namespace {

// Exhaustive interpenetration oracle: any edge of one mesh crossing a face of
// the other, or a vertex of one strictly inside the other (parity count with
// brute-force segment tests against every triangle).
bool brute_force_interpenetrate(const TriMesh& a, const TriMesh& b) {
    auto edges_cross = [](const TriMesh& m, const TriMesh& other) {
        for (const auto& t : m.triangles) {
            for (int k = 0; k < 3; ++k) {
                const Vec3& p = m.vertices[t[k]];
                const Vec3& q = m.vertices[t[(k + 1) % 3]];
                for (const auto& u : other.triangles)
                    if (segment_intersects_triangle(p, q, other.vertices[u[0]], other.vertices[u[1]], other.vertices[u[2]]))
                        return true;
            }
        }
        return false;
    };
    auto inside = [](const Vec3& p, const TriMesh& m) {
        const Vec3 far = p + Vec3(10.123, 7.456, 3.789);
        int n = 0;
        for (const auto& u : m.triangles)
            n += segment_intersects_triangle(p, far, m.vertices[u[0]], m.vertices[u[1]], m.vertices[u[2]]);
        return n % 2 == 1;
    };
    if (!a.bounds().overlaps(b.bounds())) return false;
    return edges_cross(a, b) || edges_cross(b, a) || inside(a.vertices[0], b) || inside(b.vertices[0], a);
}

}  // namespace

TEST(Catalog, ProceduralHasHundredWatertightEntries) {
    const auto cat = shared_catalog();
    EXPECT_EQ(cat->size(), 100u);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < cat->size(); ++i) {
        const auto& e = cat->at(i);
        ids.insert(e.id);
        EXPECT_TRUE(e.model->mesh().is_watertight()) << e.id;
        EXPECT_NEAR(e.model->bounds().min.z(), 0.0, 1e-12);
        EXPECT_NEAR(e.model->bounds().center().x(), 0.0, 1e-12);
        EXPECT_NEAR(e.model->bounds().center().y(), 0.0, 1e-12);
    }
    EXPECT_EQ(ids.size(), 100u);
    EXPECT_THROW(cat->at("nope"), InputError);
}

TEST(PackedScene, SingleObjectIsTarget) {
    const Scene s = generate_packed_scene(packed_config(3, 1, 1));
    ASSERT_EQ(s.instances.size(), 1u);
    EXPECT_EQ(s.target_index, 0);
    EXPECT_NO_THROW(s.validate());
}

TEST(PackedScene, DeterministicForSeed) {
    const Scene a = generate_packed_scene(packed_config(99, 5, 5));
    const Scene b = generate_packed_scene(packed_config(99, 5, 5));
    EXPECT_EQ(a.instances.size(), 5u);
    EXPECT_TRUE(same_scene_exact(a, b));
    EXPECT_EQ(scene_to_json(a).dump(), scene_to_json(b).dump());
    const Scene c = generate_packed_scene(packed_config(100, 5, 5));
    EXPECT_FALSE(same_scene_exact(a, c));
}

TEST(PackedScene, InvariantsHoldAndOnlyYaw) {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const Scene s = generate_packed_scene(packed_config(seed, 1, 10));
        EXPECT_NO_THROW(s.validate());
        EXPECT_GE(s.instances.size(), 1u);
        EXPECT_LE(s.instances.size(), 10u);
        for (const auto& inst : s.instances) {
            EXPECT_EQ(inst.pose.rotation.x, 0.0);
            EXPECT_EQ(inst.pose.rotation.y, 0.0);
        }
    }
}

TEST(PackedScene, InterpenetrationOracleDetectsOverlap) {
    const TriMesh a = make_box(0.05, 0.05, 0.05);
    EXPECT_TRUE(brute_force_interpenetrate(a, a.transformed(upright_pose(0.03, 0.01, 0.3))));
    // Nested solids cross no faces; the parity test must still report them.
    EXPECT_TRUE(brute_force_interpenetrate(a, make_box(0.01, 0.01, 0.01).transformed(upright_pose(0.0, 0.0, 0.1))));
    EXPECT_FALSE(brute_force_interpenetrate(a, a.transformed(upright_pose(0.06, 0.0, 0.0))));
}

TEST(PackedScene, TenThousandScenesNeverInterpenetrate) {
    long checked_pairs = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const Scene s = generate_packed_scene(packed_config(seed, 5, 5));
        ASSERT_EQ(s.instances.size(), 5u);
        std::vector<TriMesh> world;
        for (const auto& inst : s.instances) world.push_back(inst.mesh().transformed(inst.pose));
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j) {
                ++checked_pairs;
                ASSERT_FALSE(brute_force_interpenetrate(world[i], world[j])) << "seed " << seed << " pair " << i << "," << j;
            }
    }
    EXPECT_EQ(checked_pairs, 100000);
}

TEST(PackedScene, ImpossiblePlacementNamesInstance) {
    auto cat = std::make_shared<Catalog>();
    cat->add("slab", make_box(0.25, 0.25, 0.05));
    SceneConfig c;
    c.catalog = cat;
    c.min_objects = c.max_objects = 2;
    c.max_attempts = 50;
    try {
        generate_packed_scene(c);
        FAIL() << "expected GenerationError";
    } catch (const GenerationError& e) {
        EXPECT_NE(std::string(e.what()).find("instance 1"), std::string::npos) << e.what();
    }
    c.min_objects = 0;
    EXPECT_THROW(generate_packed_scene(c), InputError);
    c.min_objects = 1;
    c.max_objects = 11;
    EXPECT_THROW(generate_packed_scene(c), InputError);
}

TEST(SingleScene, KeepsTargetPoseBitExact) {
    const Scene s = generate_packed_scene(packed_config(7, 5, 5));
    const Scene single = derive_single_scene(s, 2);
    ASSERT_EQ(single.instances.size(), 1u);
    EXPECT_EQ(single.target_index, 0);
    EXPECT_TRUE(same_pose_exact(single.instances[0].pose, s.instances[2].pose));
    EXPECT_EQ(single.instances[0].id, s.instances[2].id);
    EXPECT_EQ(single.seed, s.seed);
    EXPECT_EQ(single.workspace_extent, s.workspace_extent);
    EXPECT_TRUE(same_scene_exact(derive_single_scene(single, 0), single));
    EXPECT_THROW(derive_single_scene(s, 5), InputError);
    EXPECT_THROW(derive_single_scene(s, -1), InputError);
}

TEST(SingleScene, EnumerateTargetsCoversEveryInstance) {
    const Scene s = generate_packed_scene(packed_config(8, 5, 5));
    const auto targets = enumerate_targets(s);
    ASSERT_EQ(targets.size(), 5u);
    std::set<int> ids;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        EXPECT_EQ(targets[i].target_index, static_cast<int>(i));
        Scene same = targets[i];
        same.target_index = s.target_index;
        EXPECT_TRUE(same_scene_exact(same, s));
        const Scene single = derive_single_scene(targets[i], targets[i].target_index);
        ids.insert(single.instances[0].id);
    }
    EXPECT_EQ(ids.size(), 5u);
    const Scene one = generate_packed_scene(packed_config(8, 1, 1));
    EXPECT_EQ(enumerate_targets(one).size(), 1u);
}

TEST(SceneJson, RoundTripIsExact) {
    const Scene s = generate_packed_scene(packed_config(21, 6, 6));
    const auto j = scene_to_json(s);
    const Scene r = scene_from_json(nlohmann::json::parse(j.dump()), *shared_catalog());
    EXPECT_TRUE(same_scene_exact(s, r));
    auto bad = j;
    bad["instances"][0]["catalog_id"] = "missing";
    EXPECT_THROW(scene_from_json(bad, *shared_catalog()), IoError);
}
