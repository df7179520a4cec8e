#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "occgrasp/bench.hpp"
#include "occgrasp/error.hpp"
#include "occgrasp/losses.hpp"
#include "occgrasp/primitives.hpp"
#include "occgrasp/random.hpp"
#include "test_support.hpp"

using namespace occgrasp;
using namespace occgrasp::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("occgrasp_bench_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

DatasetConfig small_config(int per_bin = 2, int grasps = 20) {
    DatasetConfig c;
    c.per_bin = per_bin;
    c.random_scenes = 16;
    c.max_attempts_per_bin = 200;
    c.grasps_per_sample = grasps;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Shared small test dataset, built once.
const Dataset& shared_dataset() {
    struct Holder {
        Dataset d = build_dataset(small_config(3, 30), scratch("shared"));
        ~Holder() { fs::remove_all(d.root); }
    };
    static const Holder h;
    return h.d;
}

GraspLabel label(bool single, bool cluttered) {
    GraspLabel l;
    l.success_single = single;
    l.success_cluttered = cluttered;
    return l;
}

std::vector<BinnedLabel> synthetic(int bin, int pos, int neg) {
    std::vector<BinnedLabel> out;
    for (int i = 0; i < pos; ++i) out.push_back({label(true, true), bin});
    for (int i = 0; i < neg; ++i) out.push_back({label(false, false), bin});
    return out;
}

}  // namespace

TEST(Fnv1a, PublishedVectors) {
    const fs::path dir = scratch("fnv");
    fs::create_directories(dir);
    auto hash_of = [&](const std::string& bytes) {
        std::ofstream(dir / "f", std::ios::binary) << bytes;
        return fnv1a_hex(dir / "f");
    };
    EXPECT_EQ(hash_of(""), "cbf29ce484222325");
    EXPECT_EQ(hash_of("a"), "af63dc4c8601ec8c");
    EXPECT_EQ(hash_of("foobar"), "85944171f73967e8");
    EXPECT_THROW(fnv1a_hex(dir / "missing"), IoError);
    fs::remove_all(dir);
}

TEST(OutputRoot, EnvironmentOverride) {
    ::setenv("OCCGRASP_OUTPUT_ROOT", "/tmp/somewhere", 1);
    EXPECT_EQ(default_output_root(), fs::path("/tmp/somewhere"));
    ::unsetenv("OCCGRASP_OUTPUT_ROOT");
    EXPECT_EQ(default_output_root(), fs::path("occgrasp_out"));
}

TEST(BuildDataset, QuotaFilledExactly) {
    const Dataset& d = shared_dataset();
    ASSERT_EQ(d.bin_counts(), std::vector<int>(9, 3));
    EXPECT_EQ(d.samples.size(), 27u);
    EXPECT_EQ(d.shortfall, std::vector<int>(9, 0));
    for (const auto& s : d.samples) {
        EXPECT_EQ(assign_bin(s.occlusion.level, BinScheme::test()), s.occlusion.bin_index) << s.id;
        EXPECT_EQ(s.split, "test");
    }
}

TEST(BuildDataset, LayoutAndLabels) {
    const Dataset& d = shared_dataset();
    EXPECT_TRUE(fs::exists(d.root / "index.json"));
    for (const auto& rec : d.scenes)
        for (const auto& f : {"manifest.json", "cluttered.depth.f32", "cluttered.instance.u16", "cluttered.json",
                              "occlusion.csv", "labels.jsonl"})
            EXPECT_TRUE(fs::exists(d.scene_dir(rec.id) / f)) << rec.id << "/" << f;
    const auto& s = d.samples.front();
    const Scene scene = load_sample_scene(d, s);
    EXPECT_EQ(scene.target_index, s.target_index);
    const DepthFrame frame = load_sample_frame(d, s);
    EXPECT_EQ(frame.instance_id, render(scene, default_camera()).instance_id);
    const auto labels = load_sample_labels(d, s);
    EXPECT_EQ(labels.size(), 30u);
    EXPECT_EQ(classify(labels).violations, 0u);
    const auto rows = read_occlusion_csv(d.scene_dir(s.scene_id) / "occlusion.csv");
    bool found = false;
    for (const auto& r : rows)
        if (r.target_index == s.target_index) {
            found = true;
            EXPECT_EQ(r.record.level, s.occlusion.level);
        }
    EXPECT_TRUE(found);
}

TEST(BuildDataset, RecordedLevelsMatchFreshMeasurement) {
    const Dataset& d = shared_dataset();
    const CameraModel cam = default_camera();
    for (std::size_t i = 0; i < d.samples.size(); i += 4) {
        const auto& s = d.samples[i];
        const Scene scene = load_sample_scene(d, s);
        const OcclusionRecord r =
            occlusion_level(render(derive_single_scene(scene, s.target_index), cam), render(scene, cam), scene.target().id);
        EXPECT_EQ(r.level, s.occlusion.level) << s.id;
        EXPECT_EQ(r.visible_pixels, s.occlusion.visible_pixels);
    }
}

TEST(BuildDataset, ByteIdenticalAcrossRunsAndWorkers) {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    DatasetConfig c = small_config(1, 10);
    const Dataset da = build_dataset(c, a);
    c.workers = 3;
    const Dataset db = build_dataset(c, b);
    EXPECT_EQ(slurp(a / "index.json"), slurp(b / "index.json"));
    ASSERT_EQ(da.scenes.size(), db.scenes.size());
    for (const auto& rec : da.scenes)
        for (const auto& f : {"manifest.json", "labels.jsonl", "occlusion.csv", "cluttered.depth.f32"})
            EXPECT_EQ(slurp(da.scene_dir(rec.id) / f), slurp(db.scene_dir(rec.id) / f)) << rec.id << "/" << f;
    EXPECT_THROW(build_dataset(c, a), IoError);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(BuildDataset, ShortfallReportedNotThrown) {
    const fs::path root = scratch("short");
    DatasetConfig c = small_config(40, 0);
    c.random_scenes = 4;
    c.targeted_placement = false;
    const Dataset d = build_dataset(c, root);
    ASSERT_EQ(d.shortfall.size(), 9u);
    const auto counts = d.bin_counts();
    int missing = 0;
    for (int b = 0; b < 9; ++b) {
        EXPECT_EQ(counts[b] + d.shortfall[b], 40);
        missing += d.shortfall[b];
    }
    EXPECT_GT(missing, 0);
    EXPECT_EQ(load_dataset(root).shortfall, d.shortfall);
    fs::remove_all(root);
}

TEST(BuildDataset, TrainHistogramModeAtLowestBin) {
    const fs::path root = scratch("train");
    DatasetConfig c;
    c.split = "train";
    c.bins = BinScheme::train();
    c.per_bin = 0;
    c.scene_count = 60;
    c.grasps_per_sample = 0;
    const Dataset d = build_dataset(c, root);
    const auto counts = d.bin_counts();
    ASSERT_EQ(counts.size(), 10u);
    for (int b = 1; b < 10; ++b) EXPECT_GT(counts[0], counts[b]) << b;
    // Without quotas every measured in-range target of each scene is kept.
    EXPECT_GT(d.samples.size(), 60u * 3);
    fs::remove_all(root);
}

TEST(BuildDataset, RejectsBadConfig) {
    DatasetConfig c;
    c.split = "val";
    EXPECT_THROW(build_dataset(c, scratch("bad")), InputError);
    c = DatasetConfig{};
    c.per_bin = 0;
    c.scene_count = 0;
    EXPECT_THROW(build_dataset(c, scratch("bad")), InputError);
}

TEST(BuildDataset, OptionalSingleFrames) {
    const fs::path root = scratch("single");
    DatasetConfig c = small_config(1, 0);
    c.write_single_frames = true;
    const Dataset d = build_dataset(c, root);
    const auto& s = d.samples.front();
    const DepthFrame single = read_frame(d.scene_dir(s.scene_id) / ("single_t" + std::to_string(s.target_index)));
    const Scene scene = load_sample_scene(d, s);
    EXPECT_EQ(single.depth, render(derive_single_scene(scene, s.target_index), default_camera()).depth);
    EXPECT_NO_THROW(load_dataset(root));
    fs::remove(d.scene_dir(s.scene_id) / ("single_t" + std::to_string(s.target_index) + ".depth.f32"));
    EXPECT_THROW(load_dataset(root), IoError);
    fs::remove_all(root);
}

TEST(LoadDataset, RoundTripAndVerification) {
    const fs::path root = scratch("verify");
    const Dataset built = build_dataset(small_config(1, 5), root);
    const Dataset d = load_dataset(root);
    ASSERT_EQ(d.samples.size(), built.samples.size());
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        EXPECT_EQ(d.samples[i].id, built.samples[i].id);
        EXPECT_EQ(d.samples[i].occlusion.level, built.samples[i].occlusion.level);
    }
    // Tampering one byte is caught and names the sample.
    const auto& victim = d.samples.back();
    const fs::path f = d.scene_dir(victim.scene_id) / "cluttered.instance.u16";
    {
        std::fstream io(f, std::ios::in | std::ios::out | std::ios::binary);
        io.seekp(10);
        io.put('\x01');
    }
    try {
        load_dataset(root);
        FAIL() << "tampered file accepted";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find(victim.id), std::string::npos) << e.what();
    }
    EXPECT_NO_THROW(load_dataset(root, false));
    fs::remove(f);
    EXPECT_THROW(load_dataset(root), IoError);
    fs::remove_all(root);
}

TEST(LabelDataset, RelabelKeepsIndexValid) {
    const fs::path root = scratch("relabel");
    build_dataset(small_config(1, 0), root);
    Dataset d = load_dataset(root);
    EXPECT_TRUE(load_sample_labels(d, d.samples.front()).empty());
    label_dataset(d, 12, 2);
    const Dataset again = load_dataset(root);
    EXPECT_EQ(again.config.grasps_per_sample, 12);
    for (const auto& s : again.samples) EXPECT_EQ(load_sample_labels(again, s).size(), 12u) << s.id;
    fs::remove_all(root);
}

TEST(Balance, SubsampleRule) {
    auto r = balance_grasps(synthetic(0, 100, 300), false, LabelContext::Single, 1);
    EXPECT_EQ(r.positives[-1], 100u);
    EXPECT_EQ(r.negatives[-1], 100u);
    EXPECT_EQ(r.labels.size(), 200u);
    r = balance_grasps(synthetic(0, 300, 100), false, LabelContext::Single, 1);
    EXPECT_EQ(r.positives[-1], 300u);
    EXPECT_EQ(r.negatives[-1], 100u);
    EXPECT_THROW(balance_grasps({}, false, LabelContext::Single, 1), InputError);
}

TEST(Balance, PerBinAuditAndWarnings) {
    std::vector<BinnedLabel> all;
    Rng rng(mix_seed(3));
    std::map<int, int> pos;
    for (int b = 0; b < 9; ++b) {
        const int p = b == 4 ? 0 : uniform_int(rng, 1, 40);
        pos[b] = p;
        const auto part = synthetic(b, p, uniform_int(rng, 0, 120));
        all.insert(all.end(), part.begin(), part.end());
    }
    std::shuffle(all.begin(), all.end(), rng);
    const auto r = balance_grasps(all, true, LabelContext::Cluttered, 9);
    std::map<int, int> p_out, n_out;
    for (const auto& l : r.labels) (l.label.success_cluttered ? p_out : n_out)[l.bin]++;
    for (int b = 0; b < 9; ++b) {
        EXPECT_EQ(p_out[b], pos[b]) << "positives dropped in bin " << b;
        EXPECT_LE(n_out[b], p_out[b]);
        EXPECT_EQ(r.positives.at(b), static_cast<std::size_t>(p_out[b]));
        EXPECT_EQ(r.negatives.at(b), static_cast<std::size_t>(n_out[b]));
    }
    EXPECT_EQ(p_out[4] + n_out[4], 0);
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("bin 4"), std::string::npos);
    // Seeded.
    const auto again = balance_grasps(all, true, LabelContext::Cluttered, 9);
    ASSERT_EQ(again.labels.size(), r.labels.size());
}

TEST(Balance, ContextSelectsPositiveColumn) {
    std::vector<BinnedLabel> v;
    for (int i = 0; i < 10; ++i) v.push_back({label(true, false), 0});
    for (int i = 0; i < 30; ++i) v.push_back({label(false, false), 0});
    EXPECT_EQ(balance_grasps(v, false, LabelContext::Single, 0).positives.at(-1), 10u);
    const auto c = balance_grasps(v, false, LabelContext::Cluttered, 0);
    EXPECT_EQ(c.positives.at(-1), 0u);
    EXPECT_TRUE(c.labels.empty());
    EXPECT_EQ(c.warnings.size(), 1u);
}

TEST(Evaluate, TrialsPerBinAndRecomputedGsr) {
    const Dataset& d = shared_dataset();
    EvalConfig ec;
    ec.trials_per_bin = 2;
    ec.workers = 2;
    const auto report = evaluate_policy(make_oracle_policy(default_camera(), "oracle"), "oracle", d, ec);
    ASSERT_EQ(report.bins.size(), 9u);
    for (const auto& b : report.bins) EXPECT_EQ(b.trials, 2u);
    EXPECT_EQ(report.outcomes.size(), 18u);
    const fs::path dir = scratch("eval");
    write_eval_csv(dir / "eval.csv", report);
    write_outcomes_csv(dir / "outcomes.csv", report.outcomes);
    const auto rows = read_eval_csv(dir / "eval.csv");
    const auto outcomes = read_outcomes_csv(dir / "outcomes.csv");
    ASSERT_EQ(outcomes.size(), report.outcomes.size());
    for (const auto& b : rows) {
        std::vector<bool> raw;
        for (const auto& o : outcomes)
            if (o.bin == b.bin) raw.push_back(o.success);
        EXPECT_EQ(*b.gsr, gsr(raw)) << b.bin;
    }
    fs::remove_all(dir);
}

TEST(Evaluate, NoGraspCountsAsFailure) {
    const Dataset& d = shared_dataset();
    EvalConfig ec;
    ec.trials_per_bin = 1;
    const Policy none = [](const Scene&, const DepthFrame&) { return std::optional<Grasp>{}; };
    const auto r = evaluate_policy(none, "none", d, ec);
    for (const auto& b : r.bins) EXPECT_EQ(*b.gsr, 0.0);
    for (const auto& o : r.outcomes) EXPECT_TRUE(o.no_grasp);
}

TEST(Evaluate, RandomPolicyBelowOracle) {
    const Dataset& d = shared_dataset();
    EvalConfig ec;
    ec.trials_per_bin = 3;
    const auto oracle = evaluate_policy(make_oracle_policy(default_camera(), "oracle"), "oracle", d, ec);
    const auto random = evaluate_policy(make_random_policy(1), "random", d, ec);
    std::size_t o = 0, r = 0;
    for (std::size_t b = 0; b < 9; ++b) o += oracle.bins[b].successes, r += random.bins[b].successes;
    EXPECT_LT(r, o);
}

TEST(Evaluate, Errors) {
    const fs::path root = scratch("evalerr");
    DatasetConfig c = small_config(1, 0);
    c.split = "train";
    c.bins = BinScheme::train();
    build_dataset(c, root);
    Dataset d = load_dataset(root);
    EXPECT_THROW(evaluate_policy(make_random_policy(0), "random", d, EvalConfig{}), InputError);
    for (auto& s : d.samples) s.split = "test";
    fs::remove(d.scene_dir(d.samples.front().scene_id) / "cluttered.depth.f32");
    try {
        evaluate_policy(make_random_policy(0), "random", d, EvalConfig{});
        FAIL() << "missing frame accepted";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find(d.samples.front().id), std::string::npos) << e.what();
    }
    fs::remove_all(root);
}

TEST(Factors, PartitionAndEmptyBuckets) {
    std::vector<Outcome> outs;
    Rng rng(mix_seed(11));
    for (int i = 0; i < 200; ++i) {
        Outcome o;
        o.bin = uniform_int(rng, 0, 8);
        o.occluder_count = uniform_int(rng, 2, 5);
        o.target_size = uniform(rng, 0.02, 0.07);
        o.success = uniform(rng, 0, 1) < 0.6;
        outs.push_back(o);
    }
    const FactorTables t = analyze_factors(outs);
    std::size_t occ_total = 0, size_total = 0;
    for (const auto& [k, c] : t.by_occluders) {
        occ_total += c.trials;
        EXPECT_EQ(c.gsr.has_value(), c.trials > 0);
    }
    for (const auto& [k, c] : t.by_size) {
        size_total += c.trials;
        EXPECT_EQ(c.gsr.has_value(), c.trials > 0);
    }
    EXPECT_EQ(occ_total, outs.size());
    EXPECT_EQ(size_total, outs.size());
    EXPECT_EQ(t.by_occluders.at(0).trials, 0u);
    EXPECT_EQ(t.by_occluders.at(6).trials, 0u);
    EXPECT_FALSE(t.by_occluders.at(6).gsr.has_value());
    // (0.08, inf) bucket exists for every bin even though nothing is that large.
    EXPECT_EQ(t.by_size.at({0, 6}).trials, 0u);
}

TEST(Factors, SingleSceneOutcomesOnlyFillZeroColumn) {
    std::vector<Outcome> outs(5);
    for (auto& o : outs) o.occluder_count = 0, o.success = true;
    const FactorTables t = analyze_factors(outs);
    for (const auto& [k, c] : t.by_occluders) EXPECT_EQ(c.trials, k == 0 ? 5u : 0u);
}

TEST(Factors, WideTargetsFailInTopSizeBucket) {
    // Targets wider than the 0.08 m opening in both footprint dims; side grasps
    // through the center cannot close on them.
    std::vector<Outcome> outs;
    for (double side : {0.085, 0.09, 0.1}) {
        const Scene s = SceneBuilder().box(side, side, 0.06, 0.15, 0.15).target(0).build();
        for (double yaw : {0.0, 0.4, 0.8, 1.2}) {
            const Vec3 closing(std::cos(yaw), std::sin(yaw), 0.0);
            Mat3 m;
            m.col(2) = Vec3(-std::sin(yaw), std::cos(yaw), 0.0);
            m.col(1) = closing;
            m.col(0) = closing.cross(m.col(2));
            Grasp g;
            g.rotation = Quaternion::from_matrix(m);
            g.center = Vec3(0.15, 0.15, 0.03);
            g.width = 0.08;
            Outcome o;
            o.bin = 0;
            o.target_size = scene_factors(s).target_size;
            o.success = simulate_grasp(g, s, GripperModel{}).success;
            outs.push_back(o);
        }
    }
    const FactorTables t = analyze_factors(outs);
    const auto& top = t.by_size.at({0, static_cast<int>(size_bucket_edges().size()) - 2});
    EXPECT_EQ(top.trials, outs.size());
    ASSERT_TRUE(top.gsr.has_value());
    EXPECT_EQ(*top.gsr, 0.0);
}

TEST(Report, CsvRoundTripAndPng) {
    const fs::path dir = scratch("report");
    EvalReport r;
    r.bins = aggregate_bins({}, BinScheme::test());
    for (auto& b : r.bins) EXPECT_FALSE(b.gsr.has_value());
    std::vector<Outcome> outs;
    for (int b = 0; b < 9; ++b)
        for (int k = 0; k < 4; ++k) {
            Outcome o;
            o.sample_id = "s" + std::to_string(b) + "_" + std::to_string(k);
            o.bin = b;
            o.success = k < (9 - b) % 5;
            outs.push_back(o);
        }
    r.bins = aggregate_bins(outs, BinScheme::test());
    write_eval_csv(dir / "eval.csv", r);
    const auto back = read_eval_csv(dir / "eval.csv");
    ASSERT_EQ(back.size(), 9u);
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].trials, 4u);
        EXPECT_EQ(*back[i].gsr, *r.bins[i].gsr);
    }
    write_gsr_plot_png(dir / "curve.png", {{"a", back}, {"b", r.bins}}, BinScheme::test());
    const std::string png = slurp(dir / "curve.png");
    ASSERT_GT(png.size(), 100u);
    EXPECT_EQ(png.substr(0, 8), std::string("\x89PNG\r\n\x1a\n", 8));
    write_factor_csvs(dir, analyze_factors(outs));
    EXPECT_TRUE(fs::exists(dir / "factors_occluders.csv"));
    EXPECT_TRUE(fs::exists(dir / "factors_size.csv"));
    fs::remove_all(dir);
}

TEST(CompletionEval, OracleBeatsPassthrough) {
    const Dataset& d = shared_dataset();
    CompletionEvalConfig c;
    c.samples_per_bin = 1;
    const auto rows = evaluate_completion(d, c);
    std::map<std::string, double> cd;
    std::map<std::string, int> n;
    for (const auto& r : rows) cd[r.completer] += r.cd_l1_x1000, ++n[r.completer];
    ASSERT_EQ(n["oracle"], 9);
    EXPECT_LT(cd["oracle"], cd["passthrough"]);
}
