// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "occgrasp/affordance.hpp"
#include "occgrasp/bench.hpp"
#include "occgrasp/completion.hpp"
#include "occgrasp/error.hpp"
#include "occgrasp/losses.hpp"
#include "occgrasp/primitives.hpp"
#include "occgrasp/random.hpp"
#include "test_support.hpp"

using namespace occgrasp;
using namespace occgrasp::testing;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("occgrasp_accept_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 1 ------------------------------------------------------------------------
Verdict subset_invariant() {
    const auto t0 = Clock::now();
    const int scenes = 200, per_scene = 50;
    std::size_t labels = 0, violations = 0, tallied = 0, single_pos = 0, clut_pos = 0;
    for (int i = 0; i < scenes; ++i) {
        const Scene s = generate_packed_scene(packed_config(static_cast<std::uint64_t>(50000 + i)));
        const auto ls = label_pair(s, GripperModel{}, per_scene, static_cast<std::uint64_t>(i));
        labels += ls.size();
        violations += classify(ls).violations;
        // Direct count, not through classify.
        for (const auto& l : ls) {
            tallied += l.success_cluttered && !l.success_single;
            single_pos += l.success_single;
            clut_pos += l.success_cluttered;
        }
    }
    const double t = seconds_since(t0);
    return {labels >= 10000 && violations == 0 && tallied == 0 && t <= 300.0,
            fmt("%zu labels over %d scenes, violations %zu (direct %zu), single+ %zu cluttered+ %zu, %.0fs", labels,
                scenes, violations, tallied, single_pos, clut_pos, t)};
}

// 2 ------------------------------------------------------------------------
std::pair<std::size_t, std::size_t> count_by_rays(const Scene& s, const CameraModel& cam, int target) {
    std::size_t total = 0, visible = 0;
    const std::vector<PlacedMesh> only_target = {s.instances[target].placed()};
    const auto all = s.placed();
    for (int v = 0; v < cam.height; ++v)
        for (int u = 0; u < cam.width; ++u) {
            const Vec3 d = cam.pixel_ray(u, v);
            const auto t = ray_cast(only_target, cam.position(), d);
            if (!t) continue;
            ++total;
            bool blocked = false;
            for (std::size_t k = 0; k < all.size(); ++k) {
                if (static_cast<int>(k) == target) continue;
                const std::vector<PlacedMesh> one = {all[k]};
                const auto o = ray_cast(one, cam.position(), d);
                if (o && o->distance < t->distance) blocked = true;
            }
            if (!blocked) ++visible;
        }
    return {total, visible};
}

Verdict occlusion_metric() {
    const CameraModel cam = default_camera();
    int self_nonzero = 0;
    for (int i = 0; i < 200; ++i) {
        const Scene s = generate_packed_scene(packed_config(static_cast<std::uint64_t>(60000 + i)));
        const DepthFrame f = render(derive_single_scene(s, s.target_index), cam);
        self_nonzero += occlusion_level(f, f, s.target().id).level != 0.0;
    }
    int decreases = 0, checked = 0;
    for (int i = 0; i < 100; ++i) {
        const Scene full = generate_packed_scene(packed_config(static_cast<std::uint64_t>(61000 + i), 5, 5));
        Scene fewer = full;
        fewer.instances.pop_back();
        for (int t = 0; t < 4; ++t) {
            const PixelRegion region = projected_region(full, t, cam);
            const DepthFrame single = render(derive_single_scene(full, t), cam, region);
            const int id = full.instances[t].id;
            decreases += occlusion_level(single, render(full, cam, region), id).level <
                         occlusion_level(single, render(fewer, cam, region), id).level;
            ++checked;
        }
    }
    // Far wall fills a 10x10 view; a thin near plate covers exactly three rows.
    CameraModel small;
    small.width = small.height = 10;
    small.fx = small.fy = 100;
    small.cx = small.cy = 4.5;
    small.pose = look_at(Vec3(0.15, 0.0, 0.1), Vec3(0.15, 1.0, 0.1));
    const Scene wall = SceneBuilder(1.0)
                           .add(make_box(0.4, 0.02, 0.2), upright_pose(0.15, 0.51, 0.0))
                           .add(make_box(0.4, 0.005, 0.094), upright_pose(0.15, 0.3025, 0.0))
                           .target(0)
                           .build();
    const auto [total, visible] = count_by_rays(wall, small, 0);
    const OcclusionRecord r = occlusion_level(render(derive_single_scene(wall, 0), small), render(wall, small), 0);
    const bool exact = total == 100 && visible == 70 && r.total_pixels == 100 && r.visible_pixels == 70 && r.level == 0.3;
    return {self_nonzero == 0 && decreases == 0 && exact,
            fmt("self-pair nonzero %d/200, decreases %d/%d, constructed level %.3f (%zu/%zu, rays %zu/%zu)",
                self_nonzero, decreases, checked, r.level, r.visible_pixels, r.total_pixels, visible, total)};
}

// 3 ------------------------------------------------------------------------
Quaternion random_unit(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Quaternion::from_components(n(rng), n(rng), n(rng), n(rng)).normalized();
}

Vec3 random_axis(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Vec3(n(rng), n(rng), n(rng)).normalized();
}

Verdict loss_numerics() {
    Rng rng(mix_seed(301));
    double worst_orbit = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Quaternion r = random_unit(rng);
        const Vec3 axis = random_axis(rng);
        worst_orbit = std::max({worst_orbit, std::abs(rotation_loss(r, r, axis)),
                                std::abs(rotation_loss(mirrored_rotation(r, axis), r, axis))});
    }
    double worst_q = 0, worst_w = 0, worst_r = 0;
    int points = 0, kinks = 0;
    while (points < 100) {
        const Quaternion r = random_unit(rng), h = random_unit(rng);
        const Vec3 axis = random_axis(rng);
        const double q_hat = uniform(rng, 0.02, 0.98), w_hat = uniform(rng, 0, 0.08), w = uniform(rng, 0, 0.08);
        const int q = uniform_int(rng, 0, 1);
        try {
            const double eq = grad_check(quality_loss_function(q), {q_hat});
            const double ew = grad_check(width_loss_function(w), {w_hat});
            const double er = grad_check(rotation_loss_function(r, axis), {h.w, h.x, h.y, h.z});
            worst_q = std::max(worst_q, eq), worst_w = std::max(worst_w, ew), worst_r = std::max(worst_r, er);
            ++points;
        } catch (const KinkError&) {
            ++kinks;
        }
    }
    // Gating: with q = 0 nothing but the quality term moves.
    double worst_gate = 0.0;
    for (int i = 0; i < 100; ++i) {
        const GraspTarget t{0, random_unit(rng), uniform(rng, 0, 0.08), random_axis(rng)};
        const Quaternion h = random_unit(rng);
        const auto g = total_loss_grad({uniform(rng, 0.02, 0.98), h, uniform(rng, 0, 0.08)}, t);
        worst_gate = std::max({worst_gate, std::abs(g.w_hat), g.r_hat.cwiseAbs().maxCoeff()});
    }
    const bool ok = worst_orbit <= 1e-12 && worst_q < 1e-5 && worst_w < 1e-5 && worst_r < 1e-5 && worst_gate == 0.0;
    return {ok, fmt("orbit max %.1e over 1000, grad rel err q %.1e w %.1e r %.1e at %d points (%d kinks redrawn), "
                    "gated derivative max %.1e",
                    worst_orbit, worst_q, worst_w, worst_r, points, kinks, worst_gate)};
}

// 4 ------------------------------------------------------------------------
class CountingScorer final : public Scorer {
public:
    mutable std::atomic<std::size_t> calls{0};
    std::string name() const override { return "counting"; }
    ScoreFn bind(const PointCloud&, const PointCloud&) const override {
        return [this](const Vec3&) -> ScoreResult {
            ++calls;
            return {0.0, {}, 0.0};
        };
    }
};

Verdict pipeline_contracts() {
    CountingScorer counter;
    std::size_t queries = 0;
    score_grid(counter, {}, {}, GridConfig{}, 1, &queries);

    GridConfig small;
    small.resolution = 16;
    const double radius = 3.0;
    int nms_violations = 0;
    std::size_t picks_total = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto v = AffordanceVolumes::zeros(small);
        Rng rng(mix_seed(4000 + seed));
        for (auto& q : v.quality) q = uniform(rng, 0, 1) < 0.3 ? static_cast<float>(uniform(rng, 0, 1)) : 0.0f;
        const auto picks = nms_select_voxels(v, 0.2, radius, -1);
        picks_total += picks.size();
        for (std::size_t a = 0; a < picks.size(); ++a)
            for (std::size_t b = a + 1; b < picks.size(); ++b) {
                const int n = small.resolution;
                const auto c = [n](std::size_t f) {
                    return Vec3(double(f / (std::size_t(n) * n)), double((f / n) % n), double(f % n));
                };
                nms_violations += (c(picks[a]) - c(picks[b])).norm() <= radius;
            }
    }

    const CameraModel cam = default_camera();
    const OracleScorer scorer(cam.position());
    const PipelineConfig pc;
    int selections = 0, mask_violations = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Scene s = generate_packed_scene(packed_config(70000 + seed));
        const auto sel = select_best_grasp(s, render(s, cam), scorer, OracleCompleter(), pc);
        if (sel.no_grasp()) continue;
        ++selections;
        const auto mask = near_surface_mask(splat(oracle_completer({}, s), pc.grid), pc.mask_band);
        mask_violations += !mask[sel.voxel] || sel.grasp->center != pc.grid.voxel_center(sel.voxel);
    }
    return {queries == 64000 && counter.calls.load() == 64000 && nms_violations == 0 && mask_violations == 0 &&
                selections > 0,
            fmt("queries %zu (scorer saw %zu), NMS pairs within radius %d over %zu picks on 100 volumes, "
                "mask violations %d/%d selections",
                queries, counter.calls.load(), nms_violations, picks_total, mask_violations, selections)};
}

// 5 ------------------------------------------------------------------------
Verdict metric_oracles() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(mix_seed(500 + seed));
        PointCloud a, b;
        for (int i = 0; i < 100; ++i) {
            a.points.emplace_back(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
            b.points.emplace_back(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
        }
        auto dir = [](const PointCloud& x, const PointCloud& y) {
            double sum = 0.0;
            for (const Vec3& p : x.points) {
                double best = std::numeric_limits<double>::infinity();
                for (const Vec3& q : y.points) best = std::min(best, (p - q).norm());
                sum += best;
            }
            return sum / static_cast<double>(x.size());
        };
        worst = std::max(worst, std::abs(chamfer_l1(a, b) - 0.5 * (dir(a, b) + dir(b, a))));
    }
    const double v = 0.01;
    auto cells = [v](int lo, int hi) {
        PointCloud c;
        for (int i = lo; i < hi; ++i) c.points.emplace_back((i + 0.5) * v, 0.5 * v, 0.5 * v);
        return c;
    };
    const double same = volumetric_iou(cells(0, 20), cells(0, 20), v);
    const double disjoint = volumetric_iou(cells(0, 20), cells(100, 120), v);
    const double half = volumetric_iou(cells(0, 20), cells(10, 30), v);
    return {worst <= 1e-12 && same == 1.0 && disjoint == 0.0 && half == 1.0 / 3.0,
            fmt("chamfer vs brute force max diff %.1e over 50 pairs; IoU %.6f / %.6f / %.6f", worst, same, disjoint,
                half)};
}

// 6 ------------------------------------------------------------------------
struct ClosedLoop {
    Dataset dataset;
    EvalReport oracle, passthrough;
    double generate_seconds = 0, eval_seconds = 0;
};

ClosedLoop run_closed_loop(const fs::path& root) {
    ClosedLoop out;
    DatasetConfig dc;  // 9 test bins x 50, 350 labels per sample
    const auto t0 = Clock::now();
    out.dataset = build_dataset(dc, root);
    out.generate_seconds = seconds_since(t0);
    const auto t1 = Clock::now();
    EvalConfig ec;
    ec.trials_per_bin = 50;
    const CameraModel cam = default_camera(dc.workspace_extent);
    out.oracle = evaluate_policy(make_oracle_policy(cam, "oracle"), "oracle+oracle", out.dataset, ec);
    out.passthrough = evaluate_policy(make_oracle_policy(cam, "passthrough"), "oracle+passthrough", out.dataset, ec);
    out.eval_seconds = seconds_since(t1);
    return out;
}

Verdict closed_loop(const ClosedLoop& c) {
    bool full = true;
    for (const auto* r : {&c.oracle, &c.passthrough})
        for (const auto& b : r->bins) full = full && b.trials == 50;
    if (!full) return {false, "bins not filled to 50 trials"};
    auto g = [](const EvalReport& r, int b) { return *r.bins[b].gsr; };
    const double o0 = g(c.oracle, 0), o8 = g(c.oracle, 8), p0 = g(c.passthrough, 0), p8 = g(c.passthrough, 8);
    const double total = c.generate_seconds + c.eval_seconds;
    std::string curve = "oracle";
    for (const auto& b : c.oracle.bins) curve += fmt(" %.2f", *b.gsr);
    curve += " | passthrough";
    for (const auto& b : c.passthrough.bins) curve += fmt(" %.2f", *b.gsr);
    return {o0 >= 0.9 && (p0 - p8) > (o0 - o8) && total <= 1800.0,
            fmt("GSR[0,0.1) oracle %.2f; drop to [0.8,0.9) oracle %.2f passthrough %.2f; %.0fs (%s)", o0, o0 - o8,
                p0 - p8, total, curve.c_str())};
}

// 7 ------------------------------------------------------------------------
Verdict balancing(const Dataset& d) {
    std::vector<BinnedLabel> labels;
    for (const auto& s : d.samples)
        for (const auto& l : load_sample_labels(d, s)) labels.push_back({l, s.occlusion.bin_index});
    std::size_t single_pos = 0, clut_pos = 0;
    for (const auto& l : labels) single_pos += l.label.success_single, clut_pos += l.label.success_cluttered;

    bool equal = true;
    std::string per;
    for (auto ctx : {LabelContext::Single, LabelContext::Cluttered}) {
        const auto r = balance_grasps(labels, true, ctx, 7);
        std::map<int, std::size_t> pos, neg;
        for (const auto& l : r.labels) {
            const bool p = ctx == LabelContext::Single ? l.label.success_single : l.label.success_cluttered;
            (p ? pos : neg)[l.bin]++;
        }
        std::size_t unequal = 0;
        for (int b = 0; b < d.config.bins.bin_count(); ++b) unequal += pos[b] != neg[b];
        equal = equal && unequal == 0;
        std::size_t kept = 0;
        for (const auto& [b, n] : pos) kept += n;
        per += fmt("%s: %zu positives kept, unequal bins %zu; ", ctx == LabelContext::Single ? "single" : "cluttered",
                   kept, unequal);
    }
    return {labels.size() >= 1000 && equal && single_pos > clut_pos,
            fmt("%zu labels, single+ %zu > cluttered+ %zu; %s", labels.size(), single_pos, clut_pos, per.c_str())};
}

// 8 ------------------------------------------------------------------------
Verdict determinism() {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    DatasetConfig dc;
    dc.per_bin = 4;
    dc.grasps_per_sample = 50;
    dc.random_scenes = 32;
    EvalConfig ec;
    ec.trials_per_bin = 4;

    dc.workers = 1;
    ec.workers = 1;
    const Dataset da = build_dataset(dc, a);
    const auto ra = evaluate_policy(make_oracle_policy(default_camera(), "oracle"), "oracle", load_dataset(a), ec);
    dc.workers = 3;
    ec.workers = 3;
    const Dataset db = build_dataset(dc, b);
    const auto rb = evaluate_policy(make_oracle_policy(default_camera(), "oracle"), "oracle", load_dataset(b), ec);

    std::size_t compared = 1, differing = slurp(a / "index.json") != slurp(b / "index.json");
    for (const auto& s : da.scenes) {
        ++compared;
        differing += slurp(da.scene_dir(s.id) / "manifest.json") != slurp(db.scene_dir(s.id) / "manifest.json");
    }
    bool same_gsr = ra.bins.size() == rb.bins.size();
    for (std::size_t i = 0; same_gsr && i < ra.bins.size(); ++i) same_gsr = ra.bins[i].gsr == rb.bins[i].gsr;
    write_eval_csv(a / "eval.csv", ra);
    write_eval_csv(b / "eval.csv", rb);
    same_gsr = same_gsr && slurp(a / "eval.csv") == slurp(b / "eval.csv");
    fs::remove_all(a);
    fs::remove_all(b);
    return {differing == 0 && same_gsr && da.scenes.size() == db.scenes.size(),
            fmt("%zu manifests compared across 1 vs 3 workers, %zu differ; GSR identical: %s", compared, differing,
                same_gsr ? "yes" : "no")};
}

Verdict guarded(const std::function<Verdict()>& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        return {false, std::string("exception: ") + e.what()};
    }
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int n, const char* name, const Verdict& v) {
        std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", n, name, v.detail.c_str());
        std::fflush(stdout);
        failures += !v.pass;
    };
    report(1, "subset invariant", guarded(subset_invariant));
    report(2, "occlusion metric", guarded(occlusion_metric));
    report(3, "loss numerics", guarded(loss_numerics));
    report(4, "grid pipeline", guarded(pipeline_contracts));
    report(5, "metric oracles", guarded(metric_oracles));

    const fs::path root = scratch("closed_loop");
    std::optional<ClosedLoop> loop;
    std::string loop_error;
    try {
        loop = run_closed_loop(root);
    } catch (const std::exception& e) {
        loop_error = e.what();
    }
    report(6, "closed-loop grasping", loop ? guarded([&] { return closed_loop(*loop); }) : Verdict{false, loop_error});
    report(7, "balancing", loop ? guarded([&] { return balancing(loop->dataset); }) : Verdict{false, loop_error});
    fs::remove_all(root);
    report(8, "determinism", guarded(determinism));
    return failures == 0 ? 0 : 1;
}
