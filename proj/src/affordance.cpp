#include "occgrasp/affordance.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_set>

#include "occgrasp/error.hpp"
#include "occgrasp/kd_tree.hpp"
#include "occgrasp/parallel.hpp"
#include "occgrasp/point_ops.hpp"

namespace occgrasp {

namespace {

std::uint64_t voxel_key(const Vec3& p, double voxel) {
    // 21 bits per axis covers +-10 km at millimetre voxels.
    auto c = [&](double v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(v / voxel)) + (1 << 20)) & 0x1fffff; };
    return (c(p.x()) << 42) | (c(p.y()) << 21) | c(p.z());
}

// First point per voxel, in input order.
std::vector<Vec3> downsample(const std::vector<Vec3>& points, double voxel) {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(points.size());
    std::vector<Vec3> out;
    for (const Vec3& p : points)
        if (seen.insert(voxel_key(p, voxel)).second) out.push_back(p);
    return out;
}

struct LocalBox {
    Vec3 lo, hi;
    bool contains(const Vec3& p) const {
        return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }
};

struct Candidate {
    Quaternion rotation;
    Mat3 world_to_local;
    double width;
    bool inferred;
    Vec3 contact_neg;  // world, only meaningful when inferred
    Vec3 normal_neg;   // world
};

class OracleQuery {
public:
    OracleQuery(const Vec3& viewpoint, const OracleScorerConfig& cfg, const PointCloud& scene, const PointCloud& target)
        : cfg_(cfg), target_(target) {
        if (target_.empty()) return;
        if (!target_.has_normals()) target_ = estimate_normals(target_, viewpoint);
        const auto cands = sample_candidate_grasps(target_, cfg.gripper, cfg.candidate_count, cfg.seed, cfg.candidates);
        for (const auto& c : cands) {
            if (c.flag != FailureReason::None) continue;
            const Mat3 r = c.grasp.rotation.to_matrix();
            candidates_.push_back({c.grasp.rotation, r.transpose(), c.grasp.width, c.inferred, c.contact_neg, c.normal_neg});
            centers_.push_back(c.grasp.center);
        }
        center_tree_ = KdTree(centers_);
        target_tree_ = KdTree(target_.points);

        const auto& g = cfg.gripper;
        reach_ = std::sqrt(std::pow(g.max_width / 2 + g.finger_thickness, 2) + std::pow(g.palm_breadth / 2, 2) +
                           std::pow(g.palm_clearance + g.palm_thickness + g.finger_depth, 2)) +
                 cfg.margin;
        // Obstacles: scene points away from the target, thickened along the
        // camera ray, restricted to where the gripper can reach.
        const Aabb near = target_.bounds().inflated(reach_ + cfg.search_radius + 0.02);
        std::vector<Vec3> seeds;
        for (const Vec3& p : downsample(scene.points, cfg.obstacle_voxel / 2)) {
            if (!near.contains(p)) continue;
            // Point-to-plane distance to the nearest target sample, so sparse
            // target clouds still claim their own surface.
            double d2 = 0.0;
            const int n = target_tree_.nearest(p, &d2);
            const bool on_target = d2 <= cfg.target_exclusion_radius * cfg.target_exclusion_radius &&
                                   std::abs((p - target_.points[n]).dot(target_.normals[n])) <= cfg.target_exclusion;
            if (!on_target) seeds.push_back(p);
        }
        std::vector<Vec3> thick;
        const int steps = static_cast<int>(std::ceil(cfg.obstacle_depth / cfg.obstacle_voxel));
        for (const Vec3& p : seeds) {
            const Vec3 ray = (p - viewpoint).normalized();
            for (int s = 0; s <= steps; ++s) {
                const Vec3 q = p + ray * (cfg.obstacle_depth * s / std::max(1, steps));
                if (q.z() < 0) break;
                thick.push_back(q);
            }
        }
        obstacles_ = downsample(thick, cfg.obstacle_voxel);
        obstacle_tree_ = KdTree(obstacles_);
        cone_ = 1.0 / std::sqrt(1.0 + cfg.friction_mu * cfg.friction_mu);
    }

    ScoreResult operator()(const Vec3& t) const {
        ScoreResult best;
        if (candidates_.empty()) return best;
        const auto near = center_tree_.within_radius(t, cfg_.search_radius);
        if (near.empty()) return best;
        const auto target_pts = target_tree_.within_radius(t, reach_);
        std::vector<int> obstacle_pts;
        bool obstacles_loaded = false;
        for (int ci : near) {
            const Candidate& c = candidates_[ci];
            const double q = evaluate(t, c, target_pts, obstacle_pts, obstacles_loaded);
            if (q > best.quality) {
                best = {q, c.rotation, c.width};
                if (q >= 1.0) break;
            }
        }
        return best;
    }

private:
    double evaluate(const Vec3& t, const Candidate& c, const std::vector<int>& target_pts, std::vector<int>& obstacle_pts,
                    bool& obstacles_loaded) const {
        const auto& g = cfg_.gripper;
        Grasp grasp;
        grasp.center = t;
        grasp.rotation = c.rotation;
        grasp.width = c.width;
        const GripperBoxes boxes = gripper_boxes(grasp, g);
        for (const OrientedBox* b : {&boxes.swept_finger_pos, &boxes.swept_finger_neg, &boxes.swept_palm})
            if (b->bounds().min.z() < 0.0) return 0.0;

        const double m = cfg_.margin, hw = c.width / 2, ft = g.finger_thickness, hb = g.finger_breadth / 2;
        const double z0 = -g.palm_clearance, z1 = g.tip_reach(), sd = g.finger_depth;
        const double palm_hy = g.max_width / 2 + ft, palm_hb = g.palm_breadth / 2, pz0 = z0 - g.palm_thickness;
        const double mt = cfg_.target_margin;
        const LocalBox target_solids[3] = {
            {Vec3(-hb - mt, hw - mt, z0 - sd - mt), Vec3(hb + mt, hw + ft + mt, z1 + mt)},
            {Vec3(-hb - mt, -hw - ft - mt, z0 - sd - mt), Vec3(hb + mt, -hw + mt, z1 + mt)},
            {Vec3(-palm_hb - mt, -palm_hy - mt, pz0 - sd - mt), Vec3(palm_hb + mt, palm_hy + mt, z0 + mt)}};
        const LocalBox solids[3] = {
            {Vec3(-hb - m, hw - m, z0 - sd - m), Vec3(hb + m, hw + ft + m, z1 + m)},
            {Vec3(-hb - m, -hw - ft - m, z0 - sd - m), Vec3(hb + m, -hw + m, z1 + m)},
            {Vec3(-palm_hb - m, -palm_hy - m, pz0 - sd - m), Vec3(palm_hb + m, palm_hy + m, z0 + m)}};
        const LocalBox closing{Vec3(-hb, -hw, z0), Vec3(hb, hw, z1)};

        // Target alone: no points in the gripper, a contact on each side inside
        // the friction cone.
        double y_max = -1e9, y_min = 1e9, n_max = -2, n_min = -2;
        auto consider = [&](const Vec3& local, const Vec3& normal_local) {
            constexpr double kTie = 0.002;
            if (local.y() > y_max + kTie || (local.y() >= y_max - kTie && normal_local.y() > n_max)) {
                if (local.y() > y_max + kTie) n_max = normal_local.y();
                else n_max = std::max(n_max, normal_local.y());
                y_max = std::max(y_max, local.y());
            }
            if (local.y() < y_min - kTie || (local.y() <= y_min + kTie && -normal_local.y() > n_min)) {
                if (local.y() < y_min - kTie) n_min = -normal_local.y();
                else n_min = std::max(n_min, -normal_local.y());
                y_min = std::min(y_min, local.y());
            }
        };
        for (int i : target_pts) {
            const Vec3 local = c.world_to_local * (target_.points[i] - t);
            for (const auto& s : target_solids)
                if (s.contains(local)) return 0.0;
            if (closing.contains(local)) consider(local, c.world_to_local * target_.normals[i]);
        }
        if (c.inferred) {
            const Vec3 local = c.world_to_local * (c.contact_neg - t);
            if (!closing.contains(local)) return 0.0;
            consider(local, c.world_to_local * c.normal_neg);
        }
        if (!(y_max > y_min) || n_max < cone_ || n_min < cone_) return 0.0;

        if (!obstacles_loaded) {
            obstacle_pts = obstacle_tree_.within_radius(t, reach_);
            obstacles_loaded = true;
        }
        const LocalBox closing_m{closing.lo.array() - m, closing.hi.array() + m};
        for (int i : obstacle_pts) {
            const Vec3 local = c.world_to_local * (obstacles_[i] - t);
            if (closing_m.contains(local)) return cfg_.collision_quality;
            for (const auto& s : solids)
                if (s.contains(local)) return cfg_.collision_quality;
        }
        return 1.0;
    }

    OracleScorerConfig cfg_;
    PointCloud target_;
    std::vector<Candidate> candidates_;
    std::vector<Vec3> centers_;
    std::vector<Vec3> obstacles_;
    KdTree center_tree_, target_tree_, obstacle_tree_;
    double reach_ = 0.0;
    double cone_ = 1.0;
};

int reflect(int i, int n) {
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> w(2 * radius + 1);
    for (int k = -radius; k <= radius; ++k) w[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= sum;
    return w;
}

void check_same_grid(const GridConfig& a, const GridConfig& b) {
    if (a.resolution != b.resolution || a.extent != b.extent || a.origin != b.origin)
        throw InputError("grid mismatch between affordance volumes and TSDF");
}

}  // namespace

AffordanceVolumes AffordanceVolumes::zeros(const GridConfig& config) {
    config.validate();
    AffordanceVolumes v;
    v.config = config;
    v.quality.assign(config.voxel_count(), 0.0f);
    v.rotation.assign(config.voxel_count(), Quaternion{});
    v.width.assign(config.voxel_count(), 0.0f);
    return v;
}

void AffordanceVolumes::validate() const {
    const std::size_t n = config.voxel_count();
    if (quality.size() != n || rotation.size() != n || width.size() != n)
        throw InputError("affordance volumes: size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(quality[i] >= 0.0f && quality[i] <= 1.0f)) throw InputError("affordance volumes: quality outside [0, 1]");
        if (std::abs(rotation[i].norm() - 1.0) > 1e-6) throw InputError("affordance volumes: non-unit rotation");
    }
}

Grasp AffordanceVolumes::grasp_at(std::size_t flat) const {
    Grasp g;
    g.center = config.voxel_center(flat);
    g.rotation = rotation[flat];
    g.width = width[flat];
    g.quality = quality[flat];
    return g;
}

OracleScorer::OracleScorer(const Vec3& viewpoint, OracleScorerConfig config)
    : viewpoint_(viewpoint), config_(std::move(config)) {
    config_.gripper.validate();
    if (!(config_.search_radius > 0) || !(config_.obstacle_voxel > 0) || config_.obstacle_depth < 0 ||
        config_.margin < 0 || config_.target_margin < 0 || !(config_.collision_quality >= 0 && config_.collision_quality < 1))
        throw InputError("oracle scorer: invalid configuration");
}

ScoreFn OracleScorer::bind(const PointCloud& scene_cloud, const PointCloud& target_cloud) const {
    auto q = std::make_shared<const OracleQuery>(viewpoint_, config_, scene_cloud, target_cloud);
    return [q](const Vec3& t) { return (*q)(t); };
}

AffordanceVolumes score_grid(const Scorer& scorer, const PointCloud& scene_cloud, const PointCloud& target_cloud,
                             const GridConfig& config, unsigned workers, std::size_t* queries) {
    AffordanceVolumes v = AffordanceVolumes::zeros(config);
    const ScoreFn fn = scorer.bind(scene_cloud, target_cloud);
    std::atomic<std::size_t> calls{0};
    std::atomic<std::size_t> first_bad{std::numeric_limits<std::size_t>::max()};
    std::vector<std::string> messages(1);
    std::mutex message_mutex;
    parallel_for(config.voxel_count(), workers, [&](std::size_t i) {
        if (i > first_bad.load()) return;
        std::string error;
        try {
            ++calls;
            const ScoreResult r = fn(config.voxel_center(i));
            if (!(r.quality >= 0.0 && r.quality <= 1.0)) error = "quality outside [0, 1]";
            else if (!(std::abs(r.rotation.norm() - 1.0) < 1e-6)) error = "non-unit rotation";
            else if (!(r.width >= 0.0) || !std::isfinite(r.width)) error = "invalid width";
            else {
                v.quality[i] = static_cast<float>(r.quality);
                v.rotation[i] = r.rotation.normalized();
                v.width[i] = static_cast<float>(r.width);
            }
        } catch (const std::exception& e) {
            error = e.what();
        }
        if (error.empty()) return;
        std::lock_guard lock(message_mutex);
        if (i < first_bad.load()) {
            first_bad.store(i);
            messages[0] = error;
        }
    });
    if (queries) *queries = calls.load();
    if (first_bad.load() != std::numeric_limits<std::size_t>::max()) throw ScoreError(first_bad.load(), messages[0]);
    return v;
}

AffordanceVolumes smooth_quality(const AffordanceVolumes& volumes, double sigma) {
    if (!(sigma >= 0)) throw InputError("smooth_quality: sigma must be non-negative");
    AffordanceVolumes out = volumes;
    if (sigma == 0.0) return out;
    const int n = volumes.config.resolution;
    const auto w = gaussian_kernel(sigma);
    const int radius = static_cast<int>(w.size() / 2);
    std::vector<double> cur(volumes.quality.begin(), volumes.quality.end()), next(cur.size());
    const std::size_t stride[3] = {static_cast<std::size_t>(n) * n, static_cast<std::size_t>(n), 1};
    for (int axis = 0; axis < 3; ++axis) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const int idx[3] = {i, j, k};
                    const std::size_t src = volumes.config.index(i, j, k);
                    const double mass = cur[src];
                    if (mass == 0.0) continue;
                    const std::size_t base = src - idx[axis] * stride[axis];
                    // Scatter: each voxel spreads its own mass, folding what
                    // leaves the grid back in, so sums are unchanged.
                    for (int o = -radius; o <= radius; ++o)
                        next[base + reflect(idx[axis] + o, n) * stride[axis]] += w[o + radius] * mass;
                }
        std::swap(cur, next);
    }
    for (std::size_t i = 0; i < cur.size(); ++i) out.quality[i] = static_cast<float>(std::clamp(cur[i], 0.0, 1.0));
    return out;
}

AffordanceVolumes mask_by_tsdf(const AffordanceVolumes& volumes, const TsdfGrid& grid, double band) {
    check_same_grid(volumes.config, grid.config);
    const auto mask = near_surface_mask(grid, band);
    AffordanceVolumes out = volumes;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (!mask[i]) out.quality[i] = 0.0f;
    return out;
}

std::vector<std::size_t> nms_select_voxels(const AffordanceVolumes& v, double threshold, double radius, int max_count) {
    if (!(threshold >= 0 && threshold <= 1)) throw InputError("nms_select: threshold must lie in [0, 1]");
    if (!(radius >= 0)) throw InputError("nms_select: radius must be non-negative");
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < v.quality.size(); ++i)
        if (v.quality[i] > 0.0f && v.quality[i] >= threshold) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v.quality[a] > v.quality[b]; });
    const int n = v.config.resolution;
    auto coords = [n](std::size_t f) {
        return Eigen::Vector3d(static_cast<double>(f / (static_cast<std::size_t>(n) * n)), static_cast<double>((f / n) % n),
                               static_cast<double>(f % n));
    };
    std::vector<std::size_t> picked;
    std::vector<Eigen::Vector3d> picked_xyz;
    for (std::size_t f : order) {
        if (max_count >= 0 && static_cast<int>(picked.size()) >= max_count) break;
        const Eigen::Vector3d c = coords(f);
        bool clear = true;
        for (const auto& p : picked_xyz)
            if ((p - c).norm() <= radius) {
                clear = false;
                break;
            }
        if (!clear) continue;
        picked.push_back(f);
        picked_xyz.push_back(c);
    }
    return picked;
}

std::vector<Grasp> nms_select(const AffordanceVolumes& v, double threshold, double radius, int max_count) {
    std::vector<Grasp> out;
    for (std::size_t f : nms_select_voxels(v, threshold, radius, max_count)) out.push_back(v.grasp_at(f));
    return out;
}

GraspSelection select_best_grasp(const Scene& scene, const DepthFrame& frame, const Scorer& scorer,
                                 const Completer& completer, const PipelineConfig& config) {
    frame.validate();
    GraspSelection sel;
    const int target_id = scene.target().id;
    const Vec3 eye = frame.camera.position();
    const PointCloud scene_cloud = back_project(frame);
    PointCloud partial = back_project(frame, target_id);
    sel.target_points = partial.size();
    // The scene cloud says nothing about what surrounds an unseen target,
    // e.g. walls under a lid, so don't grasp blind.
    if (partial.empty()) return sel;
    partial = estimate_normals(partial, eye);
    CompletionContext ctx;
    ctx.scene = &scene;
    ctx.camera = frame.camera;
    CompletionResult completed = completer.complete(partial, ctx);
    sel.completion_warning = completed.warning;
    if (completed.cloud.empty()) return sel;
    if (!completed.cloud.has_normals()) completed.cloud = estimate_normals(completed.cloud, eye);
    const TsdfGrid tsdf = splat(completed.cloud, config.grid);
    AffordanceVolumes raw = score_grid(scorer, scene_cloud, completed.cloud, config.grid, config.workers, &sel.queries);
    const AffordanceVolumes masked =
        mask_by_tsdf(smooth_quality(raw, config.smoothing_sigma), tsdf, config.mask_band);
    for (std::size_t f : nms_select_voxels(masked, config.quality_threshold, config.nms_radius, config.nms_max_count)) {
        if (raw.quality[f] < config.raw_quality_threshold) continue;
        Grasp g = masked.grasp_at(f);
        sel.grasp = g;
        sel.voxel = f;
        break;
    }
    return sel;
}

void write_affordance(const std::filesystem::path& stem, const AffordanceVolumes& v) {
    v.validate();
    auto with = [&](const char* s) { return std::filesystem::path(stem.string() + s); };
    write_volume(with(".quality"), v.config, v.quality, {{"field", "quality"}});
    write_volume(with(".width"), v.config, v.width, {{"field", "width"}});
    const char* names[4] = {".rotation_w", ".rotation_x", ".rotation_y", ".rotation_z"};
    for (int c = 0; c < 4; ++c) {
        std::vector<float> data(v.rotation.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const Quaternion& q = v.rotation[i];
            data[i] = static_cast<float>(c == 0 ? q.w : c == 1 ? q.x : c == 2 ? q.y : q.z);
        }
        write_volume(with(names[c]), v.config, data, {{"field", std::string("rotation") + names[c]}});
    }
}

AffordanceVolumes read_affordance(const std::filesystem::path& stem) {
    auto with = [&](const char* s) { return std::filesystem::path(stem.string() + s); };
    AffordanceVolumes v;
    v.quality = read_volume(with(".quality"), v.config);
    GridConfig other;
    v.width = read_volume(with(".width"), other);
    check_same_grid(v.config, other);
    std::vector<float> comp[4];
    const char* names[4] = {".rotation_w", ".rotation_x", ".rotation_y", ".rotation_z"};
    for (int c = 0; c < 4; ++c) {
        comp[c] = read_volume(with(names[c]), other);
        check_same_grid(v.config, other);
    }
    v.rotation.resize(v.quality.size());
    for (std::size_t i = 0; i < v.rotation.size(); ++i)
        v.rotation[i] = Quaternion::from_components(comp[0][i], comp[1][i], comp[2][i], comp[3][i]).normalized();
    try {
        v.validate();
    } catch (const InputError& e) {
        throw IoError(stem.string() + ": " + e.what());
    }
    return v;
}

}  // namespace occgrasp
