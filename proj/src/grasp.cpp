#include "occgrasp/grasp.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "occgrasp/error.hpp"
#include "occgrasp/parallel.hpp"
#include "occgrasp/random.hpp"
#include "occgrasp/sampling.hpp"

namespace occgrasp {

namespace {

constexpr std::uint64_t kSurfaceSalt = 0x5a3f1e01u;
constexpr std::uint64_t kCandidateSalt = 0x5a3f1e02u;

bool box_hits_instance(const OrientedBox& box, const ObjectInstance& inst) {
    if (!box.bounds().overlaps(inst.world_bounds())) return false;
    return inst.model->intersects_box(box.transformed(inst.pose.inverse()));
}

bool below_table(const OrientedBox& box) { return box.bounds().min.z() < 0.0; }


// Sutherland-Hodgman against the half-space s * p[axis] <= limit.
std::vector<Vec3> clip(const std::vector<Vec3>& poly, int axis, double sign, double limit) {
    std::vector<Vec3> out;
    if (poly.empty()) return out;
    out.reserve(poly.size() + 2);
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec3& a = poly[i];
        const Vec3& b = poly[(i + 1) % poly.size()];
        const double da = sign * a[axis] - limit, db = sign * b[axis] - limit;
        if (da <= 0) out.push_back(a);
        if ((da < 0 && db > 0) || (da > 0 && db < 0)) out.push_back(a + (b - a) * (da / (da - db)));
    }
    return out;
}

struct Contacts {
    bool found = false;
    double y_max = -std::numeric_limits<double>::infinity();
    double y_min = std::numeric_limits<double>::infinity();
    Vec3 n_max = Vec3::Zero();  // grasp frame
    Vec3 n_min = Vec3::Zero();
};

// Outermost target surface along +y and -y inside the closing region, with
// the face normal best aligned to the finger on ties.
Contacts find_contacts(const Grasp& grasp, const ObjectInstance& target, const GripperModel& g,
                       const OrientedBox& closing) {
    constexpr double kTie = 1e-7;
    Contacts c;
    const Pose to_grasp = grasp.frame().inverse() * target.pose;
    const Quaternion normal_rot = grasp.rotation.conjugate() * target.pose.rotation;
    const double hx = g.finger_breadth / 2, hy = grasp.width / 2;
    const double z0 = -g.palm_clearance, z1 = g.tip_reach();
    const OrientedBox local = closing.transformed(target.pose.inverse());
    const TriMesh& mesh = target.mesh();
    target.model->bvh().visit_overlapping(local.bounds(), [&](int f) {
        const auto& tri = mesh.triangles[f];
        std::vector<Vec3> poly = {to_grasp.transform_point(mesh.vertices[tri[0]]),
                                  to_grasp.transform_point(mesh.vertices[tri[1]]),
                                  to_grasp.transform_point(mesh.vertices[tri[2]])};
        poly = clip(poly, 0, 1.0, hx);
        poly = clip(poly, 0, -1.0, hx);
        poly = clip(poly, 1, 1.0, hy);
        poly = clip(poly, 1, -1.0, hy);
        poly = clip(poly, 2, 1.0, z1);
        poly = clip(poly, 2, -1.0, -z0);
        if (poly.empty()) return true;
        const Vec3 n = normal_rot.rotate(mesh.face_normals[f]);
        for (const Vec3& p : poly) {
            c.found = true;
            if (p.y() > c.y_max + kTie || (p.y() >= c.y_max - kTie && n.y() > c.n_max.y())) {
                c.y_max = std::max(c.y_max, p.y());
                c.n_max = n;
            }
            if (p.y() < c.y_min - kTie || (p.y() <= c.y_min + kTie && -n.y() > -c.n_min.y())) {
                c.y_min = std::min(c.y_min, p.y());
                c.n_min = n;
            }
        }
        return true;
    });
    return c;
}

Vec3 any_perpendicular(const Vec3& v) { return v.unitOrthogonal(); }

}  // namespace

void GripperModel::validate() const {
    for (double d : {max_width, finger_depth, finger_thickness, palm_clearance, finger_breadth, palm_breadth,
                     palm_thickness})
        if (!(d > 0)) throw InputError("gripper: all dimensions must be positive");
    if (!(width_clearance >= 0)) throw InputError("gripper: width_clearance must be non-negative");
    if (!(palm_clearance < finger_depth)) throw InputError("gripper: palm_clearance must be below finger_depth");
}

std::string to_string(FailureReason reason) {
    switch (reason) {
        case FailureReason::None: return "none";
        case FailureReason::TableBlock: return "table_block";
        case FailureReason::WidthExceeded: return "width_exceeded";
        case FailureReason::OccluderCollision: return "occluder_collision";
        case FailureReason::AntipodalFail: return "antipodal_fail";
    }
    return "none";
}

FailureReason failure_reason_from_string(const std::string& s) {
    for (auto r : {FailureReason::None, FailureReason::TableBlock, FailureReason::WidthExceeded,
                   FailureReason::OccluderCollision, FailureReason::AntipodalFail})
        if (to_string(r) == s) return r;
    throw InputError("unknown failure reason '" + s + "'");
}

GripperBoxes gripper_boxes(const Grasp& grasp, const GripperModel& g) {
    const Pose frame = grasp.frame();
    const double hw = grasp.width / 2, ft = g.finger_thickness, hb = g.finger_breadth / 2;
    const double z0 = -g.palm_clearance, z1 = g.tip_reach();
    const double standoff = g.finger_depth;
    const double palm_hy = g.max_width / 2 + ft, palm_hb = g.palm_breadth / 2;
    const double palm_z0 = z0 - g.palm_thickness;
    GripperBoxes b;
    b.finger_pos = OrientedBox::from_local_bounds(frame, Vec3(-hb, hw, z0), Vec3(hb, hw + ft, z1));
    b.finger_neg = OrientedBox::from_local_bounds(frame, Vec3(-hb, -hw - ft, z0), Vec3(hb, -hw, z1));
    b.palm = OrientedBox::from_local_bounds(frame, Vec3(-palm_hb, -palm_hy, palm_z0), Vec3(palm_hb, palm_hy, z0));
    b.swept_finger_pos = OrientedBox::from_local_bounds(frame, Vec3(-hb, hw, z0 - standoff), Vec3(hb, hw + ft, z1));
    b.swept_finger_neg = OrientedBox::from_local_bounds(frame, Vec3(-hb, -hw - ft, z0 - standoff), Vec3(hb, -hw, z1));
    b.swept_palm = OrientedBox::from_local_bounds(frame, Vec3(-palm_hb, -palm_hy, palm_z0 - standoff),
                                                  Vec3(palm_hb, palm_hy, z0));
    b.closing = OrientedBox::from_local_bounds(frame, Vec3(-hb, -hw, z0), Vec3(hb, hw, z1));
    return b;
}

std::vector<GraspCandidate> sample_candidate_grasps(const PointCloud& cloud, const GripperModel& gripper, int count,
                                                    std::uint64_t seed, const CandidateConfig& cfg) {
    if (cloud.empty()) throw InputError("sample_candidate_grasps: empty cloud");
    if (!cloud.has_normals()) throw InputError("sample_candidate_grasps: cloud needs normals");
    if (count < 0) throw InputError("sample_candidate_grasps: negative count");
    if (cfg.approach_angles < 1) throw InputError("sample_candidate_grasps: approach_angles must be >= 1");
    gripper.validate();
    std::vector<GraspCandidate> out;
    out.reserve(count);
    Rng rng(mix_seed(seed));
    const int n = static_cast<int>(cloud.size());
    const double tol2 = cfg.line_tolerance * cfg.line_tolerance;
    const double hb = gripper.finger_breadth / 2;
    const long budget = static_cast<long>(cfg.max_attempts_per_pair) * std::max(1, count / cfg.approach_angles + 1);
    long attempts = 0;
    while (static_cast<int>(out.size()) < count && attempts < budget) {
        ++attempts;
        const int pi = uniform_int(rng, 0, n - 1);
        const Vec3& p = cloud.points[pi];
        const Vec3& np = cloud.normals[pi];
        // First opposing surface point along the inward normal.
        int best = -1;
        double best_s = std::numeric_limits<double>::infinity();
        for (int qi = 0; qi < n; ++qi) {
            const Vec3 dq = cloud.points[qi] - p;
            const double s = -dq.dot(np);
            if (s < cfg.min_pair_distance || s > cfg.max_pair_distance || s >= best_s) continue;
            if ((dq + s * np).squaredNorm() > tol2) continue;
            if (cloud.normals[qi].dot(np) >= 0.0) continue;
            best = qi;
            best_s = s;
        }
        bool inferred = false;
        Vec3 q, nq;
        if (best >= 0) {
            q = cloud.points[best];
            nq = cloud.normals[best];
        } else if (cfg.infer_hidden_contacts) {
            const double r2 = cfg.hidden_search_radius * cfg.hidden_search_radius;
            double deepest = 0.0;
            for (const Vec3& c : cloud.points) {
                const Vec3 dq = c - p;
                const double s = -dq.dot(np);
                if (s <= deepest || s > cfg.max_pair_distance || (dq + s * np).squaredNorm() > r2) continue;
                deepest = s;
            }
            if (deepest < cfg.min_pair_distance) continue;
            q = p - deepest * np;
            nq = -np;
            inferred = true;
        } else {
            continue;
        }
        const double d = (p - q).norm();
        const Vec3 y = (p - q) / d;
        const Vec3 m = 0.5 * (p + q);
        const Vec3 e1 = any_perpendicular(y), e2 = y.cross(e1);
        const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        for (int k = 0; k < cfg.approach_angles && static_cast<int>(out.size()) < count; ++k) {
            const double theta = phase + 2.0 * std::numbers::pi * k / cfg.approach_angles;
            const Vec3 z = std::cos(theta) * e1 + std::sin(theta) * e2;
            const Vec3 x = y.cross(z);
            // Outermost cloud point against the approach inside the finger slab.
            double entry = 0.0;
            for (const Vec3& c : cloud.points) {
                const Vec3 r = c - m;
                if (std::abs(r.dot(x)) > hb || std::abs(r.dot(y)) > d / 2 + gripper.width_clearance / 2) continue;
                entry = std::max(entry, -r.dot(z));
            }
            Mat3 rot;
            rot.col(0) = x;
            rot.col(1) = y;
            rot.col(2) = z;
            GraspCandidate cand;
            cand.grasp.rotation = Quaternion::from_matrix(rot).canonical();
            cand.grasp.center = m - (entry + uniform(rng, 0.0, cfg.entry_offset_max)) * z;
            cand.grasp.width = std::min(d + gripper.width_clearance, gripper.max_width);
            cand.pair_distance = d;
            cand.contact_pos = p;
            cand.contact_neg = q;
            cand.normal_pos = np;
            cand.normal_neg = nq;
            cand.inferred = inferred;
            cand.flag = d > gripper.max_width ? FailureReason::WidthExceeded : FailureReason::None;
            out.push_back(cand);
        }
    }
    return out;
}

CollisionResult check_collision(const Grasp& grasp, const Scene& scene, const GripperModel& gripper) {
    const GripperBoxes b = gripper_boxes(grasp, gripper);
    CollisionResult r;
    if (below_table(b.swept_finger_pos) || below_table(b.swept_finger_neg) || below_table(b.swept_palm)) {
        r.free = false;
        r.table = true;
        return r;
    }
    for (int i = 0; i < static_cast<int>(scene.instances.size()); ++i) {
        const auto& inst = scene.instances[i];
        if (box_hits_instance(b.swept_finger_pos, inst) || box_hits_instance(b.swept_finger_neg, inst) ||
            box_hits_instance(b.swept_palm, inst)) {
            r.free = false;
            r.instance = i;
            return r;
        }
    }
    return r;
}

SimulationResult simulate_grasp(const Grasp& grasp, const Scene& scene, const GripperModel& gripper,
                                double friction_mu) {
    if (!(friction_mu >= 0)) throw InputError("simulate_grasp: friction must be non-negative");
    SimulationResult r;
    if (!(grasp.width > 0 && grasp.width <= gripper.max_width)) {
        r.reason = FailureReason::WidthExceeded;
        return r;
    }
    const GripperBoxes b = gripper_boxes(grasp, gripper);
    if (below_table(b.swept_finger_pos) || below_table(b.swept_finger_neg) || below_table(b.swept_palm)) {
        r.reason = FailureReason::TableBlock;
        return r;
    }
    const int ti = scene.target_index;
    const ObjectInstance& target = scene.target();
    if (box_hits_instance(b.swept_finger_pos, target) || box_hits_instance(b.swept_finger_neg, target)) {
        r.reason = FailureReason::WidthExceeded;
        r.offender = ti;
        return r;
    }
    if (box_hits_instance(b.swept_palm, target)) {
        r.reason = FailureReason::AntipodalFail;
        r.offender = ti;
        return r;
    }
    const Contacts c = find_contacts(grasp, target, gripper, b.closing);
    const double cone = 1.0 / std::sqrt(1.0 + friction_mu * friction_mu);  // cos(atan(mu))
    if (!c.found || !(c.y_max > c.y_min) || c.n_max.y() < cone || -c.n_min.y() < cone) {
        r.reason = FailureReason::AntipodalFail;
        return r;
    }
    for (int i = 0; i < static_cast<int>(scene.instances.size()); ++i) {
        if (i == ti) continue;
        const auto& inst = scene.instances[i];
        if (box_hits_instance(b.swept_finger_pos, inst) || box_hits_instance(b.swept_finger_neg, inst) ||
            box_hits_instance(b.swept_palm, inst) || box_hits_instance(b.closing, inst)) {
            r.reason = FailureReason::OccluderCollision;
            r.offender = i;
            return r;
        }
    }
    r.success = true;
    return r;
}

std::vector<GraspLabel> label_pair(const Scene& cluttered, const GripperModel& gripper, int count, std::uint64_t seed,
                                   const LabelConfig& config) {
    if (cluttered.target_index < 0 || cluttered.target_index >= static_cast<int>(cluttered.instances.size()))
        throw InputError("label_pair: scene has no valid target");
    const ObjectInstance& target = cluttered.target();
    const TriMesh world = target.mesh().transformed(target.pose);
    const PointCloud surface = surface_sample(world, config.surface_points, derive_seed(seed, 0, kSurfaceSalt));
    const auto candidates =
        sample_candidate_grasps(surface, gripper, count, derive_seed(seed, 0, kCandidateSalt), config.candidates);
    const Scene single = derive_single_scene(cluttered, cluttered.target_index);
    std::vector<GraspLabel> labels(candidates.size());
    parallel_for(candidates.size(), config.workers, [&](std::size_t i) {
        GraspLabel& l = labels[i];
        l.grasp = candidates[i].grasp;
        if (candidates[i].flag == FailureReason::WidthExceeded) {
            l.failure_reason = FailureReason::WidthExceeded;
            return;
        }
        const SimulationResult s = simulate_grasp(l.grasp, single, gripper, config.friction_mu);
        const SimulationResult c = simulate_grasp(l.grasp, cluttered, gripper, config.friction_mu);
        l.success_single = s.success;
        l.success_cluttered = c.success;
        l.failure_reason = c.reason;
        l.grasp.quality = c.success ? 1.0 : 0.0;
    });
    return labels;
}

GraspTaxonomy classify(const std::vector<GraspLabel>& labels) {
    GraspTaxonomy t;
    for (const auto& l : labels) {
        if (l.success_cluttered && !l.success_single) ++t.violations;
        else if (l.success_cluttered) ++t.succeed_both;
        else if (l.success_single) ++t.single_only;
        else ++t.fail_both;
    }
    return t;
}

nlohmann::json label_to_json(const std::string& scene_id, int target_index, const GraspLabel& l) {
    const Grasp& g = l.grasp;
    return {{"scene_id", scene_id},
            {"target_index", target_index},
            {"t", {g.center.x(), g.center.y(), g.center.z()}},
            {"r", {g.rotation.w, g.rotation.x, g.rotation.y, g.rotation.z}},
            {"w", g.width},
            {"success_single", l.success_single},
            {"success_cluttered", l.success_cluttered},
            {"reason", to_string(l.failure_reason)}};
}

GraspLabel label_from_json(const nlohmann::json& j) {
    try {
        GraspLabel l;
        const auto& t = j.at("t");
        const auto& r = j.at("r");
        l.grasp.center = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
        l.grasp.rotation = {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>()};
        l.grasp.width = j.at("w").get<double>();
        l.success_single = j.at("success_single").get<bool>();
        l.success_cluttered = j.at("success_cluttered").get<bool>();
        l.failure_reason = failure_reason_from_string(j.at("reason").get<std::string>());
        l.grasp.quality = l.success_cluttered ? 1.0 : 0.0;
        return l;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("label json: ") + e.what());
    } catch (const InputError& e) {
        throw IoError(std::string("label json: ") + e.what());
    }
}

void write_labels_jsonl(const std::filesystem::path& path, const std::string& scene_id, int target_index,
                        const std::vector<GraspLabel>& labels) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& l : labels) out << label_to_json(scene_id, target_index, l).dump() << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<GraspLabel> read_labels_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<GraspLabel> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(label_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw IoError(path.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace occgrasp
