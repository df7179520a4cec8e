#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "occgrasp/oriented_box.hpp"
#include "occgrasp/scene.hpp"

namespace occgrasp {

/// Parallel-jaw gripper in its grasp frame: z is the approach (wrist) axis,
/// y the closing axis, x = y cross z. The grasp center sits on the closing
/// axis `palm_clearance` ahead of the finger roots, so the fingertips reach
/// finger_depth - palm_clearance beyond it.
struct GripperModel {
    double max_width = 0.08;
    double finger_depth = 0.05;
    double finger_thickness = 0.01;
    double palm_clearance = 0.01;
    double finger_breadth = 0.02;
    double palm_breadth = 0.03;
    double palm_thickness = 0.02;
    /// Opening added to the contact-pair distance when sampling candidates.
    double width_clearance = 0.01;

    void validate() const;
    double tip_reach() const { return finger_depth - palm_clearance; }
};

struct Grasp {
    Vec3 center = Vec3::Zero();  // t
    Quaternion rotation;         // r, grasp frame to world
    double width = 0.0;          // w
    double quality = 0.0;        // q

    Vec3 approach() const { return rotation.rotate(Vec3::UnitZ()); }
    Vec3 closing_axis() const { return rotation.rotate(Vec3::UnitY()); }
    Pose frame() const { return {rotation, center}; }
};

enum class FailureReason { None, TableBlock, WidthExceeded, OccluderCollision, AntipodalFail };

std::string to_string(FailureReason reason);
FailureReason failure_reason_from_string(const std::string& s);

/// World-space solids of a gripper placed at a grasp.
struct GripperBoxes {
    OrientedBox finger_pos, finger_neg, palm;                    // final pose
    OrientedBox swept_finger_pos, swept_finger_neg, swept_palm;  // final pose plus standoff path
    OrientedBox closing;                                         // region between the fingers
};

GripperBoxes gripper_boxes(const Grasp& grasp, const GripperModel& gripper);

struct CandidateConfig {
    int approach_angles = 12;
    /// Largest distance the center is set back beyond the outermost target
    /// point along the approach axis.
    double entry_offset_max = 0.0075;
    /// Lateral tolerance when searching for the opposing point along the inward normal.
    double line_tolerance = 0.003;
    double min_pair_distance = 0.004;
    double max_pair_distance = 0.3;
    int max_attempts_per_pair = 50;
    /// Partial views rarely show both contact faces. When set and no opposing
    /// point is found, the far contact is placed at the deepest cloud point
    /// along the inward normal within `hidden_search_radius` of the normal line,
    /// with a normal opposite to the near one.
    bool infer_hidden_contacts = false;
    double hidden_search_radius = 0.04;
};

struct GraspCandidate {
    Grasp grasp;
    double pair_distance = 0.0;
    Vec3 contact_pos = Vec3::Zero();  // surface point on the +y side
    Vec3 contact_neg = Vec3::Zero();
    /// WidthExceeded when the pair is wider than the gripper, else None.
    FailureReason flag = FailureReason::None;
    Vec3 normal_pos = Vec3::Zero();
    Vec3 normal_neg = Vec3::Zero();
    bool inferred = false;  // contact_neg was inferred, not observed
};

/// Antipodal candidates from an oriented cloud. Each accepted pair yields
/// approach_angles candidates around its axis. Deterministic in `seed`.
/// Throws InputError on an empty cloud or missing normals.
std::vector<GraspCandidate> sample_candidate_grasps(const PointCloud& target_cloud, const GripperModel& gripper,
                                                    int count, std::uint64_t seed,
                                                    const CandidateConfig& config = {});

struct CollisionResult {
    bool free = true;
    bool table = false;
    std::optional<int> instance;  // index into scene.instances
};

/// Swept gripper (fingers and palm from standoff to final pose) against the
/// table half-space z <= 0 and every instance of the scene.
CollisionResult check_collision(const Grasp& grasp, const Scene& scene, const GripperModel& gripper);

struct SimulationResult {
    bool success = false;
    FailureReason reason = FailureReason::None;
    std::optional<int> offender;
};

/// Quasi-static oracle. Checks run in a fixed order: width, table, target
/// clearance of the fingers (width_exceeded), palm against target and
/// friction-cone contacts (antipodal_fail), then every other instance
/// (occluder_collision).
SimulationResult simulate_grasp(const Grasp& grasp, const Scene& scene, const GripperModel& gripper,
                                double friction_mu = 0.4);

struct GraspLabel {
    Grasp grasp;
    bool success_single = false;
    bool success_cluttered = false;
    FailureReason failure_reason = FailureReason::None;  // cluttered outcome
};

struct LabelConfig {
    int surface_points = 4096;
    double friction_mu = 0.4;
    unsigned workers = 1;
    CandidateConfig candidates;
};

/// Candidates from the true target surface, each simulated in the derived
/// single scene and in the cluttered scene.
std::vector<GraspLabel> label_pair(const Scene& cluttered, const GripperModel& gripper, int count, std::uint64_t seed,
                                   const LabelConfig& config = {});

struct GraspTaxonomy {
    std::size_t fail_both = 0;
    std::size_t single_only = 0;
    std::size_t succeed_both = 0;
    std::size_t violations = 0;  // cluttered success without single success
};

GraspTaxonomy classify(const std::vector<GraspLabel>& labels);

nlohmann::json label_to_json(const std::string& scene_id, int target_index, const GraspLabel& label);
GraspLabel label_from_json(const nlohmann::json& j);
void write_labels_jsonl(const std::filesystem::path& path, const std::string& scene_id, int target_index,
                        const std::vector<GraspLabel>& labels);
std::vector<GraspLabel> read_labels_jsonl(const std::filesystem::path& path);

}  // namespace occgrasp
