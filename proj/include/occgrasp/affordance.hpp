#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "occgrasp/completion.hpp"
#include "occgrasp/grasp.hpp"
#include "occgrasp/tsdf.hpp"

namespace occgrasp {

/// Per-voxel grasp quality, rotation and width over a GridConfig.
struct AffordanceVolumes {
    GridConfig config;
    std::vector<float> quality;  // [0, 1]
    std::vector<Quaternion> rotation;
    std::vector<float> width;

    static AffordanceVolumes zeros(const GridConfig& config);
    /// Throws InputError on size mismatch, quality outside [0, 1] or non-unit rotations.
    void validate() const;
    /// Grasp centered on voxel `flat` from the three volumes.
    Grasp grasp_at(std::size_t flat) const;
};

struct ScoreResult {
    double quality = 0.0;
    Quaternion rotation;
    double width = 0.0;
};

/// Query point t -> (q, r, w) for fixed scene and target clouds.
using ScoreFn = std::function<ScoreResult(const Vec3& t)>;

class Scorer {
public:
    virtual ~Scorer() = default;
    virtual std::string name() const = 0;
    /// Prepares a pure query function over the scene cloud P and the
    /// (completed) target cloud P'_k.
    virtual ScoreFn bind(const PointCloud& scene_cloud, const PointCloud& target_cloud) const = 0;
};

class ConstantScorer final : public Scorer {
public:
    explicit ConstantScorer(double quality, double width = 0.05, Quaternion rotation = {})
        : result_{quality, rotation, width} {}
    std::string name() const override { return "constant"; }
    ScoreFn bind(const PointCloud&, const PointCloud&) const override {
        return [r = result_](const Vec3&) { return r; };
    }

private:
    ScoreResult result_;
};

struct OracleScorerConfig {
    GripperModel gripper;
    CandidateConfig candidates = [] {
        CandidateConfig c;
        c.infer_hidden_contacts = true;
        return c;
    }();
    int candidate_count = 720;
    std::uint64_t seed = 0;
    double friction_mu = 0.4;
    /// Candidates whose center lies within this distance of the query are tried there.
    double search_radius = 0.0075;
    /// Scene points are obstacles unless within `target_exclusion` of the
    /// tangent plane of a target point at most `target_exclusion_radius` away.
    double target_exclusion = 0.003;
    double target_exclusion_radius = 0.01;
    /// Hidden obstacle volume assumed behind each visible obstacle point, along the camera ray.
    double obstacle_depth = 0.03;
    double obstacle_voxel = 0.003;
    /// Slack added to gripper boxes when testing obstacle and target points.
    double margin = 0.002;
    double target_margin = 0.0005;
    /// Quality of a grasp that works on the target alone but touches the scene cloud.
    double collision_quality = 0.25;
};

/// Analytic default scorer. Antipodal candidates are sampled from the target
/// cloud; a query takes the best candidate within `search_radius`, moved to
/// the query point, checked against the table and the target cloud (q = 1) and
/// then against obstacle points of the scene cloud (q = collision_quality on contact).
class OracleScorer final : public Scorer {
public:
    OracleScorer(const Vec3& viewpoint, OracleScorerConfig config = {});
    std::string name() const override { return "oracle"; }
    ScoreFn bind(const PointCloud& scene_cloud, const PointCloud& target_cloud) const override;
    const OracleScorerConfig& config() const { return config_; }

private:
    Vec3 viewpoint_;
    OracleScorerConfig config_;
};

/// A scorer threw or returned an invalid result at `voxel`.
class ScoreError : public std::runtime_error {
public:
    ScoreError(std::size_t voxel, const std::string& what)
        : std::runtime_error("scorer failed at voxel " + std::to_string(voxel) + ": " + what), voxel_(voxel) {}
    std::size_t voxel() const { return voxel_; }

private:
    std::size_t voxel_;
};

/// Evaluates the scorer at every voxel center, in voxel order. `queries`
/// receives the number of scorer calls. On failure the lowest failing voxel is reported.
AffordanceVolumes score_grid(const Scorer& scorer, const PointCloud& scene_cloud, const PointCloud& target_cloud,
                             const GridConfig& config = {}, unsigned workers = 1, std::size_t* queries = nullptr);

/// Separable Gaussian on the quality volume. Mass that would leave the grid is
/// reflected back at the faces, so the total is preserved. sigma 0 is the identity.
AffordanceVolumes smooth_quality(const AffordanceVolumes& volumes, double kernel_sigma);

/// Quality zeroed where near_surface_mask(grid, band) is false.
AffordanceVolumes mask_by_tsdf(const AffordanceVolumes& volumes, const TsdfGrid& grid, double band);

/// Greedy descending-quality selection of voxels with quality > 0 and
/// >= threshold, each more than `suppression_radius` voxels from all earlier picks.
std::vector<std::size_t> nms_select_voxels(const AffordanceVolumes& volumes, double quality_threshold,
                                           double suppression_radius, int max_count);
std::vector<Grasp> nms_select(const AffordanceVolumes& volumes, double quality_threshold, double suppression_radius,
                              int max_count);

struct PipelineConfig {
    GridConfig grid;
    double smoothing_sigma = 1.0;
    double mask_band = 1.0;
    double quality_threshold = 0.1;
    /// An NMS pick is only returned when its unsmoothed quality reaches this.
    double raw_quality_threshold = 0.5;
    double nms_radius = 2.0;
    int nms_max_count = 32;
    unsigned workers = 1;
};

struct GraspSelection {
    std::optional<Grasp> grasp;  // empty: no grasp above threshold
    std::size_t voxel = 0;
    std::size_t queries = 0;
    std::size_t target_points = 0;
    std::string completion_warning;

    bool no_grasp() const { return !grasp.has_value(); }
};

/// back_project -> complete target -> splat target TSDF -> score_grid ->
/// smooth -> mask -> NMS -> first pick whose raw quality passes.
/// A target with no visible pixel gets no grasp (nothing observed to complete).
GraspSelection select_best_grasp(const Scene& scene, const DepthFrame& frame, const Scorer& scorer,
                                 const Completer& completer, const PipelineConfig& config = {});

/// Writes <stem>.quality, <stem>.rotation_{w,x,y,z} and <stem>.width volumes.
void write_affordance(const std::filesystem::path& stem, const AffordanceVolumes& volumes);
AffordanceVolumes read_affordance(const std::filesystem::path& stem);

}  // namespace occgrasp
