#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "occgrasp/affordance.hpp"
#include "occgrasp/completion.hpp"
#include "occgrasp/grasp.hpp"
#include "occgrasp/occlusion.hpp"

namespace occgrasp {

/// Output root used when a command is not given one: $OCCGRASP_OUTPUT_ROOT, else ./occgrasp_out.
std::filesystem::path default_output_root();

/// 64-bit FNV-1a of a file's bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::filesystem::path& path);

struct DatasetConfig {
    std::string split = "test";  // "train" or "test"
    BinScheme bins = BinScheme::test();
    /// Samples per bin; 0 keeps every target of `scene_count` random scenes.
    int per_bin = 50;
    int scene_count = 0;
    /// Random packed scenes tried before switching to targeted placement.
    int random_scenes = 100;
    /// Targeted placement attempts allowed per unfilled bin.
    int max_attempts_per_bin = 600;
    bool targeted_placement = true;
    std::uint64_t seed = 7;
    CatalogConfig catalog;
    int min_objects = 4;
    int max_objects = 6;
    double workspace_extent = 0.3;
    /// Oracle-labelled candidates per sample; 0 writes no labels.
    int grasps_per_sample = 350;
    /// Also store the paired single-scene frame of every accepted target
    /// (single_t<k>.*); it can always be re-rendered from the manifest.
    bool write_single_frames = false;
    unsigned workers = 1;

    void validate() const;
};

nlohmann::json dataset_config_to_json(const DatasetConfig& config);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

/// One (cluttered scene, target) pair.
struct SampleRecord {
    std::string id;        // <scene_id>_t<target_index>
    std::string scene_id;  // directory under scenes/
    int target_index = 0;
    std::string split;
    std::string placement;  // "random" or "targeted"
    OcclusionRecord occlusion;
    SceneFactors factors;
};

/// One cluttered scene directory and the checksums of its files.
struct SceneRecord {
    std::string id;
    std::string placement;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> checksums;  // file name -> FNV-1a hex
};

struct Dataset {
    std::filesystem::path root;
    DatasetConfig config;
    CatalogPtr catalog;
    std::vector<SceneRecord> scenes;
    std::vector<SampleRecord> samples;
    /// Missing samples per bin when a quota could not be met; empty without quotas.
    std::vector<int> shortfall;
    /// Attempts spent per phase.
    int random_scenes_tried = 0;
    std::vector<int> targeted_attempts;  // per bin

    std::filesystem::path scene_dir(const std::string& scene_id) const { return root / "scenes" / scene_id; }
    std::vector<int> bin_counts() const;
};

/// Generates, renders, measures, labels and bins samples under `root`. Each
/// scene gets scenes/<id>/ holding manifest.json, the cluttered frame
/// (cluttered.depth.f32, .instance.u16, .json), occlusion.csv and labels.jsonl;
/// root/index.json lists every sample and file checksum. Unfilled quotas are
/// reported in `shortfall`, not thrown. Throws IoError when root already holds a dataset.
Dataset build_dataset(const DatasetConfig& config, const std::filesystem::path& root);

/// Reads index.json. With `verify`, every listed file must exist and match its
/// checksum and every bin must agree with its level; IoError names the sample.
Dataset load_dataset(const std::filesystem::path& root, bool verify = true);

/// Relabels every sample (replacing labels.jsonl) and rewrites index.json.
void label_dataset(Dataset& dataset, int grasps_per_sample, unsigned workers = 1);

Scene load_sample_scene(const Dataset& dataset, const SampleRecord& sample);
DepthFrame load_sample_frame(const Dataset& dataset, const SampleRecord& sample);
std::vector<GraspLabel> load_sample_labels(const Dataset& dataset, const SampleRecord& sample);

/// Labelled grasp tagged with its sample's occlusion bin.
struct BinnedLabel {
    GraspLabel label;
    int bin = -1;
};

enum class LabelContext { Single, Cluttered };

struct BalanceReport {
    std::vector<BinnedLabel> labels;
    std::map<int, std::size_t> positives, negatives;  // after balancing, per bin (-1 when pooled)
    std::vector<std::string> warnings;
};

/// Seeded subsampling of negatives down to the positive count, per bin when
/// `per_bin`, else pooled. Positives are never dropped; a bin without
/// positives is emitted empty with a warning. Throws InputError on empty input.
BalanceReport balance_grasps(const std::vector<BinnedLabel>& labels, bool per_bin, LabelContext context,
                             std::uint64_t seed);

/// Grasp for (cluttered scene, rendered frame); nullopt means no grasp.
using Policy = std::function<std::optional<Grasp>(const Scene& scene, const DepthFrame& frame)>;

Policy make_oracle_policy(const CameraModel& camera, const std::string& completer, PipelineConfig pipeline = {},
                          OracleScorerConfig scorer = {});
/// Uniform random grasp near the visible target.
Policy make_random_policy(std::uint64_t seed);

struct Outcome {
    std::string sample_id;
    int bin = -1;
    double level = 0.0;
    int occluder_count = 0;
    double target_size = 0.0;
    bool success = false;
    bool no_grasp = false;
    std::string reason;
};

struct BinResult {
    int bin = 0;
    std::string label;
    std::size_t trials = 0;
    std::size_t successes = 0;
    std::optional<double> gsr;  // empty when trials == 0
};

struct EvalReport {
    std::string policy;
    std::uint64_t seed = 0;
    nlohmann::json config;
    std::vector<BinResult> bins;
    std::vector<Outcome> outcomes;
};

struct EvalConfig {
    int trials_per_bin = 50;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

/// Runs the policy on the first trials_per_bin test samples of every bin and
/// simulates each returned grasp in the cluttered scene; no-grasp counts as a failure.
EvalReport evaluate_policy(const Policy& policy, const std::string& policy_name, const Dataset& dataset,
                           const EvalConfig& config);

/// Per-bin rows recomputed from raw outcomes.
std::vector<BinResult> aggregate_bins(const std::vector<Outcome>& outcomes, const BinScheme& scheme);

struct FactorCell {
    std::size_t trials = 0;
    std::size_t successes = 0;
    std::optional<double> gsr;
};

struct FactorTables {
    /// occluder count -> cell; rows 0 through 6 always present.
    std::map<int, FactorCell> by_occluders;
    /// (occlusion bin, size bucket) -> cell; every bucket present for each bin seen.
    std::map<std::pair<int, int>, FactorCell> by_size;
};

FactorTables analyze_factors(const std::vector<Outcome>& outcomes);

void write_eval_csv(const std::filesystem::path& path, const EvalReport& report);
void write_outcomes_csv(const std::filesystem::path& path, const std::vector<Outcome>& outcomes);
std::vector<Outcome> read_outcomes_csv(const std::filesystem::path& path);
/// bin,label,trials,successes,gsr rows; gsr empty for untried bins.
std::vector<BinResult> read_eval_csv(const std::filesystem::path& path);
void write_factor_csvs(const std::filesystem::path& dir, const FactorTables& tables);

struct CompletionEvalConfig {
    std::vector<std::string> completers = {"oracle", "mirror", "passthrough"};
    /// Samples used per bin; 0 uses all.
    int samples_per_bin = 10;
    double voxel_size = 0.0075;
    int reference_points = 8192;
    unsigned workers = 1;
};

/// CD-l1 (x1000) and voxel IoU (%) of every completer's output against a dense
/// surface sample of the true target, on the visible target points of each sample.
std::vector<CompletionRow> evaluate_completion(const Dataset& dataset, const CompletionEvalConfig& config);

/// GSR against occlusion-bin midpoint, one colored polyline per series.
void write_gsr_plot_png(const std::filesystem::path& path,
                        const std::vector<std::pair<std::string, std::vector<BinResult>>>& series,
                        const BinScheme& scheme, int width = 640, int height = 400);

}  // namespace occgrasp
