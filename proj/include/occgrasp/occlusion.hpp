#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "occgrasp/camera.hpp"

namespace occgrasp {

struct OcclusionRecord {
    double level = 0.0;  // occluded fraction, 1 - visible / total
    int bin_index = -1;  // -1 when unassigned or out of range
    std::size_t visible_pixels = 0;
    std::size_t total_pixels = 0;
};

struct BinScheme {
    std::vector<double> edges;
    std::vector<std::string> labels;  // optional names, one per bin

    /// 0, 0.1, ..., 0.9, 0.95: ten bins.
    static BinScheme train();
    /// 0, 0.1, ..., 0.9: nine bins.
    static BinScheme test();
    /// Easy [0, 0.3), Medium [0.3, 0.6), Hard [0.6, 0.9).
    static BinScheme real_world();

    int bin_count() const { return static_cast<int>(edges.size()) - 1; }
    std::string label(int bin) const;
    /// Throws InputError unless edges start at 0, increase strictly and end <= 1.
    void validate() const;
};

/// Occlusion of the target with instance id `target_id`. The single frame
/// supplies the complete-target pixel count; throws MeasurementError when the
/// target is absent from it or the two frames use different cameras.
OcclusionRecord occlusion_level(const DepthFrame& single_frame, const DepthFrame& cluttered_frame, int target_id);

/// Half-open bin [edge_i, edge_i+1); nullopt for level >= last edge.
/// Throws InputError for a level outside [0, 1].
std::optional<int> assign_bin(double level, const BinScheme& scheme);

struct SceneFactors {
    int occluder_count = 0;
    double target_size = 0.0;  // min(length, width) of the canonical footprint
};

SceneFactors scene_factors(const Scene& scene);

/// Target-size buckets (a, b]: edges 0, 0.0275, 0.0392, 0.0509, 0.0626, 0.0743, 0.08, inf.
const std::vector<double>& size_bucket_edges();
int size_bucket(double target_size);
std::string size_bucket_label(int bucket);

struct OcclusionRow {
    std::string scene_id;
    int target_index = 0;
    OcclusionRecord record;
};

void write_occlusion_csv(const std::filesystem::path& path, const std::vector<OcclusionRow>& rows);
std::vector<OcclusionRow> read_occlusion_csv(const std::filesystem::path& path);

}  // namespace occgrasp
