#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "occgrasp/camera.hpp"

namespace occgrasp {

/// Cubic grid over [origin, origin + extent]^3; voxel (i, j, k) is stored at
/// (i * resolution + j) * resolution + k with i along x and k along z.
struct GridConfig {
    int resolution = 40;
    double extent = 0.3;
    Vec3 origin = Vec3::Zero();
    /// Truncation distance in voxel widths.
    double truncation_voxels = 4.0;

    void validate() const;
    double voxel_size() const { return extent / resolution; }
    double truncation() const { return truncation_voxels * voxel_size(); }
    std::size_t voxel_count() const { return static_cast<std::size_t>(resolution) * resolution * resolution; }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * resolution + j) * resolution + k;
    }
    Vec3 voxel_center(int i, int j, int k) const {
        return origin + (Eigen::Vector3d(i, j, k).array() + 0.5).matrix() * voxel_size();
    }
    Vec3 voxel_center(std::size_t flat) const;
    /// Voxel containing p, or false when p lies outside the grid.
    bool locate(const Vec3& p, int& i, int& j, int& k) const;
};

struct TsdfGrid {
    GridConfig config;
    std::vector<float> values;   // normalized signed distance in [-1, 1]
    std::vector<float> weights;  // 0 exactly where unobserved
    std::string source;          // camera or cloud identifier

    int resolution() const { return config.resolution; }
    float value(int i, int j, int k) const { return values[config.index(i, j, k)]; }
    float weight(int i, int j, int k) const { return weights[config.index(i, j, k)]; }
};

/// Single-view projective TSDF. Each voxel center is projected to its nearest
/// pixel; the signed distance is measured depth minus voxel depth, clamped to
/// the truncation and normalized. Voxels behind the surface by more than the
/// truncation, or outside the image, stay unobserved (value -1, weight 0).
/// Background pixels observe free space all the way (value +1).
TsdfGrid fuse(const DepthFrame& frame, const GridConfig& config, unsigned workers = 1);

/// TSDF of an oriented point cloud: voxels whose center lies within one voxel
/// width of a point receive the signed distance along that point's normal;
/// all others are unobserved.
TsdfGrid splat(const PointCloud& cloud, const GridConfig& config);

/// True where 0 <= value < band and weight > 0. Throws InputError unless 0 < band <= 1.
std::vector<std::uint8_t> near_surface_mask(const TsdfGrid& grid, double band);

nlohmann::json grid_config_to_json(const GridConfig& config);
GridConfig grid_config_from_json(const nlohmann::json& j);

/// Raw little-endian float32 volume plus a JSON header.
void write_volume(const std::filesystem::path& stem, const GridConfig& config, const std::vector<float>& data,
                  const nlohmann::json& extra = {});
std::vector<float> read_volume(const std::filesystem::path& stem, GridConfig& config, nlohmann::json* extra = nullptr);

/// Writes <stem>.tsdf.f32, <stem>.weight.f32 and <stem>.json.
void write_tsdf(const std::filesystem::path& stem, const TsdfGrid& grid);
TsdfGrid read_tsdf(const std::filesystem::path& stem);

}  // namespace occgrasp
