#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "occgrasp/scene.hpp"

namespace occgrasp {

/// Pinhole camera, OpenCV convention (x right, y down, z forward). Pixel (u, v)
/// looks along ((u - cx) / fx, (v - cy) / fy, 1) in the camera frame.
struct CameraModel {
    int width = 640;
    int height = 480;
    double fx = 540.0, fy = 540.0;
    double cx = 320.0, cy = 240.0;
    Pose pose;  // camera-to-world

    void validate() const;
    Vec3 position() const { return pose.translation; }
    /// Unit world-space direction through pixel (u, v).
    Vec3 pixel_ray(double u, double v) const;
    /// (u, v, depth) of a world point; nullopt when it is behind the camera.
    std::optional<Vec3> project(const Vec3& world) const;
    /// World point at pixel (u, v) with z-depth `depth`.
    Vec3 unproject(double u, double v, double depth) const;
};

/// Camera-to-world pose at `eye` looking at `target`, image up towards +z.
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

/// 640x480, f = 540, side view at 45 degrees elevation from the -y side,
/// 2 * extent from the workspace cube center.
CameraModel default_camera(double workspace_extent = 0.3);

inline constexpr std::uint16_t kBackground = 0xFFFF;

struct DepthFrame {
    CameraModel camera;
    /// Row-major z-depth in meters, 0 where nothing was hit.
    std::vector<float> depth;
    /// Row-major instance ids (ObjectInstance::id), kBackground where empty.
    std::vector<std::uint16_t> instance_id;

    int width() const { return camera.width; }
    int height() const { return camera.height; }
    std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * camera.width + u; }
    std::size_t count(std::uint16_t id) const;
    /// Throws InputError when buffers or the depth/id invariant are inconsistent.
    void validate() const;
};

/// Inclusive-exclusive pixel window [u0, u1) x [v0, v1).
struct PixelRegion {
    int u0 = 0, v0 = 0, u1 = 0, v1 = 0;
    bool empty() const { return u1 <= u0 || v1 <= v0; }
};

/// Pixels that can possibly show instance `instance_index` of `scene`.
PixelRegion projected_region(const Scene& scene, int instance_index, const CameraModel& camera);

/// Nearest-surface depth and instance id per pixel. Pixels outside `region`
/// (when given) are left as background. Deterministic for any worker count.
DepthFrame render(const Scene& scene, const CameraModel& camera, const std::optional<PixelRegion>& region = {},
                  unsigned workers = 1);

/// i.i.d. zero-mean Gaussian noise on every non-background depth.
DepthFrame add_depth_noise(const DepthFrame& frame, double sigma, std::uint64_t seed);

/// World points of retained pixels (all non-background, or only `instance_filter`).
PointCloud back_project(const DepthFrame& frame, std::optional<int> instance_filter = {});

nlohmann::json camera_to_json(const CameraModel& camera);
CameraModel camera_from_json(const nlohmann::json& j);

/// Writes <stem>.depth.f32, <stem>.instance.u16 and <stem>.json.
void write_frame(const std::filesystem::path& stem, const DepthFrame& frame);
DepthFrame read_frame(const std::filesystem::path& stem);

}  // namespace occgrasp
