#include "occgrasp/camera.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include "occgrasp/error.hpp"
#include "occgrasp/parallel.hpp"
#include "occgrasp/random.hpp"

namespace occgrasp {

static_assert(std::endian::native == std::endian::little, "raw frame files are little-endian");

void CameraModel::validate() const {
    if (width <= 0 || height <= 0) throw InputError("camera: image size must be positive");
    if (!(fx > 0) || !(fy > 0)) throw InputError("camera: focal lengths must be positive");
    if (!(cx >= 0 && cx < width && cy >= 0 && cy < height)) throw InputError("camera: principal point outside image");
    if (std::abs(pose.rotation.norm() - 1.0) > 1e-9) throw InputError("camera: pose rotation not unit");
}

Vec3 CameraModel::pixel_ray(double u, double v) const {
    return pose.transform_vector(Vec3((u - cx) / fx, (v - cy) / fy, 1.0).normalized());
}

std::optional<Vec3> CameraModel::project(const Vec3& world) const {
    const Vec3 p = pose.inverse().transform_point(world);
    if (!(p.z() > 0)) return std::nullopt;
    return Vec3(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy, p.z());
}

Vec3 CameraModel::unproject(double u, double v, double depth) const {
    return pose.transform_point(Vec3((u - cx) / fx * depth, (v - cy) / fy * depth, depth));
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    const Vec3 z = (target - eye).normalized();
    Vec3 x = z.cross(up);
    if (x.norm() < 1e-12) throw InputError("look_at: view direction parallel to up");
    x.normalize();
    const Vec3 y = z.cross(x);
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return {Quaternion::from_matrix(r), eye};
}

CameraModel default_camera(double workspace_extent) {
    CameraModel cam;
    const Vec3 center = Vec3::Constant(workspace_extent / 2);
    const double elevation = std::numbers::pi / 4;
    const double distance = 2.0 * workspace_extent;
    const Vec3 eye = center + distance * Vec3(0.0, -std::cos(elevation), std::sin(elevation));
    cam.pose = look_at(eye, center);
    return cam;
}

std::size_t DepthFrame::count(std::uint16_t id) const {
    std::size_t n = 0;
    for (auto i : instance_id) n += (i == id);
    return n;
}

void DepthFrame::validate() const {
    camera.validate();
    const std::size_t n = static_cast<std::size_t>(camera.width) * camera.height;
    if (depth.size() != n || instance_id.size() != n) throw InputError("frame: buffer size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        const bool bg = instance_id[i] == kBackground;
        if (bg != (depth[i] == 0.0f) || !std::isfinite(depth[i]))
            throw InputError("frame: depth/instance mismatch at pixel " + std::to_string(i));
        if (!bg && !(depth[i] > 0.0f)) throw InputError("frame: non-positive depth at pixel " + std::to_string(i));
    }
}

PixelRegion projected_region(const Scene& scene, int instance_index, const CameraModel& camera) {
    const Aabb b = scene.instances.at(instance_index).world_bounds();
    double umin = 1e300, vmin = 1e300, umax = -1e300, vmax = -1e300;
    for (int c = 0; c < 8; ++c) {
        const Vec3 p((c & 1) ? b.max.x() : b.min.x(), (c & 2) ? b.max.y() : b.min.y(), (c & 4) ? b.max.z() : b.min.z());
        const auto uv = camera.project(p);
        if (!uv) return {0, 0, camera.width, camera.height};
        umin = std::min(umin, uv->x());
        umax = std::max(umax, uv->x());
        vmin = std::min(vmin, uv->y());
        vmax = std::max(vmax, uv->y());
    }
    PixelRegion r;
    r.u0 = std::clamp(static_cast<int>(std::floor(umin)) - 1, 0, camera.width);
    r.v0 = std::clamp(static_cast<int>(std::floor(vmin)) - 1, 0, camera.height);
    r.u1 = std::clamp(static_cast<int>(std::ceil(umax)) + 2, 0, camera.width);
    r.v1 = std::clamp(static_cast<int>(std::ceil(vmax)) + 2, 0, camera.height);
    return r;
}

DepthFrame render(const Scene& scene, const CameraModel& camera, const std::optional<PixelRegion>& region,
                  unsigned workers) {
    camera.validate();
    DepthFrame frame;
    frame.camera = camera;
    const std::size_t n = static_cast<std::size_t>(camera.width) * camera.height;
    frame.depth.assign(n, 0.0f);
    frame.instance_id.assign(n, kBackground);
    if (scene.instances.empty()) return frame;

    const std::vector<PlacedMesh> placed = scene.placed();
    std::vector<Aabb> bounds;
    for (const auto& p : placed) bounds.push_back(p.world_bounds());
    const PixelRegion r = region.value_or(PixelRegion{0, 0, camera.width, camera.height});
    const int u0 = std::max(0, r.u0), u1 = std::min(camera.width, r.u1);
    const int v0 = std::max(0, r.v0), v1 = std::min(camera.height, r.v1);
    if (u1 <= u0 || v1 <= v0) return frame;

    const Vec3 origin = camera.position();
    parallel_for(static_cast<std::size_t>(v1 - v0), workers, [&](std::size_t row) {
        const int v = v0 + static_cast<int>(row);
        for (int u = u0; u < u1; ++u) {
            const Vec3 local((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0);
            const double scale = local.norm();
            const Vec3 dir = camera.pose.transform_vector(local / scale);
            const auto hit = ray_cast_unchecked(placed, bounds, origin, dir, std::numeric_limits<double>::infinity());
            if (!hit) continue;
            const std::size_t i = frame.index(u, v);
            frame.depth[i] = static_cast<float>(hit->distance / scale);
            frame.instance_id[i] = static_cast<std::uint16_t>(scene.instances[hit->instance_index].id);
        }
    });
    return frame;
}

DepthFrame add_depth_noise(const DepthFrame& frame, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0)) throw InputError("add_depth_noise: sigma must be non-negative");
    DepthFrame out = frame;
    if (sigma == 0) return out;
    Rng rng(mix_seed(seed));
    std::normal_distribution<double> noise(0.0, sigma);
    for (std::size_t i = 0; i < out.depth.size(); ++i) {
        if (out.instance_id[i] == kBackground) continue;
        out.depth[i] = static_cast<float>(out.depth[i] + noise(rng));
    }
    return out;
}

PointCloud back_project(const DepthFrame& frame, std::optional<int> instance_filter) {
    PointCloud cloud;
    for (int v = 0; v < frame.height(); ++v) {
        for (int u = 0; u < frame.width(); ++u) {
            const std::size_t i = frame.index(u, v);
            const auto id = frame.instance_id[i];
            if (id == kBackground) continue;
            if (instance_filter && id != *instance_filter) continue;
            cloud.points.push_back(frame.camera.unproject(u, v, frame.depth[i]));
        }
    }
    return cloud;
}

nlohmann::json camera_to_json(const CameraModel& c) {
    const Pose& p = c.pose;
    return {{"width", c.width}, {"height", c.height}, {"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
            {"pose", {p.translation.x(), p.translation.y(), p.translation.z(), p.rotation.w, p.rotation.x,
                      p.rotation.y, p.rotation.z}}};
}

CameraModel camera_from_json(const nlohmann::json& j) {
    try {
        CameraModel c;
        c.width = j.at("width").get<int>();
        c.height = j.at("height").get<int>();
        c.fx = j.at("fx").get<double>();
        c.fy = j.at("fy").get<double>();
        c.cx = j.at("cx").get<double>();
        c.cy = j.at("cy").get<double>();
        const auto& pv = j.at("pose");
        c.pose.translation = Vec3(pv.at(0).get<double>(), pv.at(1).get<double>(), pv.at(2).get<double>());
        c.pose.rotation = {pv.at(3).get<double>(), pv.at(4).get<double>(), pv.at(5).get<double>(), pv.at(6).get<double>()};
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("camera json: ") + e.what());
    } catch (const InputError& e) {
        throw IoError(std::string("camera json: ") + e.what());
    }
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
    return stem.parent_path() / (stem.filename().string() + suffix);
}

template <typename T>
void write_raw(const std::filesystem::path& path, const std::vector<T>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!out) throw IoError("write failed for " + path.string());
}

template <typename T>
std::vector<T> read_raw(const std::filesystem::path& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<T> data(count);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(T)));
    if (!in || in.peek() != std::char_traits<char>::eof()) throw IoError("size mismatch in " + path.string());
    return data;
}

}  // namespace

void write_frame(const std::filesystem::path& stem, const DepthFrame& frame) {
    write_raw(with_suffix(stem, ".depth.f32"), frame.depth);
    write_raw(with_suffix(stem, ".instance.u16"), frame.instance_id);
    const nlohmann::json side = {{"camera", camera_to_json(frame.camera)},
                                 {"depth", "float32 little-endian, row-major, meters, 0 = no hit"},
                                 {"instance", "uint16 little-endian, row-major, 65535 = background"}};
    std::ofstream out(with_suffix(stem, ".json"));
    if (!out) throw IoError("cannot write " + with_suffix(stem, ".json").string());
    out << side.dump(2) << '\n';
}

DepthFrame read_frame(const std::filesystem::path& stem) {
    std::ifstream in(with_suffix(stem, ".json"));
    if (!in) throw IoError("cannot open " + with_suffix(stem, ".json").string());
    nlohmann::json side;
    try {
        in >> side;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("frame sidecar: ") + e.what());
    }
    DepthFrame frame;
    frame.camera = camera_from_json(side.at("camera"));
    const std::size_t n = static_cast<std::size_t>(frame.camera.width) * frame.camera.height;
    frame.depth = read_raw<float>(with_suffix(stem, ".depth.f32"), n);
    frame.instance_id = read_raw<std::uint16_t>(with_suffix(stem, ".instance.u16"), n);
    return frame;
}

}  // namespace occgrasp
