#include "occgrasp/tsdf.hpp"

#include <cmath>
#include <fstream>

#include "occgrasp/error.hpp"
#include "occgrasp/kd_tree.hpp"
#include "occgrasp/parallel.hpp"

namespace occgrasp {

void GridConfig::validate() const {
    if (resolution <= 0) throw InputError("grid: resolution must be positive");
    if (!(extent > 0)) throw InputError("grid: extent must be positive");
    if (!(truncation_voxels > 0)) throw InputError("grid: truncation must be positive");
    if (!origin.allFinite()) throw InputError("grid: origin must be finite");
}

Vec3 GridConfig::voxel_center(std::size_t flat) const {
    const auto r = static_cast<std::size_t>(resolution);
    return voxel_center(static_cast<int>(flat / (r * r)), static_cast<int>((flat / r) % r), static_cast<int>(flat % r));
}

bool GridConfig::locate(const Vec3& p, int& i, int& j, int& k) const {
    const Vec3 q = (p - origin) / voxel_size();
    const double fi = std::floor(q.x()), fj = std::floor(q.y()), fk = std::floor(q.z());
    if (fi < 0 || fj < 0 || fk < 0 || fi >= resolution || fj >= resolution || fk >= resolution) return false;
    i = static_cast<int>(fi);
    j = static_cast<int>(fj);
    k = static_cast<int>(fk);
    return true;
}

TsdfGrid fuse(const DepthFrame& frame, const GridConfig& config, unsigned workers) {
    config.validate();
    frame.camera.validate();
    TsdfGrid grid;
    grid.config = config;
    grid.values.assign(config.voxel_count(), -1.0f);
    grid.weights.assign(config.voxel_count(), 0.0f);
    grid.source = "depth_frame";
    const CameraModel& cam = frame.camera;
    const Pose world_to_cam = cam.pose.inverse();
    const double trunc = config.truncation();
    const int r = config.resolution;
    parallel_for(static_cast<std::size_t>(r), workers, [&](std::size_t slab) {
        const int i = static_cast<int>(slab);
        for (int j = 0; j < r; ++j) {
            for (int k = 0; k < r; ++k) {
                const Vec3 p = world_to_cam.transform_point(config.voxel_center(i, j, k));
                if (!(p.z() > 0)) continue;
                const long u = std::lround(cam.fx * p.x() / p.z() + cam.cx);
                const long v = std::lround(cam.fy * p.y() / p.z() + cam.cy);
                if (u < 0 || v < 0 || u >= cam.width || v >= cam.height) continue;
                const std::size_t pix = frame.index(static_cast<int>(u), static_cast<int>(v));
                const std::size_t idx = config.index(i, j, k);
                if (frame.instance_id[pix] == kBackground) {
                    grid.values[idx] = 1.0f;
                    grid.weights[idx] = 1.0f;
                    continue;
                }
                const double sdf = static_cast<double>(frame.depth[pix]) - p.z();
                if (sdf < -trunc) continue;
                grid.values[idx] = static_cast<float>(std::clamp(sdf / trunc, -1.0, 1.0));
                grid.weights[idx] = 1.0f;
            }
        }
    });
    return grid;
}

TsdfGrid splat(const PointCloud& cloud, const GridConfig& config) {
    config.validate();
    if (!cloud.empty() && !cloud.has_normals()) throw InputError("splat: cloud needs normals");
    TsdfGrid grid;
    grid.config = config;
    grid.values.assign(config.voxel_count(), -1.0f);
    grid.weights.assign(config.voxel_count(), 0.0f);
    grid.source = "point_cloud";
    if (cloud.empty()) return grid;
    const KdTree tree(cloud.points);
    const double voxel = config.voxel_size();
    const double trunc = config.truncation();
    const int r = config.resolution;
    // Only voxels overlapping the cloud's inflated bounds can be within one voxel.
    const Aabb box = cloud.bounds().inflated(voxel);
    int lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
        lo[a] = std::max(0, static_cast<int>(std::floor((box.min[a] - config.origin[a]) / voxel)));
        hi[a] = std::min(r - 1, static_cast<int>(std::floor((box.max[a] - config.origin[a]) / voxel)));
    }
    for (int i = lo[0]; i <= hi[0]; ++i)
        for (int j = lo[1]; j <= hi[1]; ++j)
            for (int k = lo[2]; k <= hi[2]; ++k) {
                const Vec3 c = config.voxel_center(i, j, k);
                double d2 = 0.0;
                const int n = tree.nearest(c, &d2);
                if (n < 0 || d2 > voxel * voxel) continue;
                const double sdf = (c - cloud.points[n]).dot(cloud.normals[n]);
                const std::size_t idx = config.index(i, j, k);
                grid.values[idx] = static_cast<float>(std::clamp(sdf / trunc, -1.0, 1.0));
                grid.weights[idx] = 1.0f;
            }
    return grid;
}

std::vector<std::uint8_t> near_surface_mask(const TsdfGrid& grid, double band) {
    if (!(band > 0 && band <= 1)) throw InputError("near_surface_mask: band must lie in (0, 1]");
    std::vector<std::uint8_t> mask(grid.values.size(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = grid.weights[i] > 0 && grid.values[i] >= 0.0f && grid.values[i] < band;
    return mask;
}

nlohmann::json grid_config_to_json(const GridConfig& c) {
    return {{"resolution", c.resolution},
            {"extent", c.extent},
            {"origin", {c.origin.x(), c.origin.y(), c.origin.z()}},
            {"truncation_voxels", c.truncation_voxels},
            {"truncation", c.truncation()}};
}

GridConfig grid_config_from_json(const nlohmann::json& j) {
    try {
        GridConfig c;
        c.resolution = j.at("resolution").get<int>();
        c.extent = j.at("extent").get<double>();
        const auto& o = j.at("origin");
        c.origin = Vec3(o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>());
        c.truncation_voxels = j.at("truncation_voxels").get<double>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("grid header: ") + e.what());
    } catch (const InputError& e) {
        throw IoError(std::string("grid header: ") + e.what());
    }
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
    return stem.parent_path() / (stem.filename().string() + suffix);
}

void write_floats(const std::filesystem::path& path, const std::vector<float>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<float> read_floats(const std::filesystem::path& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<float> data(count);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in || in.peek() != std::char_traits<char>::eof()) throw IoError("size mismatch in " + path.string());
    return data;
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace

void write_volume(const std::filesystem::path& stem, const GridConfig& config, const std::vector<float>& data,
                  const nlohmann::json& extra) {
    if (data.size() != config.voxel_count()) throw InputError("write_volume: size mismatch");
    write_floats(with_suffix(stem, ".f32"), data);
    nlohmann::json header = {{"grid", grid_config_to_json(config)}, {"dtype", "float32 little-endian"}};
    if (!extra.is_null()) header["extra"] = extra;
    write_json(with_suffix(stem, ".json"), header);
}

std::vector<float> read_volume(const std::filesystem::path& stem, GridConfig& config, nlohmann::json* extra) {
    const auto header = read_json(with_suffix(stem, ".json"));
    config = grid_config_from_json(header.at("grid"));
    if (extra) *extra = header.value("extra", nlohmann::json());
    return read_floats(with_suffix(stem, ".f32"), config.voxel_count());
}

void write_tsdf(const std::filesystem::path& stem, const TsdfGrid& grid) {
    write_floats(with_suffix(stem, ".tsdf.f32"), grid.values);
    write_floats(with_suffix(stem, ".weight.f32"), grid.weights);
    write_json(with_suffix(stem, ".json"), {{"grid", grid_config_to_json(grid.config)},
                                            {"camera_id", grid.source},
                                            {"dtype", "float32 little-endian"}});
}

TsdfGrid read_tsdf(const std::filesystem::path& stem) {
    const auto header = read_json(with_suffix(stem, ".json"));
    TsdfGrid grid;
    grid.config = grid_config_from_json(header.at("grid"));
    grid.source = header.value("camera_id", "");
    grid.values = read_floats(with_suffix(stem, ".tsdf.f32"), grid.config.voxel_count());
    grid.weights = read_floats(with_suffix(stem, ".weight.f32"), grid.config.voxel_count());
    return grid;
}

}  // namespace occgrasp
