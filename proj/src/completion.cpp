#include "occgrasp/completion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "occgrasp/error.hpp"
#include "occgrasp/kd_tree.hpp"
#include "occgrasp/sampling.hpp"

namespace occgrasp {

namespace {

double mean_nearest(const PointCloud& from, const KdTree& to) {
    double sum = 0.0;
    for (const Vec3& p : from.points) {
        double d2 = 0.0;
        to.nearest(p, &d2);
        sum += std::sqrt(d2);
    }
    return sum / static_cast<double>(from.size());
}

struct KeyHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
        std::uint64_t h = 1469598103934665603ull;
        for (auto v : k) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

using VoxelSet = std::unordered_set<std::array<std::int64_t, 3>, KeyHash>;

VoxelSet voxelize(const PointCloud& c, double voxel, const Vec3& origin) {
    VoxelSet s;
    s.reserve(c.size());
    for (const Vec3& p : c.points) {
        const Vec3 q = (p - origin) / voxel;
        s.insert({static_cast<std::int64_t>(std::floor(q.x())), static_cast<std::int64_t>(std::floor(q.y())),
                  static_cast<std::int64_t>(std::floor(q.z()))});
    }
    return s;
}

}  // namespace

PointCloud oracle_completer(const PointCloud&, const Scene& scene, int samples, std::uint64_t seed) {
    const ObjectInstance& t = scene.target();
    return surface_sample(t.mesh().transformed(t.pose), samples, seed);
}

CompletionResult mirror_completer(const PointCloud& partial, const Vec3& table_normal, const CameraModel& camera) {
    CompletionResult r;
    r.cloud = partial;
    if (partial.size() < 4) {
        r.passthrough = true;
        r.warning = "mirror: fewer than 4 points, returned input unchanged";
        return r;
    }
    const Vec3 up = table_normal.normalized();
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : partial.points) centroid += p;
    centroid /= static_cast<double>(partial.size());
    Vec3 n = centroid - camera.position();
    n -= n.dot(up) * up;
    if (n.norm() < 1e-9) {
        r.passthrough = true;
        r.warning = "mirror: viewing direction is vertical, returned input unchanged";
        return r;
    }
    n.normalize();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const Vec3& p : partial.points) {
        lo = std::min(lo, p.dot(n));
        hi = std::max(hi, p.dot(n));
    }
    const double offset = 0.5 * (lo + hi);
    const bool normals = partial.has_normals();
    r.cloud.points.reserve(2 * partial.size());
    if (normals) r.cloud.normals.reserve(2 * partial.size());
    for (std::size_t i = 0; i < partial.size(); ++i) {
        const Vec3& p = partial.points[i];
        r.cloud.points.push_back(p - 2.0 * (p.dot(n) - offset) * n);
        if (normals) {
            const Vec3& m = partial.normals[i];
            r.cloud.normals.push_back(m - 2.0 * m.dot(n) * n);
        }
    }
    return r;
}

CompletionResult OracleCompleter::complete(const PointCloud& partial, const CompletionContext& context) const {
    if (!context.scene) throw InputError("oracle completer needs the ground-truth scene");
    return {oracle_completer(partial, *context.scene, samples_, seed_), false, {}};
}

std::unique_ptr<Completer> make_completer(const std::string& name) {
    if (name == "oracle") return std::make_unique<OracleCompleter>();
    if (name == "mirror") return std::make_unique<MirrorCompleter>();
    if (name == "passthrough" || name == "none") return std::make_unique<PassthroughCompleter>();
    throw InputError("unknown completer '" + name + "'");
}

double chamfer_l1(const PointCloud& a, const PointCloud& b) {
    if (a.empty() || b.empty()) throw InputError("chamfer_l1: empty cloud");
    const KdTree ta(a.points), tb(b.points);
    // Each directional mean is computed independently, so swapping a and b
    // only swaps the two addends.
    const double ab = mean_nearest(a, tb), ba = mean_nearest(b, ta);
    return 0.5 * (ab + ba);
}

double volumetric_iou(const PointCloud& a, const PointCloud& b, double voxel_size, const Vec3& origin) {
    if (!(voxel_size > 0)) throw InputError("volumetric_iou: voxel_size must be positive");
    if (a.empty() && b.empty()) throw InputError("volumetric_iou: both clouds empty");
    const VoxelSet va = voxelize(a, voxel_size, origin), vb = voxelize(b, voxel_size, origin);
    std::size_t inter = 0;
    for (const auto& k : va) inter += vb.count(k);
    const std::size_t uni = va.size() + vb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

void write_completion_csv(const std::filesystem::path& path, const std::vector<CompletionRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "scene_id,target,completer,cd_l1_x1000,iou_pct,occlusion_level\n";
    out.precision(17);
    for (const auto& r : rows)
        out << r.scene_id << ',' << r.target << ',' << r.completer << ',' << r.cd_l1_x1000 << ',' << r.iou_pct << ','
            << r.occlusion_level << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<CompletionRow> read_completion_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "scene_id,target,completer,cd_l1_x1000,iou_pct,occlusion_level")
        throw IoError(path.string() + ": unexpected header");
    std::vector<CompletionRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f[6];
        for (auto& s : f)
            if (!std::getline(ss, s, ',')) throw IoError(path.string() + ": short row '" + line + "'");
        try {
            rows.push_back({f[0], std::stoi(f[1]), f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
        } catch (const std::exception&) {
            throw IoError(path.string() + ": bad row '" + line + "'");
        }
    }
    return rows;
}

}  // namespace occgrasp
