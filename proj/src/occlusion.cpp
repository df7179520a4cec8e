#include "occgrasp/occlusion.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "occgrasp/error.hpp"

namespace occgrasp {

namespace {

bool same_camera(const CameraModel& a, const CameraModel& b) {
    return a.width == b.width && a.height == b.height && a.fx == b.fx && a.fy == b.fy && a.cx == b.cx &&
           a.cy == b.cy && same_pose_exact(a.pose, b.pose);
}

std::vector<double> tenths(int upto) {
    std::vector<double> e;
    for (int i = 0; i <= upto; ++i) e.push_back(i / 10.0);
    return e;
}

}  // namespace

BinScheme BinScheme::train() {
    BinScheme s;
    s.edges = tenths(9);
    s.edges.push_back(0.95);
    return s;
}

BinScheme BinScheme::test() {
    BinScheme s;
    s.edges = tenths(9);
    return s;
}

BinScheme BinScheme::real_world() { return {{0.0, 0.3, 0.6, 0.9}, {"Easy", "Medium", "Hard"}}; }

std::string BinScheme::label(int bin) const {
    if (bin >= 0 && bin < static_cast<int>(labels.size())) return labels[bin];
    if (bin < 0 || bin >= bin_count()) return "out_of_range";
    std::ostringstream os;
    os << '[' << edges[bin] << ',' << edges[bin + 1] << ')';
    return os.str();
}

void BinScheme::validate() const {
    if (edges.size() < 2) throw InputError("bin scheme: need at least two edges");
    if (edges.front() != 0.0) throw InputError("bin scheme: first edge must be 0");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1])) throw InputError("bin scheme: edges must increase strictly");
    if (edges.back() > 1.0) throw InputError("bin scheme: last edge must be <= 1");
    if (!labels.empty() && labels.size() != edges.size() - 1) throw InputError("bin scheme: label count mismatch");
}

OcclusionRecord occlusion_level(const DepthFrame& single_frame, const DepthFrame& cluttered_frame, int target_id) {
    if (!same_camera(single_frame.camera, cluttered_frame.camera))
        throw MeasurementError("occlusion_level: frames use different cameras");
    if (target_id < 0 || target_id >= kBackground) throw MeasurementError("occlusion_level: invalid target id");
    const auto id = static_cast<std::uint16_t>(target_id);
    OcclusionRecord r;
    r.total_pixels = single_frame.count(id);
    r.visible_pixels = cluttered_frame.count(id);
    if (r.total_pixels == 0)
        throw MeasurementError("occlusion_level: target " + std::to_string(target_id) + " absent from single render");
    if (r.visible_pixels > r.total_pixels)
        throw MeasurementError("occlusion_level: cluttered render shows more target pixels than the single render");
    // (total - visible) / total is the correctly rounded value of 1 - visible / total.
    r.level = static_cast<double>(r.total_pixels - r.visible_pixels) / static_cast<double>(r.total_pixels);
    return r;
}

std::optional<int> assign_bin(double level, const BinScheme& scheme) {
    if (!(level >= 0.0 && level <= 1.0)) throw InputError("assign_bin: level outside [0, 1]");
    if (level >= scheme.edges.back()) return std::nullopt;
    for (int i = 0; i < scheme.bin_count(); ++i)
        if (level >= scheme.edges[i] && level < scheme.edges[i + 1]) return i;
    return std::nullopt;
}

SceneFactors scene_factors(const Scene& scene) {
    SceneFactors f;
    f.occluder_count = static_cast<int>(scene.instances.size()) - 1;
    const Vec3& fp = scene.target().footprint;
    f.target_size = std::min(fp.x(), fp.y());
    return f;
}

const std::vector<double>& size_bucket_edges() {
    static const std::vector<double> edges = {0.0, 0.0275, 0.0392, 0.0509, 0.0626, 0.0743, 0.08,
                                              std::numeric_limits<double>::infinity()};
    return edges;
}

int size_bucket(double target_size) {
    const auto& e = size_bucket_edges();
    for (std::size_t i = 0; i + 1 < e.size(); ++i)
        if (target_size > e[i] && target_size <= e[i + 1]) return static_cast<int>(i);
    return 0;
}

std::string size_bucket_label(int bucket) {
    const auto& e = size_bucket_edges();
    std::ostringstream os;
    os << '(' << e.at(bucket) << ',';
    if (std::isinf(e.at(bucket + 1))) os << "inf)";
    else os << e.at(bucket + 1) << ']';
    return os.str();
}

void write_occlusion_csv(const std::filesystem::path& path, const std::vector<OcclusionRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "scene_id,target_index,level,bin,visible,total\n";
    out.precision(17);
    for (const auto& r : rows)
        out << r.scene_id << ',' << r.target_index << ',' << r.record.level << ',' << r.record.bin_index << ','
            << r.record.visible_pixels << ',' << r.record.total_pixels << '\n';
}

std::vector<OcclusionRow> read_occlusion_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<OcclusionRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        OcclusionRow r;
        std::vector<std::string> f;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() != 6) throw IoError("occlusion csv: bad row '" + line + "'");
        try {
            r.scene_id = f[0];
            r.target_index = std::stoi(f[1]);
            r.record.level = std::stod(f[2]);
            r.record.bin_index = std::stoi(f[3]);
            r.record.visible_pixels = std::stoull(f[4]);
            r.record.total_pixels = std::stoull(f[5]);
        } catch (const std::exception&) {
            throw IoError("occlusion csv: bad row '" + line + "'");
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace occgrasp
