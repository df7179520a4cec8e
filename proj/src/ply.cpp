#include "occgrasp/ply.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "occgrasp/error.hpp"

namespace occgrasp {

namespace {

struct Property {
    std::string name;
    std::string type;        // scalar type, or the item type for lists
    std::string count_type;  // non-empty for list properties
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;
};

struct Header {
    bool binary = false;
    std::vector<Element> elements;
};

std::size_t type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    throw IoError("ply: unsupported property type '" + t + "'");
}

double read_binary_scalar(std::istream& in, const std::string& t) {
    unsigned char buf[8];
    const std::size_t n = type_size(t);
    in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
    if (!in) throw IoError("ply: truncated binary body");
    // Little-endian hosts only; the writer emits binary_little_endian.
    if (t == "char" || t == "int8") return static_cast<std::int8_t>(buf[0]);
    if (t == "uchar" || t == "uint8") return buf[0];
    if (t == "short" || t == "int16") { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
    if (t == "ushort" || t == "uint16") { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
    if (t == "int" || t == "int32") { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
    if (t == "uint" || t == "uint32") { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
    if (t == "float" || t == "float32") { float v; std::memcpy(&v, buf, 4); return v; }
    double v;
    std::memcpy(&v, buf, 8);
    return v;
}

Header read_header(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw IoError("ply: missing magic");
    Header h;
    bool have_format = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "format") {
            std::string fmt;
            ss >> fmt;
            if (fmt == "ascii") h.binary = false;
            else if (fmt == "binary_little_endian") h.binary = true;
            else throw IoError("ply: unsupported format '" + fmt + "'");
            have_format = true;
        } else if (word == "element") {
            Element e;
            ss >> e.name >> e.count;
            h.elements.push_back(e);
        } else if (word == "property") {
            if (h.elements.empty()) throw IoError("ply: property before element");
            Property p;
            std::string type;
            ss >> type;
            if (type == "list") {
                ss >> p.count_type >> p.type >> p.name;
            } else {
                p.type = type;
                ss >> p.name;
            }
            h.elements.back().properties.push_back(p);
        } else if (word == "end_header") {
            if (!have_format) throw IoError("ply: missing format line");
            return h;
        }
    }
    throw IoError("ply: missing end_header");
}

// Reads every element; scalar properties land in `scalars[element][row][prop]`,
// list properties in `lists[element][row]` (one list per row supported).
struct Body {
    std::vector<std::vector<std::vector<double>>> scalars;
    std::vector<std::vector<std::vector<int>>> lists;
};

Body read_body(std::istream& in, const Header& h) {
    Body body;
    body.scalars.resize(h.elements.size());
    body.lists.resize(h.elements.size());
    for (std::size_t ei = 0; ei < h.elements.size(); ++ei) {
        const Element& e = h.elements[ei];
        body.scalars[ei].resize(e.count);
        body.lists[ei].resize(e.count);
        for (std::size_t row = 0; row < e.count; ++row) {
            for (const Property& p : e.properties) {
                if (p.count_type.empty()) {
                    double v = 0.0;
                    if (h.binary) v = read_binary_scalar(in, p.type);
                    else if (!(in >> v)) throw IoError("ply: truncated ascii body");
                    body.scalars[ei][row].push_back(v);
                } else {
                    double n = 0.0;
                    if (h.binary) n = read_binary_scalar(in, p.count_type);
                    else if (!(in >> n)) throw IoError("ply: truncated ascii body");
                    auto& list = body.lists[ei][row];
                    for (int k = 0; k < static_cast<int>(n); ++k) {
                        double v = 0.0;
                        if (h.binary) v = read_binary_scalar(in, p.type);
                        else if (!(in >> v)) throw IoError("ply: truncated ascii body");
                        list.push_back(static_cast<int>(v));
                    }
                }
            }
        }
    }
    return body;
}

int find_scalar(const Element& e, const std::string& name) {
    int idx = 0;
    for (const auto& p : e.properties) {
        if (!p.count_type.empty()) continue;
        if (p.name == name) return idx;
        ++idx;
    }
    return -1;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("ply: cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("ply: cannot write " + path.string());
    return out;
}

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void read_vertices(const Header& h, const Body& body, std::vector<Vec3>& pts, std::vector<Vec3>* normals) {
    for (std::size_t ei = 0; ei < h.elements.size(); ++ei) {
        const Element& e = h.elements[ei];
        if (e.name != "vertex") continue;
        const int ix = find_scalar(e, "x"), iy = find_scalar(e, "y"), iz = find_scalar(e, "z");
        if (ix < 0 || iy < 0 || iz < 0) throw IoError("ply: vertex element lacks x/y/z");
        const int nx = find_scalar(e, "nx"), ny = find_scalar(e, "ny"), nz = find_scalar(e, "nz");
        for (const auto& row : body.scalars[ei]) {
            pts.emplace_back(row[ix], row[iy], row[iz]);
            if (normals && nx >= 0 && ny >= 0 && nz >= 0) normals->emplace_back(row[nx], row[ny], row[nz]);
        }
    }
}

}  // namespace

void write_ply(const std::filesystem::path& path, const TriMesh& mesh, PlyFormat format) {
    auto out = open_out(path);
    const bool binary = format == PlyFormat::BinaryLittleEndian;
    out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
        << "element vertex " << mesh.vertices.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "element face " << mesh.triangles.size() << "\n"
        << "property list uchar int vertex_indices\nend_header\n";
    if (binary) {
        for (const auto& v : mesh.vertices) { put(out, v.x()); put(out, v.y()); put(out, v.z()); }
        for (const auto& t : mesh.triangles) {
            put<std::uint8_t>(out, 3);
            for (int i : t) put<std::int32_t>(out, i);
        }
    } else {
        out << std::setprecision(17);
        for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
        for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    if (!out) throw IoError("ply: write failed for " + path.string());
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format) {
    auto out = open_out(path);
    const bool binary = format == PlyFormat::BinaryLittleEndian;
    const bool normals = cloud.has_normals();
    out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
        << "element vertex " << cloud.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n";
    if (normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
    out << "end_header\n";
    if (!binary) out << std::setprecision(17);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.points[i];
        if (binary) {
            put(out, p.x()); put(out, p.y()); put(out, p.z());
            if (normals) { put(out, cloud.normals[i].x()); put(out, cloud.normals[i].y()); put(out, cloud.normals[i].z()); }
        } else {
            out << p.x() << ' ' << p.y() << ' ' << p.z();
            if (normals) out << ' ' << cloud.normals[i].x() << ' ' << cloud.normals[i].y() << ' ' << cloud.normals[i].z();
            out << '\n';
        }
    }
    if (!out) throw IoError("ply: write failed for " + path.string());
}

TriMesh read_ply_mesh(const std::filesystem::path& path) {
    auto in = open_in(path);
    const Header h = read_header(in);
    const Body body = read_body(in, h);
    TriMesh mesh;
    read_vertices(h, body, mesh.vertices, nullptr);
    for (std::size_t ei = 0; ei < h.elements.size(); ++ei) {
        if (h.elements[ei].name != "face") continue;
        for (const auto& poly : body.lists[ei]) {
            if (poly.size() < 3) throw IoError("ply: face with fewer than 3 vertices");
            for (std::size_t k = 1; k + 1 < poly.size(); ++k) mesh.triangles.push_back({poly[0], poly[k], poly[k + 1]});
        }
    }
    try {
        mesh.validate();
    } catch (const InputError& e) {
        throw IoError(std::string("ply: ") + e.what());
    }
    mesh.compute_face_normals();
    return mesh;
}

PointCloud read_ply_cloud(const std::filesystem::path& path) {
    auto in = open_in(path);
    const Header h = read_header(in);
    const Body body = read_body(in, h);
    PointCloud cloud;
    read_vertices(h, body, cloud.points, &cloud.normals);
    if (!cloud.normals.empty() && cloud.normals.size() != cloud.points.size()) cloud.normals.clear();
    return cloud;
}

}  // namespace occgrasp
