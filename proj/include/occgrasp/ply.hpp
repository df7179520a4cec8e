#pragma once

#include <filesystem>

#include "occgrasp/tri_mesh.hpp"

namespace occgrasp {

enum class PlyFormat { Ascii, BinaryLittleEndian };

void write_ply(const std::filesystem::path& path, const TriMesh& mesh, PlyFormat format = PlyFormat::BinaryLittleEndian);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format = PlyFormat::BinaryLittleEndian);

/// Reads vertices (x, y, z as float or double) and triangular/polygonal faces
/// (fan-triangulated). Throws IoError on malformed input.
TriMesh read_ply_mesh(const std::filesystem::path& path);
/// Reads x, y, z and, when present, nx, ny, nz.
PointCloud read_ply_cloud(const std::filesystem::path& path);

}  // namespace occgrasp
