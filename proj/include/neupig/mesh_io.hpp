#pragma once

#include "neupig/geometry.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace neupig::io {

enum class PlyFormat { Ascii, BinaryLittleEndian };

// Reads vertex positions and, when present, nx/ny/nz. Faces are ignored.
PointCloud read_ply_cloud(const std::filesystem::path& path);
// Binary output stores doubles so coordinates round-trip bit-exactly; ASCII
// output uses 17 significant digits.
void write_ply_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                     PlyFormat format = PlyFormat::BinaryLittleEndian);

// Triangle meshes. Edges and vertex normals are recomputed after reading.
TriMesh read_ply_mesh(const std::filesystem::path& path);
TriMesh read_obj_mesh(const std::filesystem::path& path);
// Dispatches on extension (.obj / .ply).
TriMesh read_mesh(const std::filesystem::path& path);
// Vertices are written with 9 significant digits.
void write_obj_mesh(const std::filesystem::path& path, const TriMesh& mesh);

// Files in `dir` with one of `extensions`, ordered by the trailing integer
// in their stem (frame_0003.ply before frame_0010.ply).
std::vector<std::filesystem::path> list_frame_files(
    const std::filesystem::path& dir, const std::vector<std::string>& extensions);

}  // namespace neupig::io
