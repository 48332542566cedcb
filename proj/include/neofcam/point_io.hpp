#pragma once

#include "neofcam/common.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

namespace neofcam {

// Raw geometry as read from disk, before any scene-level validation.
struct PointFile {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;  // empty, or one per vertex
  std::vector<std::array<std::size_t, 3>> triangles;
};

// Reads ASCII, binary little-endian and binary big-endian PLY, and
// Wavefront OBJ (v, vn, f). Polygonal faces are fan-triangulated. OBJ
// normals are attached to vertices through the face references.
PointFile read_point_file(const std::filesystem::path& path);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

// Writes a binary little-endian PLY with float positions, optional float
// normals and optional uchar colors.
void write_ply(const std::filesystem::path& path, const std::vector<Vec3>& points,
               const std::vector<Vec3>* normals = nullptr,
               const std::vector<Rgb>* colors = nullptr);

// ASCII variant, convenient for tests and small debug dumps.
void write_ply_ascii(const std::filesystem::path& path, const std::vector<Vec3>& points,
                     const std::vector<Vec3>* normals = nullptr,
                     const std::vector<Rgb>* colors = nullptr);

// Reads the per-vertex colors of a PLY written by write_ply/write_ply_ascii.
std::vector<Rgb> read_ply_colors(const std::filesystem::path& path);

}  // namespace neofcam
