#pragma once

#include "neofcam/common.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace neofcam {

enum class SceneMode { planar2d, volumetric3d };

std::string to_string(SceneMode mode);
SceneMode scene_mode_from_string(const std::string& text);

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  double diagonal() const { return extent().norm(); }
  bool contains(const Vec3& p, double tol = 1e-12) const;
  // Scales the box about its centre.
  Aabb inflated(double factor) const;
};

// Point cloud with unit normals. Construct through make_scene (or the
// loaders/generators), which enforce the invariants.
struct TargetScene {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  SceneMode mode = SceneMode::volumetric3d;
  Aabb bounds;

  std::size_t size() const { return points.size(); }
  Vec3 centroid() const;
};

// Validates and normalises: rescales non-unit normals, flattens to z = 0 in
// planar mode, computes bounds. Throws GeometryError on empty input,
// coincident points, or zero-length normals.
TargetScene make_scene(std::vector<Vec3> points, std::vector<Vec3> normals, SceneMode mode);

// Throws GeometryError describing the first violated invariant.
void validate_scene(const TargetScene& scene);

struct LoadOptions {
  std::size_t mesh_samples = 4096;  // surface samples drawn from meshes
  std::uint64_t seed = 0;
  std::size_t normal_neighbors = 16;
};

// PLY/OBJ ingestion. Meshes are area-weighted surface sampled; clouds
// without normals get estimated normals.
TargetScene load_scene(const std::filesystem::path& path, SceneMode mode,
                       const LoadOptions& options = {});

// Plane fit over the k nearest neighbours, oriented away from the
// centroid. In planar mode the fit is a 2D line fit.
std::vector<Vec3> estimate_normals(const std::vector<Vec3>& points, std::size_t k,
                                   SceneMode mode);

enum class ShapeKind { circle, triangle, square, composite, external };

std::string to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(const std::string& text);

// Planar shape description. `size` is the radius for circles and the side
// length for triangles (equilateral) and squares. Composite shapes are
// the union of their components.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::circle;
  double size = 1.0;
  Vec2 center = Vec2::Zero();
  double rotation = 0.0;  // radians
  std::vector<ShapeSpec> components;
  std::size_t sample_count = 256;
  std::uint64_t seed = 0;
  std::string path;  // external only
};

// Samples the boundary with outward in-plane normals.
TargetScene generate_planar_shape(const ShapeSpec& spec);

// A composite of 2-4 random circles/triangles/squares whose union is
// connected, derived entirely from `seed`.
ShapeSpec random_composite_spec(std::uint64_t seed, std::size_t sample_count = 320);

// True when p lies strictly inside the 2D shape (by more than tol).
bool shape_contains_strictly(const ShapeSpec& spec, const Vec2& p, double tol = 1e-9);

// Volumetric procedural scenes for tests and demos.
TargetScene sample_sphere(const Vec3& center, double radius, std::size_t n, std::uint64_t seed);
TargetScene sample_box(const Vec3& center, const Vec3& half_extent, std::size_t n, std::uint64_t seed);
TargetScene sample_torus(const Vec3& center, double major, double minor, std::size_t n,
                         std::uint64_t seed);

struct CellKey {
  std::int64_t x = 0, y = 0, z = 0;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept;
};

struct Voxel {
  CellKey cell;
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  std::vector<std::size_t> members;
};

struct VoxelGrid {
  double resolution = 0.0;
  Vec3 origin = Vec3::Zero();
  SceneMode mode = SceneMode::volumetric3d;
  std::vector<Voxel> voxels;
  std::unordered_map<CellKey, std::size_t, CellKeyHash> index;
  std::vector<std::size_t> voxel_of_point;

  std::size_t size() const { return voxels.size(); }
  bool empty() const { return voxels.empty(); }
  std::vector<Vec3> centers() const;
  std::vector<Vec3> normals() const;
};

inline constexpr std::size_t kDefaultVoxelCap = std::size_t{1} << 20;

// Bounding-box diagonal / 32.
double default_resolution(const TargetScene& scene);

// Throws InvalidArgument for resolution <= 0 and GeometryError when the
// dense cell lattice spanning the bounds would exceed max_cells.
VoxelGrid voxelize(const TargetScene& scene, double resolution,
                   std::size_t max_cells = kDefaultVoxelCap);

}  // namespace neofcam
