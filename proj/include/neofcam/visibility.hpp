#pragma once

#include "neofcam/common.hpp"
#include "neofcam/scene.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace neofcam {

struct CameraIntrinsics {
  double hfov = kPi / 3.0;
  double vfov = kPi / 3.0;
  double near = 0.2;
  double far = 5.0;

  void validate() const;
};

// Defaults rescaled so that near/far track the scene size; the unscaled
// defaults correspond to a 2.5 m bounding-box diagonal.
CameraIntrinsics default_intrinsics_for(const TargetScene& scene);

// Position plus the 6-number rotation: two direction hints that are
// Gram-Schmidt orthonormalized into (right, up, forward). The camera looks
// along +z of its local frame.
struct CameraPose {
  Vec3 position = Vec3::Zero();
  Vec3 forward_hint = Vec3::UnitZ();
  Vec3 right_hint = Vec3::UnitX();

  // Columns are the local x (right), y, z (forward) axes in world space.
  // Throws GeometryError for degenerate hints.
  Mat3 rotation() const;
  Vec3 forward() const { return rotation().col(2); }

  Vec3 to_local(const Vec3& world) const;
  Vec3 to_world(const Vec3& local) const;

  // Replaces the hints by the orthonormal frame they describe.
  void orthonormalize();

  static CameraPose looking_along(const Vec3& position, const Vec3& forward);
  static CameraPose from_rotation(const Vec3& position, const Mat3& rotation);
  // In-plane camera at z = 0 looking along (cos heading, sin heading).
  static CameraPose planar(const Vec2& position, double heading);
};

// Geodesic distance between two rotations, radians.
double rotation_angle_between(const Mat3& a, const Mat3& b);

struct CameraRig {
  std::vector<CameraPose> poses;
  CameraIntrinsics intrinsics;

  std::size_t size() const { return poses.size(); }
  void validate() const;
};

struct CoverageMatrix {
  std::size_t cameras = 0;
  std::size_t voxels = 0;
  std::vector<std::uint8_t> entries;  // cameras x voxels, row-major
  std::vector<int> per_voxel_count;

  bool at(std::size_t camera, std::size_t voxel) const { return entries[camera * voxels + voxel] != 0; }
};

struct VisibilityOptions {
  double hpr_gamma = 100.0;
  bool backface_culling = true;
};

// Indices (ascending) of the voxels seen by one camera: inside the view
// cone, within [near, far], front facing, and on the HPR hull. Voxels
// closer than `near` still occlude.
std::vector<std::size_t> visible_set(const CameraPose& pose, const CameraIntrinsics& intrinsics,
                                     const VoxelGrid& grid, const VisibilityOptions& options = {});

std::vector<std::vector<std::size_t>> visible_sets(const CameraRig& rig, const VoxelGrid& grid,
                                                   const VisibilityOptions& options = {});

CoverageMatrix coverage_matrix(const CameraRig& rig, const VoxelGrid& grid,
                               const VisibilityOptions& options = {});
CoverageMatrix coverage_from_sets(const std::vector<std::vector<std::size_t>>& sets,
                                  std::size_t voxel_count);

// Katz-style hidden point removal. Returns ascending indices of the points
// whose spherical flip lies on the convex hull of the flipped set plus the
// viewpoint. `planar` uses the xy plane and a 2D hull. Points coincident
// with the viewpoint are never returned; throws GeometryError when every
// point coincides with it.
std::vector<std::size_t> hidden_point_removal(const Vec3& viewpoint, std::span<const Vec3> points,
                                              double gamma = 100.0, bool planar = false);

}  // namespace neofcam
