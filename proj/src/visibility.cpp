#include "neofcam/visibility.hpp"

#include "neofcam/hull.hpp"
#include "neofcam/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace neofcam {

void CameraIntrinsics::validate() const {
  if (!(hfov > 0.0 && hfov < kPi)) throw InvalidArgument("intrinsics: hfov must lie in (0, pi)");
  if (!(vfov > 0.0 && vfov < kPi)) throw InvalidArgument("intrinsics: vfov must lie in (0, pi)");
  if (!(near > 0.0 && near < far)) throw InvalidArgument("intrinsics: need 0 < near < far");
  if (!std::isfinite(far)) throw InvalidArgument("intrinsics: far must be finite");
}

CameraIntrinsics default_intrinsics_for(const TargetScene& scene) {
  CameraIntrinsics in;
  const double diag = scene.bounds.diagonal();
  if (diag > 0.0) {
    const double s = diag / 2.5;
    in.near *= s;
    in.far *= s;
  }
  return in;
}

Mat3 CameraPose::rotation() const {
  const double fn = forward_hint.norm();
  if (!(fn > 1e-12) || !std::isfinite(fn)) throw GeometryError("camera pose: degenerate forward hint");
  const Vec3 f = forward_hint / fn;
  const Vec3 rr = right_hint - f.dot(right_hint) * f;
  const double rn = rr.norm();
  if (!(rn > 1e-12 * std::max(1.0, right_hint.norm())))
    throw GeometryError("camera pose: right hint parallel to forward hint");
  const Vec3 r = rr / rn;
  Mat3 m;
  m.col(0) = r;
  m.col(1) = f.cross(r);
  m.col(2) = f;
  return m;
}

Vec3 CameraPose::to_local(const Vec3& world) const { return rotation().transpose() * (world - position); }

Vec3 CameraPose::to_world(const Vec3& local) const { return rotation() * local + position; }

void CameraPose::orthonormalize() {
  const Mat3 r = rotation();
  forward_hint = r.col(2);
  right_hint = r.col(0);
}

CameraPose CameraPose::looking_along(const Vec3& position, const Vec3& forward) {
  const double n = forward.norm();
  if (!(n > 0.0)) throw GeometryError("looking_along: zero forward direction");
  const Vec3 f = forward / n;
  const Vec3 up = std::abs(f.z()) > 0.99 ? Vec3::UnitX() : Vec3::UnitZ();
  CameraPose pose;
  pose.position = position;
  pose.forward_hint = f;
  pose.right_hint = f.cross(up).normalized();
  return pose;
}

CameraPose CameraPose::from_rotation(const Vec3& position, const Mat3& rotation) {
  CameraPose pose;
  pose.position = position;
  pose.forward_hint = rotation.col(2);
  pose.right_hint = rotation.col(0);
  return pose;
}

CameraPose CameraPose::planar(const Vec2& position, double heading) {
  CameraPose pose;
  pose.position = Vec3(position.x(), position.y(), 0.0);
  const double c = std::cos(heading), s = std::sin(heading);
  pose.forward_hint = Vec3(c, s, 0.0);
  pose.right_hint = Vec3(s, -c, 0.0);
  return pose;
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const double t = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(t, -1.0, 1.0));
}

void CameraRig::validate() const {
  if (poses.empty()) throw InvalidArgument("camera rig needs at least one camera");
  intrinsics.validate();
  for (const CameraPose& p : poses) {
    if (!p.position.allFinite()) throw GeometryError("camera rig: non-finite position");
    const Mat3 r = p.rotation();
    if (std::abs(r.determinant() - 1.0) > 1e-6) throw GeometryError("camera rig: improper rotation");
  }
}

std::vector<std::size_t> hidden_point_removal(const Vec3& viewpoint, std::span<const Vec3> points,
                                              double gamma, bool planar) {
  if (points.empty()) throw InvalidArgument("hidden_point_removal: empty point set");
  if (!(gamma > 0.0)) throw InvalidArgument("hidden_point_removal: gamma must be positive");

  std::vector<std::size_t> keep;
  keep.reserve(points.size());
  double max_norm = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (points[i] - viewpoint).norm();
    if (d > 0.0) {
      keep.push_back(i);
      max_norm = std::max(max_norm, d);
    }
  }
  if (keep.empty()) throw GeometryError("hidden_point_removal: all points coincide with the viewpoint");

  std::vector<double> xyz(3 * keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i)
    for (int a = 0; a < 3; ++a) xyz[3 * i + a] = points[keep[i]][a];
  std::vector<double> flipped(xyz.size());
  const double vp[3] = {viewpoint.x(), viewpoint.y(), viewpoint.z()};
  kernels::active().spherical_flip(keep.size(), xyz.data(), vp, gamma * max_norm, flipped.data());

  // flipped set plus the viewpoint, which is the origin after centring
  const std::size_t origin = keep.size();
  std::vector<std::size_t> hull_idx;
  if (planar) {
    std::vector<Vec2> pts(keep.size() + 1);
    for (std::size_t i = 0; i < keep.size(); ++i) pts[i] = Vec2(flipped[3 * i], flipped[3 * i + 1]);
    pts[origin] = Vec2::Zero();
    hull_idx = convex_hull_2d(pts);
  } else {
    std::vector<Vec3> pts(keep.size() + 1);
    for (std::size_t i = 0; i < keep.size(); ++i)
      pts[i] = Vec3(flipped[3 * i], flipped[3 * i + 1], flipped[3 * i + 2]);
    pts[origin] = Vec3::Zero();
    hull_idx = convex_hull_3d(pts).vertices;
  }

  std::vector<std::size_t> out;
  out.reserve(hull_idx.size());
  for (std::size_t h : hull_idx)
    if (h != origin) out.push_back(keep[h]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> visible_set(const CameraPose& pose, const CameraIntrinsics& intrinsics,
                                     const VoxelGrid& grid, const VisibilityOptions& options) {
  if (grid.empty()) throw InvalidArgument("visible_set: empty voxel grid");
  const Mat3 r = pose.rotation();
  kernels::FrustumParams fp{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) fp.world_to_camera[3 * i + j] = r(j, i);
  for (int a = 0; a < 3; ++a) fp.origin[a] = pose.position[a];
  fp.tan_half_h = std::tan(0.5 * intrinsics.hfov);
  fp.tan_half_v = std::tan(0.5 * intrinsics.vfov);
  fp.near = intrinsics.near;
  fp.far = intrinsics.far;

  const std::size_t n = grid.size();
  std::vector<double> xyz(3 * n);
  for (std::size_t j = 0; j < n; ++j)
    for (int a = 0; a < 3; ++a) xyz[3 * j + a] = grid.voxels[j].center[a];
  std::vector<std::uint8_t> flags(n);
  kernels::active().classify_frustum(n, xyz.data(), fp, flags.data());

  std::vector<std::size_t> cone;
  std::vector<Vec3> cone_pts;
  for (std::size_t j = 0; j < n; ++j) {
    if (flags[j] & kernels::kInCone) {
      cone.push_back(j);
      cone_pts.push_back(grid.voxels[j].center);
    }
  }
  if (cone.empty()) return {};

  const bool planar = grid.mode == SceneMode::planar2d;
  const std::vector<std::size_t> hull = hidden_point_removal(pose.position, cone_pts, options.hpr_gamma, planar);
  std::vector<std::size_t> out;
  for (std::size_t h : hull) {
    const std::size_t j = cone[h];
    if (!(flags[j] & kernels::kBeyondNear)) continue;
    if (options.backface_culling && grid.voxels[j].normal.dot(pose.position - grid.voxels[j].center) <= 0.0)
      continue;
    out.push_back(j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<std::size_t>> visible_sets(const CameraRig& rig, const VoxelGrid& grid,
                                                   const VisibilityOptions& options) {
  std::vector<std::vector<std::size_t>> sets;
  sets.reserve(rig.size());
  for (const CameraPose& pose : rig.poses) sets.push_back(visible_set(pose, rig.intrinsics, grid, options));
  return sets;
}

CoverageMatrix coverage_from_sets(const std::vector<std::vector<std::size_t>>& sets, std::size_t voxel_count) {
  CoverageMatrix e;
  e.cameras = sets.size();
  e.voxels = voxel_count;
  e.entries.assign(e.cameras * e.voxels, 0);
  e.per_voxel_count.assign(e.voxels, 0);
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j : sets[i]) {
      if (j >= voxel_count) throw InvalidArgument("coverage_from_sets: voxel index out of range");
      if (!e.entries[i * e.voxels + j]) {
        e.entries[i * e.voxels + j] = 1;
        ++e.per_voxel_count[j];
      }
    }
  return e;
}

CoverageMatrix coverage_matrix(const CameraRig& rig, const VoxelGrid& grid, const VisibilityOptions& options) {
  return coverage_from_sets(visible_sets(rig, grid, options), grid.size());
}

}  // namespace neofcam
