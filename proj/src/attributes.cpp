#include "neofcam/attributes.hpp"

#include <algorithm>
#include <cmath>

namespace neofcam {

std::array<double, 3> attribute_sup(int K) { return {static_cast<double>(K), kPi / 2.0, 1.0}; }

std::vector<double> remaining_coverage(const CoverageMatrix& e, CoverageThreshold K) {
  K.validate();
  std::vector<double> c(e.voxels);
  for (std::size_t j = 0; j < e.voxels; ++j)
    c[j] = static_cast<double>(std::clamp(K.K - e.per_voxel_count[j], 0, K.K));
  return c;
}

double camera_to_camera_angle(std::span<const Vec3> dirs) {
  if (dirs.size() < 2) throw InvalidArgument("camera_to_camera_angle: needs at least two directions");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < dirs.size(); ++a)
    for (std::size_t b = a + 1; b < dirs.size(); ++b) {
      const double cosang = dirs[a].dot(dirs[b]) / (dirs[a].norm() * dirs[b].norm());
      sum += std::acos(std::clamp(cosang, -1.0, 1.0));
      ++pairs;
    }
  return std::abs(kPi / 2.0 - sum / static_cast<double>(pairs));
}

double camera_to_object_angle(std::span<const Vec3> dirs, const Vec3& normal) {
  if (dirs.empty()) throw InvalidArgument("camera_to_object_angle: no directions");
  Vec3 resultant = Vec3::Zero();
  for (const Vec3& d : dirs) resultant += d;
  const double rn = resultant.norm();
  if (!(rn > 1e-12)) throw InvalidArgument("camera_to_object_angle: vanishing resultant");
  return 1.0 - std::clamp(resultant.dot(normal) / (rn * normal.norm()), -1.0, 1.0);
}

ObservationAttributes attributes_from_coverage(const CoverageMatrix& e, const CameraRig& rig,
                                               const VoxelGrid& grid, CoverageThreshold K) {
  if (e.cameras != rig.size() || e.voxels != grid.size())
    throw InvalidArgument("attributes_from_coverage: matrix does not match rig/grid");
  ObservationAttributes out;
  out.K = K.K;
  out.c = remaining_coverage(e, K);
  out.phi_cc.assign(e.voxels, kDegeneratePhiCC);
  out.phi_co.assign(e.voxels, kDegeneratePhiCO);

  std::vector<Vec3> dirs;
  for (std::size_t j = 0; j < e.voxels; ++j) {
    dirs.clear();
    const Vec3& center = grid.voxels[j].center;
    for (std::size_t i = 0; i < e.cameras; ++i)
      if (e.at(i, j)) dirs.push_back((rig.poses[i].position - center).normalized());
    if (dirs.size() >= 2) out.phi_cc[j] = camera_to_camera_angle(dirs);
    if (!dirs.empty()) {
      Vec3 resultant = Vec3::Zero();
      for (const Vec3& d : dirs) resultant += d;
      if (resultant.norm() > 1e-12) out.phi_co[j] = camera_to_object_angle(dirs, grid.voxels[j].normal);
    }
  }
  return out;
}

ObservationAttributes shape_analyze(const CameraRig& rig, const VoxelGrid& grid, CoverageThreshold K,
                                    const VisibilityOptions& options) {
  return attributes_from_coverage(coverage_matrix(rig, grid, options), rig, grid, K);
}

}  // namespace neofcam
