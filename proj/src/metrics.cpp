#include "neofcam/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace neofcam {

std::string to_string(UcMode mode) { return mode == UcMode::literal ? "literal" : "per_voxel_sq"; }

UcMode uc_mode_from_string(const std::string& text) {
  if (text == "per_voxel_sq") return UcMode::per_voxel_sq;
  if (text == "literal") return UcMode::literal;
  throw ConfigError("unknown uc_mode '" + text + "' (expected per_voxel_sq or literal)");
}

double coverage_optimality_gap(const CoverageMatrix& e, CoverageThreshold K, UcMode mode) {
  K.validate();
  if (e.voxels == 0) throw InvalidArgument("coverage_optimality_gap: no voxels");
  const double k = K.K;
  const double n = static_cast<double>(e.voxels);
  if (mode == UcMode::literal) {
    double total = 0.0;
    for (int c : e.per_voxel_count) total += c;
    return (k - total) * (k - total) / (k * n * n);
  }
  double acc = 0.0;
  for (int c : e.per_voxel_count) {
    const double d = std::max(0.0, k - c);
    acc += d * d;
  }
  return acc / (k * k * n);
}

double observation_angle_quality(const CameraRig& rig, const VoxelGrid& grid, const CoverageMatrix& e) {
  if (e.cameras != rig.size() || e.voxels != grid.size())
    throw InvalidArgument("observation_angle_quality: matrix does not match rig/grid");
  std::size_t good = 0, pairs = 0;
  std::vector<Vec3> dirs;
  for (std::size_t j = 0; j < e.voxels; ++j) {
    if (e.per_voxel_count[j] < 2) continue;
    dirs.clear();
    for (std::size_t i = 0; i < e.cameras; ++i)
      if (e.at(i, j)) dirs.push_back((rig.poses[i].position - grid.voxels[j].center).normalized());
    for (std::size_t a = 0; a < dirs.size(); ++a)
      for (std::size_t b = a + 1; b < dirs.size(); ++b) {
        const double ang = std::acos(std::clamp(dirs[a].dot(dirs[b]), -1.0, 1.0));
        ++pairs;
        // small slack so exact band edges survive rounding
        if (ang >= kAngleBandLow - 1e-12 && ang <= kAngleBandHigh + 1e-12) ++good;
      }
  }
  return pairs == 0 ? 0.0 : static_cast<double>(good) / static_cast<double>(pairs);
}

EvaluationReport evaluate_coverage(const CameraRig& rig, const VoxelGrid& grid, const CoverageMatrix& e,
                                   CoverageThreshold K, UcMode mode) {
  EvaluationReport r;
  r.uc = coverage_optimality_gap(e, K, mode);
  r.angle_quality = observation_angle_quality(rig, grid, e);
  r.per_voxel_count = e.per_voxel_count;
  r.cameras = rig.size();
  r.voxels = grid.size();
  return r;
}

EvaluationReport evaluate(const CameraRig& rig, const VoxelGrid& grid, CoverageThreshold K, UcMode mode,
                          const VisibilityOptions& options) {
  return evaluate_coverage(rig, grid, coverage_matrix(rig, grid, options), K, mode);
}

}  // namespace neofcam
