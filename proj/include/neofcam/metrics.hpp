#pragma once

#include "neofcam/attributes.hpp"
#include "neofcam/visibility.hpp"

#include <string>
#include <vector>

namespace neofcam {

// per_voxel_sq: sum_j max(0, K - cov_j)^2 / (K^2 n).
// literal:      (K - sum_j cov_j)^2 / (K n^2), the formula read verbatim.
enum class UcMode { per_voxel_sq, literal };

std::string to_string(UcMode mode);
UcMode uc_mode_from_string(const std::string& text);

double coverage_optimality_gap(const CoverageMatrix& e, CoverageThreshold K, UcMode mode = UcMode::per_voxel_sq);

inline constexpr double kAngleBandLow = kPi / 4.0;              // 45 degrees
inline constexpr double kAngleBandHigh = 145.0 * kPi / 180.0;  // 145 degrees

// Pooled fraction of observer-ray pairs (over voxels with >= 2 observers)
// whose angle lies in [45, 145] degrees; 0 when there are no such pairs.
double observation_angle_quality(const CameraRig& rig, const VoxelGrid& grid, const CoverageMatrix& e);

struct EvaluationReport {
  double uc = 0.0;
  double angle_quality = 0.0;
  std::vector<int> per_voxel_count;
  std::size_t cameras = 0;
  std::size_t voxels = 0;
};

EvaluationReport evaluate(const CameraRig& rig, const VoxelGrid& grid, CoverageThreshold K,
                          UcMode mode = UcMode::per_voxel_sq, const VisibilityOptions& options = {});
EvaluationReport evaluate_coverage(const CameraRig& rig, const VoxelGrid& grid, const CoverageMatrix& e,
                                   CoverageThreshold K, UcMode mode = UcMode::per_voxel_sq);

}  // namespace neofcam
