#pragma once

#include "neofcam/scene.hpp"
#include "neofcam/visibility.hpp"

#include <array>
#include <span>
#include <vector>

namespace neofcam {

struct CoverageThreshold {
  int K = 3;

  void validate() const {
    if (K < 1) throw InvalidArgument("coverage threshold K must be >= 1");
  }
};

// Residual-need triple per voxel; larger values ask for more observation.
struct ObservationAttributes {
  int K = 3;
  std::vector<double> c;
  std::vector<double> phi_cc;
  std::vector<double> phi_co;

  std::size_t size() const { return c.size(); }
  std::array<double, 3> row(std::size_t j) const { return {c[j], phi_cc[j], phi_co[j]}; }
};

// Componentwise upper bound [K, pi/2, 1].
std::array<double, 3> attribute_sup(int K);

inline constexpr double kDegeneratePhiCC = kPi / 2.0;
inline constexpr double kDegeneratePhiCO = 1.0;

std::vector<double> remaining_coverage(const CoverageMatrix& e, CoverageThreshold K);

// |pi/2 - mean pair angle| over all unordered pairs. Throws InvalidArgument
// for fewer than two directions.
double camera_to_camera_angle(std::span<const Vec3> directions);

// 1 - cos(angle(normal, sum of directions)). Throws InvalidArgument for an
// empty set or a vanishing resultant.
double camera_to_object_angle(std::span<const Vec3> directions, const Vec3& normal);

// Attributes from an already computed coverage matrix (rows must match the
// rig's cameras).
ObservationAttributes attributes_from_coverage(const CoverageMatrix& e, const CameraRig& rig,
                                               const VoxelGrid& grid, CoverageThreshold K);

ObservationAttributes shape_analyze(const CameraRig& rig, const VoxelGrid& grid, CoverageThreshold K,
                                    const VisibilityOptions& options = {});

}  // namespace neofcam
