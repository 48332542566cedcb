#pragma once

#include "neofcam/common.hpp"

#include <array>
#include <span>
#include <vector>

namespace neofcam {

// Convex hull of a 3D point set. `dimension` is the affine rank of the
// input (0 = single location, 1 = collinear, 2 = coplanar, 3 = full).
// Faces and planes are only populated for dimension 3; `vertices` is the
// sorted set of extreme points for every rank.
struct Hull3 {
  int dimension = 0;
  std::vector<std::size_t> vertices;
  std::vector<std::array<std::size_t, 3>> faces;
  std::vector<Vec3> face_normals;  // outward, unit
  std::vector<double> face_offsets;

  // Strict interior test (every plane by more than tol); always false
  // unless dimension == 3.
  bool contains_strictly(const Vec3& p, double tol = 0.0) const;
};

// Incremental hull. Points closer than rel_eps * (coordinate scale) to a
// supporting plane are treated as interior.
Hull3 convex_hull_3d(std::span<const Vec3> points, double rel_eps = 1e-12);

// Andrew's monotone chain; returns hull vertex indices counter-clockwise,
// collinear boundary points excluded.
std::vector<std::size_t> convex_hull_2d(std::span<const Vec2> points, double rel_eps = 1e-12);

// Strict interior test for a counter-clockwise convex polygon.
bool convex_polygon_contains_strictly(std::span<const Vec2> ccw, const Vec2& p, double tol = 0.0);

}  // namespace neofcam
