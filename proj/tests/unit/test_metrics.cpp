#include "doctest.h"

#include "neofcam/metrics.hpp"
#include "neofcam/random.hpp"

#include <cmath>

using namespace neofcam;

namespace {

CoverageMatrix counts_only(std::vector<int> counts) {
  CoverageMatrix e;
  e.voxels = counts.size();
  e.per_voxel_count = std::move(counts);
  return e;
}

// one voxel at the origin with normal +z, cameras at the given angles in
// the xz plane (0 deg = along +x)
struct OneVoxel {
  VoxelGrid grid;
  CameraRig rig;
  CoverageMatrix e;
};

OneVoxel one_voxel(const std::vector<double>& degrees) {
  OneVoxel o;
  Voxel v;
  v.center = Vec3::Zero();
  v.normal = Vec3::UnitZ();
  v.members = {0};
  o.grid.voxels = {v};
  std::vector<std::vector<std::size_t>> sets;
  for (double d : degrees) {
    const double a = d * kPi / 180.0;
    const Vec3 p(2 * std::cos(a), 0, 2 * std::sin(a));
    o.rig.poses.push_back(CameraPose::looking_along(p, -p));
    sets.push_back({0});
  }
  o.e = coverage_from_sets(sets, 1);
  return o;
}

}  // namespace

TEST_CASE("uc examples") {
  CHECK(coverage_optimality_gap(counts_only({3, 4, 7}), {3}) == 0.0);
  CHECK(coverage_optimality_gap(counts_only({0, 0, 0, 0}), {3}) == 1.0);
  CHECK(coverage_optimality_gap(counts_only({3, 0, 5, 0}), {3}) == 0.5);
  // partial deficit is squared: (3-2)^2 / 9
  CHECK(coverage_optimality_gap(counts_only({2}), {3}) == doctest::Approx(1.0 / 9.0));
}

TEST_CASE("uc literal reading") {
  // (K - sum cov)^2 / (K n^2)
  CHECK(coverage_optimality_gap(counts_only({1, 1}), {3}, UcMode::literal) == doctest::Approx(1.0 / 12.0));
  CHECK(coverage_optimality_gap(counts_only({0, 0}), {3}, UcMode::literal) == doctest::Approx(9.0 / 12.0));
  CHECK(uc_mode_from_string(to_string(UcMode::literal)) == UcMode::literal);
  CHECK_THROWS_AS(uc_mode_from_string("other"), ConfigError);
}

TEST_CASE("uc bounds, zero iff covered, monotone in cameras") {
  Rng rng(61);
  for (int t = 0; t < 200; ++t) {
    std::vector<int> c(20);
    for (int& x : c) x = static_cast<int>(rng() % 6);
    const double uc = coverage_optimality_gap(counts_only(c), {3});
    CHECK(uc >= 0);
    CHECK(uc <= 1);
    bool all = true;
    for (int x : c) all &= x >= 3;
    CHECK((uc == 0) == all);
    auto more = c;
    for (int& x : more)
      if (rng() % 2) ++x;
    CHECK(coverage_optimality_gap(counts_only(more), {3}) <= uc);
  }
}

TEST_CASE("angle quality examples") {
  auto a = one_voxel({0, 90});
  CHECK(observation_angle_quality(a.rig, a.grid, a.e) == 1.0);
  auto b = one_voxel({40, 50});
  CHECK(observation_angle_quality(b.rig, b.grid, b.e) == 0.0);
  auto c = one_voxel({0, 90, 180});
  CHECK(observation_angle_quality(c.rig, c.grid, c.e) == doctest::Approx(2.0 / 3.0));
  auto single = one_voxel({30});
  CHECK(observation_angle_quality(single.rig, single.grid, single.e) == 0.0);
  // band edges are inclusive
  auto lo = one_voxel({0, 45});
  CHECK(observation_angle_quality(lo.rig, lo.grid, lo.e) == 1.0);
  auto hi = one_voxel({0, 145});
  CHECK(observation_angle_quality(hi.rig, hi.grid, hi.e) == 1.0);
}

TEST_CASE("angle quality is invariant under rigid motion") {
  auto a = one_voxel({0, 60, 100, 170});
  const double q = observation_angle_quality(a.rig, a.grid, a.e);
  Rng rng(62);
  const Mat3 R = random_rotation(rng);
  const Vec3 t(0.3, -2, 5);
  for (Voxel& v : a.grid.voxels) v.center = R * v.center + t;
  for (CameraPose& p : a.rig.poses) p.position = R * p.position + t;
  CHECK(observation_angle_quality(a.rig, a.grid, a.e) == doctest::Approx(q));
}

TEST_CASE("evaluate reports counts") {
  auto a = one_voxel({0, 90});
  const auto r = evaluate_coverage(a.rig, a.grid, a.e, {2});
  CHECK(r.uc == 0.0);
  CHECK(r.angle_quality == 1.0);
  CHECK(r.cameras == 2);
  CHECK(r.voxels == 1);
  CHECK(r.per_voxel_count == std::vector<int>{2});
}
