#include "doctest.h"

#include "neofcam/random.hpp"
#include "neofcam/scene.hpp"
#include "neofcam/visibility.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace neofcam;

namespace {

VoxelGrid grid_of(const std::vector<Vec3>& centers, const std::vector<Vec3>& normals, double res = 0.1,
                  SceneMode mode = SceneMode::volumetric3d) {
  VoxelGrid g;
  g.resolution = res;
  g.mode = mode;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    Voxel v;
    v.center = centers[i];
    v.normal = normals[i].normalized();
    v.members = {i};
    g.voxels.push_back(v);
    g.voxel_of_point.push_back(i);
  }
  return g;
}

CameraIntrinsics wide() {
  CameraIntrinsics in;
  in.hfov = in.vfov = kPi / 2;
  in.near = 0.1;
  in.far = 10;
  return in;
}

CameraPose looking_at(const Vec3& pos, const Vec3& target) { return CameraPose::looking_along(pos, target - pos); }

}  // namespace

TEST_CASE("on-axis voxel is visible, voxel behind is not") {
  const CameraPose cam = CameraPose::looking_along(Vec3::Zero(), Vec3::UnitZ());
  const auto front = grid_of({{0, 0, 1}}, {{0, 0, -1}});
  CHECK(visible_set(cam, wide(), front) == std::vector<std::size_t>{0});
  const auto behind = grid_of({{0, 0, -1}}, {{0, 0, 1}});
  CHECK(visible_set(cam, wide(), behind).empty());
}

TEST_CASE("nearer voxel on the same ray occludes the farther one") {
  const CameraPose cam = CameraPose::looking_along(Vec3::Zero(), Vec3::UnitZ());
  const auto g = grid_of({{0, 0, 1}, {0, 0, 2}}, {{0, 0, -1}, {0, 0, -1}});
  const auto vis = visible_set(cam, wide(), g);
  CHECK(vis == std::vector<std::size_t>{0});
  CHECK(oracle::raycast_visible(cam, wide(), g, 0.05) == vis);
}

TEST_CASE("backface and range tests") {
  const CameraPose cam = CameraPose::looking_along(Vec3::Zero(), Vec3::UnitZ());
  CHECK(visible_set(cam, wide(), grid_of({{0, 0, 1}}, {{0, 0, 1}})).empty());
  CHECK(visible_set(cam, wide(), grid_of({{0, 0, 1}}, {{1, 0, 0}})).empty());
  VisibilityOptions no_cull;
  no_cull.backface_culling = false;
  CHECK(visible_set(cam, wide(), grid_of({{0, 0, 1}}, {{0, 0, 1}}), no_cull).size() == 1);
  CHECK(visible_set(cam, wide(), grid_of({{0, 0, 0.05}}, {{0, 0, -1}})).empty());
  CHECK(visible_set(cam, wide(), grid_of({{0, 0, 11}}, {{0, 0, -1}})).empty());
  CHECK(visible_set(cam, wide(), grid_of({{2, 0, 1}}, {{0, 0, -1}})).empty());
}

TEST_CASE("hidden point removal: single point and coincident points") {
  const std::vector<Vec3> one{{1, 2, 3}};
  CHECK(hidden_point_removal(Vec3::Zero(), one) == std::vector<std::size_t>{0});
  const std::vector<Vec3> all{{0, 0, 0}, {0, 0, 0}};
  CHECK_THROWS_AS(hidden_point_removal(Vec3::Zero(), all), GeometryError);
}

TEST_CASE("hidden point removal on a sphere returns the facing hemisphere") {
  const TargetScene s = sample_sphere(Vec3::Zero(), 1.0, 2000, 11);
  for (const Vec3 vp : {Vec3(3, 0, 0), Vec3(0, -4, 1), Vec3(2, 2, 2)}) {
    const auto vis = hidden_point_removal(vp, s.points);
    std::vector<char> in(s.size(), 0);
    for (std::size_t i : vis) in[i] = 1;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      // the tangent plane at p separates the viewpoint iff p . (vp - p) > 0
      const bool analytic = s.points[i].dot(vp - s.points[i]) > 0;
      if (analytic == static_cast<bool>(in[i])) ++agree;
    }
    CHECK(static_cast<double>(agree) / s.size() >= 0.95);
  }
}

TEST_CASE("hidden point removal on a cube shows only the faces toward the viewpoint") {
  Rng rng(12);
  std::vector<Vec3> pts;
  std::vector<int> face;
  for (int f = 0; f < 6; ++f)
    for (int i = 0; i < 60; ++i) {
      Vec3 p(uniform(rng, -0.95, 0.95), uniform(rng, -0.95, 0.95), uniform(rng, -0.95, 0.95));
      p[f / 2] = (f % 2) ? 1.0 : -1.0;
      pts.push_back(p);
      face.push_back(f);
    }
  const Vec3 vp(40, 30, 20);
  const auto vis = hidden_point_removal(vp, pts);
  std::vector<int> per_face(6, 0);
  std::size_t back = 0;
  for (std::size_t i : vis) {
    Vec3 n = Vec3::Zero();
    n[face[i] / 2] = (face[i] % 2) ? 1.0 : -1.0;
    back += n.dot(vp - pts[i]) <= 0;
    ++per_face[face[i]];
  }
  // back faces only leak in along the silhouette (the hull's cone facets)
  CHECK(back <= vis.size() / 10);
  CHECK(per_face[1] > 0);
  CHECK(per_face[3] > 0);
  CHECK(per_face[5] > 0);
}

TEST_CASE("one camera seeing every voxel, and disjoint views") {
  std::vector<Vec3> c, n;
  for (int i = 0; i < 5; ++i) {
    c.emplace_back(-0.4 + 0.2 * i, 0, 2);
    n.emplace_back(0, 0, -1);
  }
  const auto g = grid_of(c, n);
  CameraRig rig;
  rig.intrinsics = wide();
  rig.poses = {CameraPose::looking_along(Vec3::Zero(), Vec3::UnitZ())};
  const auto e = coverage_matrix(rig, g);
  for (int v : e.per_voxel_count) CHECK(v == 1);

  // two cameras each seeing one disjoint half
  std::vector<Vec3> c2{{-3, 0, 2}, {3, 0, 2}}, n2{{0, 0, -1}, {0, 0, -1}};
  CameraRig r2;
  r2.intrinsics = wide();
  r2.intrinsics.hfov = r2.intrinsics.vfov = 0.3;
  r2.poses = {CameraPose::looking_along(Vec3(-3, 0, 0), Vec3::UnitZ()),
              CameraPose::looking_along(Vec3(3, 0, 0), Vec3::UnitZ())};
  const auto e2 = coverage_matrix(r2, grid_of(c2, n2));
  CHECK(e2.per_voxel_count == std::vector<int>{1, 1});
  CHECK(e2.at(0, 0));
  CHECK(e2.at(1, 1));
  CHECK_FALSE(e2.at(0, 1));
}

TEST_CASE("coverage matrix equals the stack of visible sets and is deterministic") {
  const TargetScene s = sample_sphere(Vec3::Zero(), 1.0, 50, 13);
  const auto g = voxelize(s, 0.05);
  REQUIRE(g.size() >= 40);
  Rng rng(14);
  CameraRig rig;
  rig.intrinsics = wide();
  for (int i = 0; i < 3; ++i) rig.poses.push_back(looking_at(random_unit_vector(rng) * 3.0, Vec3::Zero()));
  const auto e = coverage_matrix(rig, g);
  const auto e2 = coverage_matrix(rig, g);
  CHECK(e.entries == e2.entries);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto vis = visible_set(rig.poses[i], rig.intrinsics, g);
    for (std::size_t j = 0; j < g.size(); ++j)
      CHECK(e.at(i, j) == std::binary_search(vis.begin(), vis.end(), j));
  }
  for (std::size_t j = 0; j < g.size(); ++j) {
    int sum = 0;
    for (std::size_t i = 0; i < 3; ++i) sum += e.at(i, j);
    CHECK(sum == e.per_voxel_count[j]);
  }
}

TEST_CASE("shrinking the range never adds voxels") {
  const TargetScene s = sample_box(Vec3::Zero(), Vec3(1, 0.6, 0.4), 3000, 15);
  const auto g = voxelize(s, default_resolution(s));
  Rng rng(16);
  for (int t = 0; t < 10; ++t) {
    const CameraPose cam = looking_at(random_unit_vector(rng) * 2.5, Vec3::Zero());
    CameraIntrinsics in = wide();
    in.near = 0.5;
    in.far = 6;
    auto prev = visible_set(cam, in, g);
    for (int step = 0; step < 4; ++step) {
      in.near += 0.3;
      in.far -= 0.6;
      const auto cur = visible_set(cam, in, g);
      CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
      prev = cur;
    }
  }
}

TEST_CASE("visible set contract: in cone, in range, front facing") {
  const TargetScene s = sample_torus(Vec3::Zero(), 1.0, 0.35, 4000, 17);
  const auto g = voxelize(s, default_resolution(s));
  Rng rng(18);
  CameraIntrinsics in = default_intrinsics_for(s);
  for (int t = 0; t < 10; ++t) {
    const CameraPose cam = looking_at(random_unit_vector(rng) * 2.5, Vec3(uniform(rng, -0.3, 0.3), 0, 0));
    for (std::size_t j : visible_set(cam, in, g)) {
      const Vec3 l = cam.to_local(g.voxels[j].center);
      CHECK(l.z() > 0);
      CHECK(std::abs(l.x()) <= l.z() * std::tan(in.hfov / 2) + 1e-12);
      CHECK(std::abs(l.y()) <= l.z() * std::tan(in.vfov / 2) + 1e-12);
      CHECK(l.norm() >= in.near);
      CHECK(l.norm() <= in.far);
      CHECK(g.voxels[j].normal.dot(cam.position - g.voxels[j].center) > 0);
    }
  }
}

TEST_CASE("planar sector visibility") {
  ShapeSpec c;
  c.kind = ShapeKind::circle;
  c.sample_count = 200;
  const auto s = generate_planar_shape(c);
  const auto g = voxelize(s, default_resolution(s));
  const CameraPose cam = CameraPose::planar(Vec2(3, 0), kPi);
  CameraIntrinsics in;
  in.near = 0.1;
  in.far = 10;
  const auto vis = visible_set(cam, in, g);
  REQUIRE(!vis.empty());
  for (std::size_t j : vis) CHECK(g.voxels[j].center.x() > 0.3);
}

TEST_CASE("HPR agrees with sphere ray casting") {
  std::vector<TargetScene> scenes;
  scenes.push_back(sample_sphere(Vec3::Zero(), 1.0, 3000, 21));
  scenes.push_back(sample_box(Vec3::Zero(), Vec3(1, 0.7, 0.5), 3000, 22));
  scenes.push_back(sample_torus(Vec3::Zero(), 1.0, 0.4, 3000, 23));
  scenes.push_back(generate_planar_shape(random_composite_spec(24)));
  ShapeSpec sq;
  sq.kind = ShapeKind::square;
  sq.size = 2.0;
  sq.sample_count = 240;
  scenes.push_back(generate_planar_shape(sq));

  Rng rng(25);
  for (const TargetScene& s : scenes) {
    const VoxelGrid g = voxelize(s, default_resolution(s));
    const CameraIntrinsics in = default_intrinsics_for(s);
    const bool planar = s.mode == SceneMode::planar2d;
    std::size_t agree = 0, total = 0;
    for (int t = 0; t < 20; ++t) {
      const double dist = uniform(rng, 1.0, 1.6) * s.bounds.diagonal();
      Vec3 dir = random_unit_vector(rng);
      if (planar) dir = Vec3(dir.x(), dir.y(), 0).normalized();
      const Vec3 pos = s.bounds.center() + dist * dir;
      Vec3 look = s.bounds.center() - pos + 0.2 * s.bounds.diagonal() * random_unit_vector(rng);
      if (planar) look.z() = 0;
      const CameraPose cam = CameraPose::looking_along(pos, look);
      const auto vis = visible_set(cam, in, g);
      const auto ref = oracle::raycast_visible(cam, in, g, g.resolution / 2);
      for (std::size_t j = 0; j < g.size(); ++j) {
        agree += std::binary_search(vis.begin(), vis.end(), j) == std::binary_search(ref.begin(), ref.end(), j);
        ++total;
      }
    }
    CHECK(static_cast<double>(agree) / total >= 0.9);
  }
}

TEST_CASE("pose frame and intrinsics helpers") {
  Rng rng(26);
  for (int i = 0; i < 20; ++i) {
    CameraPose p;
    p.position = random_unit_vector(rng);
    p.forward_hint = random_unit_vector(rng) * 3.0;
    p.right_hint = random_unit_vector(rng) * 0.5;
    const Mat3 r = p.rotation();
    CHECK(std::abs(r.determinant() - 1.0) < 1e-6);
    CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-9);
    const Vec3 w = random_unit_vector(rng);
    CHECK((p.to_world(p.to_local(w)) - w).norm() < 1e-12);
  }
  CameraPose bad;
  bad.right_hint = Vec3::UnitZ();
  CHECK_THROWS_AS(bad.rotation(), GeometryError);
  CameraIntrinsics in;
  in.near = 5;
  CHECK_THROWS(in.validate());
  CHECK(rotation_angle_between(Mat3::Identity(), Eigen::AngleAxisd(0.3, Vec3::UnitY()).toRotationMatrix()) ==
        doctest::Approx(0.3));
}
