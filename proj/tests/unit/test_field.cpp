#include "doctest.h"

#include "neofcam/field.hpp"
#include "neofcam/random.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace neofcam;

namespace {

VoxelGrid grid_of(const std::vector<Vec3>& centers, const std::vector<Vec3>& normals,
                  SceneMode mode = SceneMode::volumetric3d) {
  VoxelGrid g;
  g.resolution = 0.1;
  g.mode = mode;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    Voxel v;
    v.center = centers[i];
    v.normal = normals[i].normalized();
    v.members = {i};
    g.voxels.push_back(v);
  }
  return g;
}

ObservationAttributes constant_attrs(std::size_t n, std::array<double, 3> a, int K = 3) {
  ObservationAttributes o;
  o.K = K;
  o.c.assign(n, a[0]);
  o.phi_cc.assign(n, a[1]);
  o.phi_co.assign(n, a[2]);
  return o;
}

VoxelGrid circle30() {
  std::vector<Vec3> c, n;
  for (int i = 0; i < 30; ++i) {
    const double a = 2 * kPi * i / 30;
    c.emplace_back(std::cos(a), std::sin(a), 0);
    n.emplace_back(std::cos(a), std::sin(a), 0);
  }
  return grid_of(c, n, SceneMode::planar2d);
}

double weight_delta(const FieldWeights& a, const FieldWeights& b) {
  double s = 0;
  const auto ba = a.blocks(), bb = b.blocks();
  for (std::size_t i = 0; i < ba.size(); ++i)
    for (std::size_t j = 0; j < ba[i]->size(); ++j) s += std::pow((*ba[i])[j] - (*bb[i])[j], 2);
  return std::sqrt(s);
}

struct SmallScene {
  VoxelGrid grid;
  CameraRig rig;
  ObservationAttributes attrs;
  ObservationField field;
};

// 20 voxels on a sphere patch with two cameras, attributes from exact
// visibility and a briefly trained field.
SmallScene small_scene() {
  SmallScene s;
  Rng rng(51);
  std::vector<Vec3> c, n;
  for (int i = 0; i < 20; ++i) {
    Vec3 d = random_unit_vector(rng);
    if (d.z() < 0) d.z() = -d.z();
    c.push_back(d);
    n.push_back(d);
  }
  s.grid = grid_of(c, n);
  s.rig.intrinsics.hfov = s.rig.intrinsics.vfov = 1.6;
  s.rig.intrinsics.near = 0.1;
  s.rig.intrinsics.far = 10;
  s.rig.poses = {CameraPose::looking_along(Vec3(0.3, 0.2, 3), Vec3(-0.1, 0, -1)),
                 CameraPose::looking_along(Vec3(2.5, 0, 1.5), Vec3(-1, 0.1, -0.5))};
  s.attrs = shape_analyze(s.rig, s.grid, {3});
  FieldConfig cfg;
  cfg.seed = 3;
  s.field = lean_neof(std::nullopt, s.grid, s.attrs, 50, cfg);
  return s;
}

}  // namespace

TEST_CASE("one attributed voxel: every query returns its attributes") {
  const auto g = grid_of({{0.2, 0.1, 0.3}}, {{0, 0, 1}});
  const auto attrs = constant_attrs(1, {2.0, 0.7, 0.4});
  const auto f = lean_neof(std::nullopt, g, attrs, 0);
  Rng rng(52);
  FieldQueryBatch b;
  for (int i = 0; i < 10; ++i) {
    b.positions.push_back(random_unit_vector(rng) * 3.0);
    b.normals.push_back(random_unit_vector(rng));
  }
  for (const auto& o : f.query(b)) {
    CHECK(o[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(o[1] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(o[2] == doctest::Approx(0.4).epsilon(1e-12));
  }
}

TEST_CASE("identical voxels with identical attributes return them") {
  const auto g = grid_of({{0, 0, 0}, {0, 0, 0}}, {{0, 1, 0}, {0, 1, 0}});
  const auto f = lean_neof(std::nullopt, g, constant_attrs(2, {1.0, 0.2, 0.9}), 5);
  FieldQueryBatch b{{{1, 2, 3}, {0, 0, 0}}, {{1, 0, 0}, {0, 1, 0}}};
  for (const auto& o : f.query(b)) {
    CHECK(o[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(o[1] == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(o[2] == doctest::Approx(0.9).epsilon(1e-9));
  }
}

TEST_CASE("constant attributes: outputs are exact, so attention rows sum to 1") {
  const auto g = circle30();
  const auto f = lean_neof(std::nullopt, g, constant_attrs(30, {1.5, 1.0, 0.5}));
  CHECK(f.last_train_loss < 1e-4);
  Rng rng(53);
  FieldQueryBatch b;
  for (int i = 0; i < 40; ++i) {
    b.positions.push_back(Vec3(uniform(rng, -3, 3), uniform(rng, -3, 3), 0));
    b.normals.push_back(random_unit_vector(rng));
  }
  for (const auto& o : f.query(b)) {
    CHECK(std::abs(o[0] - 1.5) < 1e-9);
    CHECK(std::abs(o[1] - 1.0) < 1e-9);
    CHECK(std::abs(o[2] - 0.5) < 1e-9);
  }
}

TEST_CASE("trained field reproduces voxel attributes within 0.1 sup") {
  const auto g = circle30();
  CameraRig rig;
  rig.intrinsics.far = 10;
  rig.poses = {CameraPose::planar(Vec2(2.5, 0), kPi), CameraPose::planar(Vec2(0, 2.5), -kPi / 2),
               CameraPose::planar(Vec2(1.8, 1.8), -3 * kPi / 4)};
  const auto attrs = shape_analyze(rig, g, {3});
  const auto f = lean_neof(std::nullopt, g, attrs);
  const auto out = f.query({g.centers(), g.normals()});
  const auto sup = attribute_sup(3);
  std::size_t within = 0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    bool ok = true;
    for (int a = 0; a < 3; ++a) ok &= std::abs(out[j][a] - attrs.row(j)[a]) <= 0.1 * sup[a];
    within += ok;
  }
  CHECK(within == g.size());
  CHECK(field_fit_error(f, g, attrs) < 0.01);
}

TEST_CASE("second fine-tune with identical attributes moves the weights less") {
  const auto g = circle30();
  CameraRig rig;
  rig.intrinsics.far = 10;
  rig.poses = {CameraPose::planar(Vec2(2.5, 0), kPi), CameraPose::planar(Vec2(-2.5, 0.5), 0.1)};
  const auto attrs = shape_analyze(rig, g, {3});
  const auto f0 = lean_neof(std::nullopt, g, attrs);
  const auto f1 = lean_neof(f0, g, attrs);
  const auto f2 = lean_neof(f1, g, attrs);
  CHECK(f1.train_steps == f0.train_steps + f0.config.finetune_steps);
  CHECK(weight_delta(f1.weights, f2.weights) < weight_delta(f0.weights, f1.weights));
}

TEST_CASE("zero budget only replaces the attributed snapshot") {
  const auto g = circle30();
  const auto f0 = lean_neof(std::nullopt, g, constant_attrs(30, {3, 1.5, 1}));
  const auto f1 = lean_neof(f0, g, constant_attrs(30, {1, 0.5, 0}), 0);
  CHECK(weight_delta(f0.weights, f1.weights) == 0.0);
  CHECK(f1.train_steps == f0.train_steps);
  CHECK(f1.key_attributes[0] == std::array<double, 3>{1, 0.5, 0});
}

TEST_CASE("query errors") {
  ObservationField untrained;
  CHECK_THROWS(untrained.query({{{0, 0, 0}}, {{0, 0, 1}}}));
  const auto f = lean_neof(std::nullopt, circle30(), constant_attrs(30, {1, 1, 1}), 0);
  CHECK_THROWS(f.query({}));
  CHECK_THROWS(f.query({{{0, 0, 0}}, {}}));
  CHECK_THROWS(lean_neof(std::nullopt, circle30(), constant_attrs(29, {1, 1, 1})));
}

TEST_CASE("placement loss: weights (1,0,0) give L_vis, and loss bounds") {
  auto s = small_scene();
  const auto cap = capture_views(s.rig, s.grid, visible_sets(s.rig, s.grid));
  const auto pl = placement_loss(s.field, s.rig, cap, {1, 0, 0});
  CHECK(pl.L == pl.components[0]);
  const auto sup = attribute_sup(3);
  const auto d = placement_loss(s.field, s.rig, cap, {});
  for (int c = 0; c < 3; ++c) {
    CHECK(d.components[c] >= 0);
    CHECK(d.components[c] <= sup[c]);
  }
  CHECK(std::abs(d.L - (0.4 * d.components[0] + 0.3 * d.components[1] + 0.3 * d.components[2])) < 1e-12);
  // mass decomposition of L
  double m = 0;
  for (double v : d.mass) m += v;
  const double base = 0.4 * sup[0] + 0.3 * sup[1] + 0.3 * sup[2];
  CHECK(std::abs(d.L - (base - m / (2.0 * s.grid.size()))) < 1e-12);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto term = camera_term(s.field, s.rig.poses[i], cap.cameras[i], {});
    CHECK(std::abs(term.mass - d.mass[i]) < 1e-12);
    CHECK(std::abs(term.contribution - d.contributions[i]) < 1e-12);
  }
}

TEST_CASE("placement loss: sup attributes everywhere and every voxel seen gives zero") {
  VoxelGrid g = grid_of({{0, 0, 1}, {0.2, 0, 1}, {-0.2, 0.1, 1}}, {{0, 0, -1}, {0, 0, -1}, {0, 0, -1}});
  const auto sup = attribute_sup(3);
  const auto f = lean_neof(std::nullopt, g, constant_attrs(3, sup), 0);
  CameraRig rig;
  rig.intrinsics.near = 0.1;
  rig.poses = {CameraPose::looking_along(Vec3::Zero(), Vec3::UnitZ()),
               CameraPose::looking_along(Vec3(0.1, 0, 0), Vec3::UnitZ())};
  const auto vis = visible_sets(rig, g);
  REQUIRE(vis[0].size() == 3);
  REQUIRE(vis[1].size() == 3);
  const auto pl = placement_loss(f, rig, capture_views(rig, g, vis), {});
  CHECK(std::abs(pl.L) < 1e-12);

  // one camera of two sees nothing: each component is half its sup
  std::vector<std::vector<std::size_t>> half{vis[0], {}};
  const auto ph = placement_loss(f, rig, capture_views(rig, g, half), {});
  for (int c = 0; c < 3; ++c) CHECK(ph.components[c] == doctest::Approx(0.5 * sup[c]));
  CHECK(ph.empty_view[1]);
  for (double gval : ph.pose_grad[1]) CHECK(gval == 0.0);
}

TEST_CASE("pose gradient matches central differences with visible sets frozen") {
  auto s = small_scene();
  const auto cap = capture_views(s.rig, s.grid, visible_sets(s.rig, s.grid));
  REQUIRE(!cap.cameras[0].voxels.empty());
  REQUIRE(!cap.cameras[1].voxels.empty());
  const auto pl = placement_loss(s.field, s.rig, cap, {});
  CameraRig rig = s.rig;
  std::vector<double*> slots;
  for (CameraPose& p : rig.poses) {
    for (int a = 0; a < 3; ++a) slots.push_back(&p.position[a]);
    for (int a = 0; a < 3; ++a) slots.push_back(&p.forward_hint[a]);
    for (int a = 0; a < 3; ++a) slots.push_back(&p.right_hint[a]);
  }
  // the pairwise relu puts kinks a few 1e-5 apart along any direction
  const auto fd =
      oracle::central_diff_smooth([&] { return placement_loss(s.field, rig, cap, {}, false, false).L; }, slots);
  double worst = 0;
  for (std::size_t i = 0; i < 2; ++i)
    for (int t = 0; t < 9; ++t) {
      REQUIRE(!std::isnan(fd[9 * i + t]));
      worst = std::max(worst, oracle::rel_error(pl.pose_grad[i][t], fd[9 * i + t]));
    }
  CHECK(worst < 1e-3);
}

TEST_CASE("field gradients match central differences") {
  auto s = small_scene();
  const auto cap = capture_views(s.rig, s.grid, visible_sets(s.rig, s.grid));
  const auto pl = placement_loss(s.field, s.rig, cap, {}, true, false);
  ObservationField f = s.field;
  auto blocks = f.weights.blocks();
  std::vector<double*> slots;
  std::vector<double> analytic;
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (std::size_t j = 0; j < blocks[b]->size(); j += 7) {
      slots.push_back(&(*blocks[b])[j]);
      analytic.push_back(pl.field_grad[b][j]);
    }
  const auto fd = oracle::central_diff_smooth([&] { return placement_loss(f, s.rig, cap, {}, false, false).L; }, slots);
  double worst = 0;
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    if (std::isnan(fd[i])) {
      ++excluded;
      continue;
    }
    worst = std::max(worst, oracle::rel_error(analytic[i], fd[i], 1e-5));
  }
  CHECK(excluded * 20 <= fd.size());
  CHECK(worst < 1e-3);
}

TEST_CASE("field serialization round trip") {
  auto s = small_scene();
  const auto bytes = serialize_field(s.field);
  const auto f = deserialize_field(bytes);
  CHECK(weight_delta(f.weights, s.field.weights) == 0.0);
  CHECK(f.key_positions == s.field.key_positions);
  CHECK(f.key_attributes == s.field.key_attributes);
  CHECK(f.K == s.field.K);
  CHECK(f.scale == s.field.scale);
  const auto q = s.field.query({s.grid.centers(), s.grid.normals()});
  CHECK(f.query({s.grid.centers(), s.grid.normals()}) == q);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_field(bad), IoError);
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + bytes.size() / 2);
  CHECK_THROWS_AS(deserialize_field(cut), IoError);
}
