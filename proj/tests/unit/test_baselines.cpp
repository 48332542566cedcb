#include "doctest.h"

#include "neofcam/baselines.hpp"
#include "neofcam/hybrid.hpp"

#include <algorithm>
#include <cmath>

using namespace neofcam;

namespace {

TargetScene unit_circle() {
  ShapeSpec c;
  c.kind = ShapeKind::circle;
  c.sample_count = 160;
  return generate_planar_shape(c);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("acceptance probability") {
  CHECK(acceptance_probability(0.0, 1.0) == 1.0);
  CHECK(acceptance_probability(-3.0, 0.01) == 1.0);
  CHECK(acceptance_probability(0.5, 0.25) == doctest::Approx(std::exp(-2.0)));
  CHECK(acceptance_probability(0.1, 1e-6) < 1e-300);
  CHECK(acceptance_probability(0.1, 1e-3) < acceptance_probability(0.1, 1e-2));
  Rng rng(71);
  for (int i = 0; i < 100; ++i) CHECK(metropolis_accept(0.0, 1e-9, rng));
}

TEST_CASE("empirical acceptance rate matches exp(-dE/T) within 0.03") {
  Rng rng(72);
  for (const auto& [dE, T] : std::vector<std::pair<double, double>>{{0.1, 0.2}, {1.0, 1.0}, {0.05, 0.5}, {2.0, 1.0}}) {
    int acc = 0;
    for (int i = 0; i < 10000; ++i) acc += metropolis_accept(dE, T, rng);
    CHECK(std::abs(acc / 10000.0 - std::exp(-dE / T)) <= 0.03);
  }
}

TEST_CASE("random search: one trial is initialize, more trials never worse") {
  const auto s = unit_circle();
  const auto grid = voxelize(s, default_resolution(s));
  const auto in = default_intrinsics_for(s);
  const auto one = random_search(s, grid, 5, 1, 9, in);
  const auto init = initialize(s, 5, 9, in);
  for (std::size_t i = 0; i < 5; ++i) CHECK(one.rig.poses[i].position == init.poses[i].position);
  CHECK(one.best_trial == 0);
  const auto many = random_search(s, grid, 5, 100, 9, in);
  CHECK(many.energy <= one.energy);
  CHECK(many.rig.size() == 5);
  CHECK(many.energy == doctest::Approx(placement_energy(many.rig, grid, {})));
  CHECK_THROWS_AS(random_search(s, grid, 5, 0, 9, in), InvalidArgument);
}

TEST_CASE("50 random trials beat the single-trial median uc") {
  const auto s = unit_circle();
  const auto grid = voxelize(s, default_resolution(s));
  const auto in = default_intrinsics_for(s);
  std::vector<double> single, best;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    single.push_back(random_search(s, grid, 10, 1, seed, in).final.uc);
    best.push_back(random_search(s, grid, 10, 50, seed, in).final.uc);
  }
  CHECK(median(best) < median(single));
}

TEST_CASE("simulated annealing keeps the best state and k") {
  const auto s = unit_circle();
  const auto grid = voxelize(s, default_resolution(s));
  const auto in = default_intrinsics_for(s);
  int not_worse = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    AnnealConfig cfg;
    cfg.seed = seed;
    cfg.cooling = 0.8;  // shorter chain for the unit test
    const auto r = simulated_annealing(s, grid, 4, in, cfg);
    CHECK(r.rig.size() == 4);
    r.rig.validate();
    CHECK(r.final_energy == doctest::Approx(placement_energy(r.rig, grid, {})));
    for (const auto& t : r.trace) CHECK(t.best_energy <= t.energy + 1e-15);
    not_worse += r.final_energy <= r.initial_energy;
    CHECK(r.proposals == r.trace.size() * cfg.steps_per_temperature);
  }
  CHECK(not_worse >= 8);
}

TEST_CASE("annealing is deterministic per seed and validates its config") {
  const auto s = unit_circle();
  const auto grid = voxelize(s, default_resolution(s));
  AnnealConfig cfg;
  cfg.seed = 4;
  cfg.cooling = 0.7;
  const auto a = simulated_annealing(s, grid, 3, default_intrinsics_for(s), cfg);
  const auto b = simulated_annealing(s, grid, 3, default_intrinsics_for(s), cfg);
  CHECK(a.final_energy == b.final_energy);
  CHECK(a.accepted == b.accepted);
  AnnealConfig bad;
  bad.cooling = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.final_temperature = 2.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("pose perturbation keeps planar poses planar and proper") {
  Rng rng(73);
  const CameraPose p = CameraPose::planar(Vec2(1, 2), 0.4);
  for (int i = 0; i < 50; ++i) {
    const CameraPose q = perturb_pose(p, 0.1, 0.2, true, rng);
    CHECK(q.position.z() == 0.0);
    CHECK(q.forward().z() == doctest::Approx(0.0));
    const CameraPose r = perturb_pose(CameraPose::looking_along(Vec3(1, 2, 3), Vec3(0, 1, 1)), 0.1, 0.2, false, rng);
    CHECK(std::abs(r.rotation().determinant() - 1.0) < 1e-9);
  }
}
