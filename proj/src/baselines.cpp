#include "neofcam/baselines.hpp"

#include "neofcam/hybrid.hpp"

#include <cmath>

namespace neofcam {

double energy_of(const EvaluationReport& r, double w_vis) { return w_vis * r.uc - (1.0 - w_vis) * r.angle_quality; }

double placement_energy(const CameraRig& rig, const VoxelGrid& grid, const EnergySettings& s) {
  return energy_of(evaluate(rig, grid, s.K, s.uc_mode, s.visibility), s.w_vis);
}

RandomSearchResult random_search(const TargetScene& scene, const VoxelGrid& grid, std::size_t k, std::size_t trials,
                                 std::uint64_t seed, const CameraIntrinsics& intrinsics, const EnergySettings& s) {
  if (trials < 1) throw InvalidArgument("random_search: trials must be >= 1");
  RandomSearchResult res;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::uint64_t sd = t == 0 ? seed : derive_seed(seed, t);
    CameraRig rig = initialize(scene, k, sd, intrinsics);
    const EvaluationReport rep = evaluate(rig, grid, s.K, s.uc_mode, s.visibility);
    const double e = energy_of(rep, s.w_vis);
    if (t == 0) res.initial = rep;
    if (t == 0 || e < res.energy) {
      res.energy = e;
      res.rig = std::move(rig);
      res.best_trial = t;
      res.final = rep;
    }
  }
  return res;
}

void AnnealConfig::validate() const {
  if (!(cooling > 0.0 && cooling < 1.0)) throw ConfigError("anneal: cooling must lie in (0, 1)");
  if (!(final_temperature > 0.0 && initial_temperature > final_temperature))
    throw ConfigError("anneal: need initial_temperature > final_temperature > 0");
  if (steps_per_temperature < 1) throw ConfigError("anneal: steps_per_temperature must be >= 1");
  if (position_sigma < 0.0 || rotation_sigma < 0.0) throw ConfigError("anneal: sigmas must be >= 0");
}

double acceptance_probability(double delta, double temperature) {
  if (delta <= 0.0) return 1.0;
  if (!(temperature > 0.0)) return 0.0;
  return std::exp(-delta / temperature);
}

bool metropolis_accept(double delta, double temperature, Rng& rng) {
  if (delta <= 0.0) return true;
  return uniform01(rng) < acceptance_probability(delta, temperature);
}

CameraPose perturb_pose(const CameraPose& pose, double position_sigma, double rotation_sigma, bool planar, Rng& rng) {
  CameraPose out = pose;
  if (planar) {
    out.position.x() += position_sigma * standard_normal(rng);
    out.position.y() += position_sigma * standard_normal(rng);
    const Vec3 f = pose.forward();
    const double heading = std::atan2(f.y(), f.x()) + rotation_sigma * standard_normal(rng);
    return CameraPose::planar(out.position.head<2>(), heading);
  }
  for (int a = 0; a < 3; ++a) out.position[a] += position_sigma * standard_normal(rng);
  Vec3 w;
  for (int a = 0; a < 3; ++a) w[a] = rotation_sigma * standard_normal(rng);
  Mat3 r = pose.rotation();
  const double angle = w.norm();
  if (angle > 0.0) r = Eigen::AngleAxisd(angle, w / angle).toRotationMatrix() * r;
  return CameraPose::from_rotation(out.position, r);
}

AnnealResult simulated_annealing(const TargetScene& scene, const VoxelGrid& grid, std::size_t k,
                                 const CameraIntrinsics& intrinsics, const AnnealConfig& cfg,
                                 const EnergySettings& s) {
  cfg.validate();
  const bool planar = scene.mode == SceneMode::planar2d;
  const double diag = scene.bounds.diagonal();
  Rng rng(derive_seed(cfg.seed, 0x5A));

  CameraRig rig = initialize(scene, k, cfg.seed, intrinsics);
  auto sets = visible_sets(rig, grid, s.visibility);
  auto eval = [&](const CameraRig& r, const std::vector<std::vector<std::size_t>>& vs) {
    return evaluate_coverage(r, grid, coverage_from_sets(vs, grid.size()), s.K, s.uc_mode);
  };
  AnnealResult res;
  res.initial = eval(rig, sets);
  double energy = energy_of(res.initial, s.w_vis);
  res.initial_energy = energy;
  CameraRig best = rig;
  double best_energy = energy;
  res.final = res.initial;

  double T = cfg.initial_temperature;
  for (std::size_t level = 0; T > cfg.final_temperature; ++level) {
    std::size_t acc = 0;
    for (std::size_t step = 0; step < cfg.steps_per_temperature; ++step) {
      const std::size_t i = std::min(k - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k)));
      CameraRig cand = rig;
      cand.poses[i] = perturb_pose(rig.poses[i], cfg.position_sigma * diag, cfg.rotation_sigma, planar, rng);
      auto cand_sets = sets;
      cand_sets[i] = visible_set(cand.poses[i], intrinsics, grid, s.visibility);
      const EvaluationReport rep = eval(cand, cand_sets);
      const double e = energy_of(rep, s.w_vis);
      ++res.proposals;
      if (metropolis_accept(e - energy, T, rng)) {
        rig = std::move(cand);
        sets = std::move(cand_sets);
        energy = e;
        ++acc;
        ++res.accepted;
        if (e < best_energy) {
          best_energy = e;
          best = rig;
          res.final = rep;
        }
      }
    }
    res.trace.push_back({level, T, energy, best_energy,
                         static_cast<double>(acc) / static_cast<double>(cfg.steps_per_temperature)});
    T *= cfg.cooling;
  }
  res.rig = std::move(best);
  res.final_energy = best_energy;
  return res;
}

}  // namespace neofcam
