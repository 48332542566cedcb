#pragma once

#include "neofcam/metrics.hpp"
#include "neofcam/random.hpp"
#include "neofcam/scene.hpp"
#include "neofcam/visibility.hpp"

#include <cstdint>
#include <vector>

namespace neofcam {

// Energy = w_vis * uc - (1 - w_vis) * angle_quality from exact visibility.
struct EnergySettings {
  CoverageThreshold K;
  double w_vis = 0.4;
  UcMode uc_mode = UcMode::per_voxel_sq;
  VisibilityOptions visibility;
};

double energy_of(const EvaluationReport& report, double w_vis);
double placement_energy(const CameraRig& rig, const VoxelGrid& grid, const EnergySettings& settings);

struct RandomSearchResult {
  CameraRig rig;
  double energy = 0.0;
  std::size_t best_trial = 0;
  EvaluationReport initial;  // first trial
  EvaluationReport final;
};

// Trial 0 uses `seed` itself, so trials == 1 reproduces initialize().
RandomSearchResult random_search(const TargetScene& scene, const VoxelGrid& grid, std::size_t k, std::size_t trials,
                                 std::uint64_t seed, const CameraIntrinsics& intrinsics,
                                 const EnergySettings& settings = {});

struct AnnealConfig {
  double initial_temperature = 1.0;
  double cooling = 0.95;
  std::size_t steps_per_temperature = 20;
  double position_sigma = 0.05;  // fraction of the scene diagonal
  double rotation_sigma = 0.2;   // radians
  double final_temperature = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AnnealTraceEntry {
  std::size_t level = 0;
  double temperature = 0.0;
  double energy = 0.0;
  double best_energy = 0.0;
  double acceptance_rate = 0.0;
};

struct AnnealResult {
  CameraRig rig;  // best state visited
  double initial_energy = 0.0;
  double final_energy = 0.0;
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  std::vector<AnnealTraceEntry> trace;
  EvaluationReport initial;
  EvaluationReport final;
};

double acceptance_probability(double delta_energy, double temperature);
// Metropolis rule: always accept delta <= 0, else with exp(-delta / T).
bool metropolis_accept(double delta_energy, double temperature, Rng& rng);

// Gaussian perturbation of one uniformly chosen camera.
CameraPose perturb_pose(const CameraPose& pose, double position_sigma, double rotation_sigma, bool planar, Rng& rng);

AnnealResult simulated_annealing(const TargetScene& scene, const VoxelGrid& grid, std::size_t k,
                                 const CameraIntrinsics& intrinsics, const AnnealConfig& config,
                                 const EnergySettings& settings = {});

}  // namespace neofcam
