#pragma once

#include "neofcam/adam.hpp"
#include "neofcam/attributes.hpp"
#include "neofcam/field.hpp"
#include "neofcam/metrics.hpp"
#include "neofcam/scene.hpp"
#include "neofcam/visibility.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace neofcam {

enum class Strategy { hybrid, grad_only, non_grad_only };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& text);

struct OptimizerConfig {
  CoverageThreshold K;
  LossWeights weights;
  double eps_loss = 1e-4;
  double eps_step = 1e-4;
  // A camera counts as converged when lr * |grad|_1 (positions in scene
  // diagonals), the loss change its next step could cause, is below this.
  double eps_grad = 1e-4;
  std::size_t m = 5;
  std::size_t max_outer_iterations = 25;
  std::size_t inner_step_cap = 100;
  double large_loss_factor = 1.1;
  std::size_t max_commits_per_phase = 0;  // 0: twice the camera count
  // Pose Adam step size: radians for the rotation hints, scene diagonals
  // for positions.
  LearningRateSchedule pose_schedule{1e-3, 0.95, 50};
  std::size_t max_queries_per_camera = 64;
  FieldConfig field;
  VisibilityOptions visibility;
  UcMode uc_mode = UcMode::per_voxel_sq;
  double resolution = 0.0;  // 0: default_resolution(scene)
  std::optional<CameraIntrinsics> intrinsics;
  Strategy strategy = Strategy::hybrid;
  std::uint64_t seed = 0;

  void validate() const;
};

// Exact visibility state of a rig.
struct Analysis {
  std::vector<std::vector<std::size_t>> visible;
  CoverageMatrix coverage;
  ObservationAttributes attributes;
};

Analysis analyze(const CameraRig& rig, const VoxelGrid& grid, const OptimizerConfig& config);

struct CommitRecord {
  std::size_t camera = 0;
  double L_before = 0.0;
  double L_after = 0.0;
};

struct TraceEntry {
  std::size_t iter = 0;
  std::string phase;  // init, grad, non_grad
  double L = 0.0;
  std::array<double, 3> components{};
  double uc = 0.0;
  double angle_quality = 0.0;
  double wall_ms = 0.0;
  std::vector<CameraPose> poses;
  std::vector<CommitRecord> commits;
};

struct OptimizationTrace {
  std::vector<TraceEntry> entries;
  std::string stop_reason;
  std::size_t outer_iterations = 0;
};

struct OptimizationResult {
  CameraRig rig;
  OptimizationTrace trace;
  EvaluationReport initial;
  EvaluationReport final;
  VoxelGrid grid;
};

// Positions uniform in the bounds inflated 1.5x, rejected inside the
// object's convex hull; uniform random orientation (in-plane for planar
// scenes). Throws GeometryError for degenerate bounds or when 10k draws
// fail.
CameraRig initialize(const TargetScene& scene, std::size_t k, std::uint64_t seed, const CameraIntrinsics& intrinsics);

// Persistent pose-optimizer state: 3 Adam slots per camera (position,
// forward hint, right hint).
struct PoseOptimizer {
  AdamState adam;
  double position_scale = 1.0;

  PoseOptimizer(const LearningRateSchedule& schedule, std::size_t cameras, double scene_diagonal);
  void reset_camera(std::size_t camera);
};

struct GradPhaseResult {
  double L_before = 0.0;
  double L_after = 0.0;
  std::size_t steps = 0;
  bool rejected_last = false;
  std::vector<double> grad_norms;  // positions measured in scene diagonals
  std::vector<double> contributions;
  std::vector<char> empty_view;
};

// Adam on pose parameters against the frozen field and capture until the
// per-step loss change drops below eps_loss or inner_step_cap is hit. A
// step that increases the loss is reverted and ends the phase.
GradPhaseResult grad_phase(CameraRig& rig, const ObservationField& field, const VoxelGrid& grid,
                           const std::vector<std::vector<std::size_t>>& visible, const OptimizerConfig& config,
                           PoseOptimizer& optimizer);

// m proposal poses above c-weighted farthest-point clusters of the
// under-covered voxels, looking along the negated region normal.
std::vector<CameraPose> candidate_poses(const VoxelGrid& grid, const ObservationAttributes& attributes,
                                        const CameraIntrinsics& intrinsics, std::size_t m,
                                        const LossWeights& weights);

struct NonGradResult {
  std::vector<CommitRecord> commits;
};

// Elite resampling. Updates rig, analysis and field in place (each commit
// is followed by re-analysis and a fine-tune). `waive_gradient_test`
// skips the small-gradient requirement (used when no gradient phase ran).
NonGradResult non_grad_phase(CameraRig& rig, ObservationField& field, const VoxelGrid& grid, Analysis& analysis,
                             const OptimizerConfig& config, bool waive_gradient_test,
                             PoseOptimizer* optimizer = nullptr);

// Max over cameras of position change / diagonal + geodesic rotation change.
double check_step_update(const CameraRig& before, const CameraRig& after, double scene_diagonal);

OptimizationResult optimize(const TargetScene& scene, std::size_t k, const OptimizerConfig& config);

}  // namespace neofcam
