#pragma once

#include "neofcam/attributes.hpp"
#include "neofcam/baselines.hpp"
#include "neofcam/field.hpp"
#include "neofcam/hybrid.hpp"
#include "neofcam/point_io.hpp"
#include "neofcam/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace neofcam {

enum class OptimizerKind { hybrid, grad_only, non_grad_only, sa, random };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& text);

// Where the target comes from. Exactly one of `generator` / `path` is set.
// Generators: random_composite (seed, samples), shape (planar ShapeSpec),
// sphere, box, torus (volumetric; center, radius / half_extent /
// major+minor, samples, seed).
struct SceneSource {
  std::string generator;
  std::string path;
  std::uint64_t seed = 0;
  std::size_t samples = 320;
  ShapeSpec shape;
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  Vec3 half_extent = Vec3::Ones();
  double major = 1.0;
  double minor = 0.3;
  std::size_t mesh_samples = 4096;
};

struct ExperimentConfig {
  SceneSource scene;
  SceneMode mode = SceneMode::planar2d;
  std::vector<std::size_t> k{10};
  int K = 3;
  std::optional<CameraIntrinsics> intrinsics;  // null: scaled defaults
  std::vector<OptimizerKind> optimizers{OptimizerKind::hybrid};
  bool optimizer_is_list = false;  // textual form of the "optimizer" field
  OptimizerConfig optimizer_config;
  AnnealConfig anneal;
  std::size_t random_trials = 200;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "results";
  UcMode uc_mode = UcMode::per_voxel_sq;
  double resolution = 0.0;  // 0: default_resolution(scene)

  void validate() const;
};

// ConfigError messages name the offending field path, e.g.
// "optimizer_config.weights.w_vis: expected a number".
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string serialize_experiment_config(const ExperimentConfig& config);

TargetScene build_scene(const ExperimentConfig& config);
CameraIntrinsics resolve_intrinsics(const ExperimentConfig& config, const TargetScene& scene);
double resolve_resolution(const ExperimentConfig& config, const TargetScene& scene);

struct CellResult {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::hybrid;
  std::filesystem::path file;
  bool ok = false;
  std::string error;
  double initial_uc = 0.0;
  double uc = 0.0;
  double angle_quality = 0.0;
};

struct RunSummary {
  std::vector<CellResult> cells;
  std::filesystem::path summary_file;
  bool ok() const;
};

std::string cell_file_name(std::size_t k, std::uint64_t seed, OptimizerKind kind);

// One results file per (k, seed, optimizer) cell plus summary.json inside
// config.output_dir. Cells are distributed over `threads` workers; a
// failing cell is recorded in the summary and does not stop the others.
RunSummary run_experiment(const ExperimentConfig& config, std::size_t threads = 1);

enum class AttributeChannel { c, phi_cc, phi_co, combined };

std::string to_string(AttributeChannel channel);
AttributeChannel attribute_channel_from_string(const std::string& text);

// value / sup in [0, 1]; combined is the loss-weighted mean of the three.
std::vector<double> channel_values(const ObservationAttributes& attrs, AttributeChannel channel,
                                   const LossWeights& weights = {});
// 0 -> pure blue, 1 -> pure red, linear in between.
Rgb attribute_color(double t);

// Voxel centers colored by one attribute channel, as binary PLY.
void export_colored_cloud(const VoxelGrid& grid, const ObservationAttributes& attrs, AttributeChannel channel,
                          const std::filesystem::path& path, const LossWeights& weights = {});

struct PoseFile {
  std::vector<CameraPose> poses;
  std::size_t k = 0;
  std::uint64_t seed = 0;
};

// Final poses of a cell results file.
PoseFile read_cell_poses(const std::filesystem::path& path);

// Plain-text table of summary.json (one row per optimizer, then per cell).
std::string format_report(const std::filesystem::path& summary_file);

}  // namespace neofcam
