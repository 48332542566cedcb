#pragma once

#include "neofcam/adam.hpp"
#include "neofcam/attributes.hpp"
#include "neofcam/diff.hpp"
#include "neofcam/scene.hpp"
#include "neofcam/visibility.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace neofcam {

struct FieldConfig {
  std::size_t hidden = 32;   // encoder width
  std::size_t key_dim = 32;  // attention d_k
  std::size_t initial_steps = 200;
  std::size_t finetune_steps = 20;
  std::size_t max_train_queries = 512;
  std::size_t max_keys = 256;
  LearningRateSchedule schedule{1e-3, 0.95, 50};
  // Initial attention falloff per unit of normalized distance.
  double init_sharpness = 1.0;
  double init_noise = 1e-2;
  std::uint64_t seed = 0;
};

// Row-major parameter blocks. The 6 -> hidden first layer is split into
// its position rows (w1_pos) and normal rows (w1_nrm).
struct FieldWeights {
  std::vector<double> w1_pos, w1_nrm, b1, w2, b2, wq, wk;

  std::vector<std::vector<double>*> blocks();
  std::vector<const std::vector<double>*> blocks() const;
  bool all_finite() const;
};

struct FieldQueryBatch {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
};

struct ObservationField {
  FieldConfig config;
  FieldWeights weights;
  AdamState adam;
  SceneMode mode = SceneMode::volumetric3d;

  // Positions are encoded as (x - center) / scale.
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  // Attributed voxel snapshot used as attention keys.
  int K = 3;
  std::size_t voxel_count = 0;
  std::vector<Vec3> key_positions;
  std::vector<Vec3> key_normals;
  std::vector<std::array<double, 3>> key_attributes;

  std::size_t train_steps = 0;
  double last_train_loss = 0.0;

  std::array<double, 3> sup() const { return attribute_sup(K); }
  bool trained() const { return !key_positions.empty(); }

  // Attribute estimates, clamped to [0, sup]. Throws on an empty batch or
  // an untrained field.
  std::vector<std::array<double, 3>> query(const FieldQueryBatch& batch) const;
};

// Structured initial weights: paired opposite directions in the position
// rows give an attention that decays with distance from each key.
FieldWeights initial_weights(const FieldConfig& config, SceneMode mode);

// Differentiable query. `weights` must hold 7 tensors in FieldWeights
// block order; positions is q x 3.
diff::Tensor field_forward(diff::Tape& tape, const ObservationField& field,
                           const std::vector<diff::Tensor>& weights, const diff::Tensor& positions,
                           const std::vector<Vec3>& normals);

std::vector<diff::Tensor> weight_tensors(const FieldWeights& weights, bool requires_grad);

// Creates (field == nullopt) or fine-tunes a field on the attributed grid.
// The budget defaults to config.initial_steps for a new field and to the
// field's finetune_steps otherwise. The key snapshot is always replaced.
ObservationField lean_neof(std::optional<ObservationField> field, const VoxelGrid& grid,
                           const ObservationAttributes& attributes, std::optional<std::size_t> budget = {},
                           const FieldConfig& config = {});

// Mean squared error on sup-normalised attributes over all voxels.
double field_fit_error(const ObservationField& field, const VoxelGrid& grid, const ObservationAttributes& attributes);

struct LossWeights {
  double vis = 0.4;
  double cc = 0.3;
  double co = 0.3;

  std::array<double, 3> as_array() const { return {vis, cc, co}; }
};

// Per-camera visible voxels frozen in camera-local coordinates.
struct CameraCapture {
  std::vector<std::size_t> voxels;
  std::vector<Vec3> local_points;
  std::vector<Vec3> normals;
  std::size_t visible_count = 0;
  double weight = 1.0;  // visible_count / sampled count
};

struct PlacementCapture {
  std::vector<CameraCapture> cameras;
  std::size_t voxel_count = 0;
  bool planar = false;
};

// Subsamples each camera's visible set to at most max_queries_per_camera
// (evenly strided, 0 = no cap) and reweights the kept queries.
PlacementCapture capture_views(const CameraRig& rig, const VoxelGrid& grid,
                               const std::vector<std::vector<std::size_t>>& visible,
                               std::size_t max_queries_per_camera = 0);
CameraCapture capture_camera(const CameraPose& pose, const VoxelGrid& grid, const std::vector<std::size_t>& visible,
                             std::size_t max_queries);

struct PlacementLoss {
  double L = 0.0;
  std::array<double, 3> components{};  // L_vis, L_cc, L_co
  // per camera: weighted sup minus the mean attributes over its own
  // queries (empty view: the weighted sup)
  std::vector<double> contributions;
  // per camera weighted attribute sum; L = sum_c w_c sup_c - sum_i mass_i / (k n)
  std::vector<double> mass;
  // d L / d (position, forward_hint, right_hint) per camera.
  std::vector<std::array<double, 9>> pose_grad;
  std::vector<double> grad_norms;
  std::vector<char> empty_view;
  std::vector<std::vector<double>> field_grad;  // FieldWeights block order
};

// Loss per the weighted residual-need objective: for each camera the
// captured points move rigidly with its pose and are queried on the field.
// Gradients are exact for the frozen capture. In planar captures the
// out-of-plane gradient entries are zeroed.
PlacementLoss placement_loss(const ObservationField& field, const CameraRig& rig, const PlacementCapture& capture,
                             const LossWeights& weights, bool field_gradients = false, bool pose_gradients = true);

struct CameraTerm {
  double contribution = 0.0;
  double mass = 0.0;
};

// Value-only contribution and mass of a single camera.
CameraTerm camera_term(const ObservationField& field, const CameraPose& pose, const CameraCapture& capture,
                       const LossWeights& weights);

std::vector<std::uint8_t> serialize_field(const ObservationField& field);
ObservationField deserialize_field(const std::vector<std::uint8_t>& bytes);

}  // namespace neofcam
