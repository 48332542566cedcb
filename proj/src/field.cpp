#include "neofcam/field.hpp"

#include "neofcam/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <string>

namespace neofcam {
namespace {

using diff::Tape;
using diff::Tensor;

Tensor points_tensor(const std::vector<Vec3>& pts) {
  std::vector<double> v(3 * pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int a = 0; a < 3; ++a) v[3 * i + a] = pts[i][a];
  return diff::make_tensor(pts.size(), 3, std::move(v));
}

std::vector<std::size_t> strided_subset(std::size_t n, std::size_t cap) {
  std::vector<std::size_t> idx;
  if (cap == 0 || n <= cap) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }
  idx.reserve(cap);
  for (std::size_t t = 0; t < cap; ++t) idx.push_back(t * n / cap);
  return idx;
}

void normalisation_from_grid(const VoxelGrid& grid, Vec3& center, double& scale) {
  Vec3 lo = grid.voxels[0].center, hi = lo;
  for (const Voxel& v : grid.voxels) {
    lo = lo.cwiseMin(v.center);
    hi = hi.cwiseMax(v.center);
  }
  center = 0.5 * (lo + hi);
  scale = std::max(0.5 * (hi - lo).norm(), grid.resolution);
  if (!(scale > 0.0)) scale = 1.0;
}

}  // namespace

std::vector<std::vector<double>*> FieldWeights::blocks() { return {&w1_pos, &w1_nrm, &b1, &w2, &b2, &wq, &wk}; }

std::vector<const std::vector<double>*> FieldWeights::blocks() const {
  return {&w1_pos, &w1_nrm, &b1, &w2, &b2, &wq, &wk};
}

bool FieldWeights::all_finite() const {
  for (const auto* b : blocks())
    for (double x : *b)
      if (!std::isfinite(x)) return false;
  return true;
}

FieldWeights initial_weights(const FieldConfig& cfg, SceneMode mode) {
  const std::size_t h = cfg.hidden, dk = cfg.key_dim;
  if (h < 2 || dk < 1) throw InvalidArgument("field config: hidden >= 2 and key_dim >= 1 required");
  Rng rng(derive_seed(cfg.seed, 0xF1E1D));
  auto noise = [&] { return cfg.init_noise * standard_normal(rng); };

  FieldWeights w;
  w.w1_pos.assign(3 * h, 0.0);
  const std::size_t pairs = h / 2;
  for (std::size_t t = 0; t < pairs; ++t) {
    Vec3 d;
    if (mode == SceneMode::planar2d) {
      const double a = kPi * static_cast<double>(t) / static_cast<double>(pairs);
      d = Vec3(std::cos(a), std::sin(a), 0.0);
    } else {
      const double z = (static_cast<double>(t) + 0.5) / static_cast<double>(pairs);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = static_cast<double>(t) * kPi * (3.0 - std::sqrt(5.0));
      d = Vec3(r * std::cos(phi), r * std::sin(phi), z);
    }
    for (int a = 0; a < 3; ++a) {
      w.w1_pos[a * h + 2 * t] = d[a];
      w.w1_pos[a * h + 2 * t + 1] = -d[a];
    }
  }
  for (double& x : w.w1_pos) x += noise();
  w.w1_nrm.resize(3 * h);
  for (double& x : w.w1_nrm) x = noise();
  w.b1.resize(h);
  for (double& x : w.b1) x = noise();
  w.w2.assign(h * h, 0.0);
  for (std::size_t i = 0; i < h; ++i) w.w2[i * h + i] = 1.0;
  for (double& x : w.w2) x += noise();
  w.b2.resize(h);
  for (double& x : w.b2) x = 1.0 + noise();
  // With W2 = I, b2 = 1, W_Q = E and W_K = -alpha E the logits reduce to
  // -sharpness * sum_t |d_t . (key - query)|.
  const double alpha = cfg.init_sharpness * std::sqrt(static_cast<double>(dk));
  w.wq.assign(h * dk, 0.0);
  w.wk.assign(h * dk, 0.0);
  for (std::size_t i = 0; i < std::min(h, dk); ++i) {
    w.wq[i * dk + i] = 1.0;
    w.wk[i * dk + i] = -alpha;
  }
  for (double& x : w.wq) x += noise();
  for (double& x : w.wk) x += noise();
  return w;
}

std::vector<Tensor> weight_tensors(const FieldWeights& w, bool requires_grad) {
  const std::size_t h = w.b1.size();
  const std::size_t dk = h == 0 ? 0 : w.wq.size() / h;
  return {
      diff::make_tensor(3, h, w.w1_pos, requires_grad), diff::make_tensor(3, h, w.w1_nrm, requires_grad),
      diff::make_tensor(1, h, w.b1, requires_grad),     diff::make_tensor(h, h, w.w2, requires_grad),
      diff::make_tensor(1, h, w.b2, requires_grad),     diff::make_tensor(h, dk, w.wq, requires_grad),
      diff::make_tensor(h, dk, w.wk, requires_grad),
  };
}

Tensor field_forward(Tape& tape, const ObservationField& f, const std::vector<Tensor>& w, const Tensor& positions,
                     const std::vector<Vec3>& normals) {
  if (!f.trained()) throw InvalidArgument("field query: field has no attributed voxels");
  if (positions->rows == 0) throw InvalidArgument("field query: empty query batch");
  if (positions->cols != 3 || normals.size() != positions->rows)
    throw InvalidArgument("field query: positions and normals must have matching length");
  if (w.size() != 7) throw InvalidArgument("field query: expected 7 weight tensors");
  const Tensor &w1p = w[0], &w1n = w[1], &b1 = w[2], &w2 = w[3], &b2 = w[4], &wq = w[5], &wk = w[6];
  const std::size_t m = f.key_positions.size();
  const double inv_scale = 1.0 / f.scale;

  std::vector<Vec3> kp(m);
  for (std::size_t j = 0; j < m; ++j) kp[j] = (f.key_positions[j] - f.center) * inv_scale;
  std::vector<double> ov(3 * m);
  for (std::size_t j = 0; j < m; ++j)
    for (int a = 0; a < 3; ++a) ov[3 * j + a] = f.key_attributes[j][a];
  const Tensor keys_pos = points_tensor(kp);
  const Tensor keys_nrm = points_tensor(f.key_normals);
  const Tensor key_attr = diff::make_tensor(m, 3, std::move(ov));

  const Tensor xn = tape.scale(tape.sub(positions, diff::row_vector(f.center)), inv_scale);
  const Tensor a = tape.add(tape.add(tape.matmul(keys_pos, w1p), tape.matmul(keys_nrm, w1n)), b1);
  const Tensor b = tape.matmul(xn, w1p);
  const Tensor eq = tape.add(tape.matmul(tape.relu(tape.add(tape.matmul(points_tensor(normals), w1n), b1)), w2), b2);
  const Tensor q = tape.matmul(eq, wq);
  const Tensor mk = tape.matmul(w2, wk);
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(wq->cols));
  const Tensor v = tape.scale(tape.matmul(q, tape.transpose(mk)), inv_sqrt_dk);
  const Tensor attn = tape.softmax_rows(tape.pair_relu_dot(a, b, v));
  const Tensor out = tape.matmul(attn, key_attr);
  const auto sup = f.sup();
  const std::array<double, 3> lo{0.0, 0.0, 0.0};
  return tape.clamp_cols(out, lo, sup);
}

std::vector<std::array<double, 3>> ObservationField::query(const FieldQueryBatch& batch) const {
  if (batch.positions.size() != batch.normals.size())
    throw InvalidArgument("field query: positions and normals must have matching length");
  Tape tape;
  const Tensor out = field_forward(tape, *this, weight_tensors(weights, false), points_tensor(batch.positions),
                                   batch.normals);
  std::vector<std::array<double, 3>> res(out->rows);
  for (std::size_t i = 0; i < out->rows; ++i)
    for (int a = 0; a < 3; ++a) res[i][a] = out->at(i, a);
  return res;
}

ObservationField lean_neof(std::optional<ObservationField> field, const VoxelGrid& grid,
                           const ObservationAttributes& attrs, std::optional<std::size_t> budget,
                           const FieldConfig& config) {
  if (grid.empty()) throw InvalidArgument("lean_neof: empty voxel grid");
  if (attrs.size() != grid.size() || attrs.phi_cc.size() != grid.size() || attrs.phi_co.size() != grid.size())
    throw InvalidArgument("lean_neof: attribute count does not match voxel count");

  const bool fresh = !field.has_value();
  ObservationField f;
  if (fresh) {
    f.config = config;
    f.mode = grid.mode;
    f.weights = initial_weights(config, grid.mode);
    f.adam.schedule = config.schedule;
    normalisation_from_grid(grid, f.center, f.scale);
  } else {
    f = std::move(*field);
  }
  const FieldConfig& cfg = f.config;
  const std::size_t steps = budget ? *budget : (fresh ? cfg.initial_steps : cfg.finetune_steps);

  f.K = attrs.K;
  f.voxel_count = grid.size();
  const auto keys = strided_subset(grid.size(), cfg.max_keys);
  f.key_positions.clear();
  f.key_normals.clear();
  f.key_attributes.clear();
  for (std::size_t j : keys) {
    f.key_positions.push_back(grid.voxels[j].center);
    f.key_normals.push_back(grid.voxels[j].normal);
    f.key_attributes.push_back(attrs.row(j));
  }
  if (steps == 0) return f;

  std::vector<std::size_t> train(grid.size());
  std::iota(train.begin(), train.end(), std::size_t{0});
  if (cfg.max_train_queries > 0 && train.size() > cfg.max_train_queries) {
    Rng rng(derive_seed(cfg.seed, 0x7EA1 + f.train_steps));
    for (std::size_t i = 0; i < cfg.max_train_queries; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(train.size() - i));
      std::swap(train[i], train[std::min(j, train.size() - 1)]);
    }
    train.resize(cfg.max_train_queries);
    std::sort(train.begin(), train.end());
  }
  const auto sup = f.sup();
  std::vector<Vec3> qp, qn;
  std::vector<double> target;
  for (std::size_t j : train) {
    qp.push_back(grid.voxels[j].center);
    qn.push_back(grid.voxels[j].normal);
    const auto row = attrs.row(j);
    for (int a = 0; a < 3; ++a) target.push_back(row[a]);
  }
  const Tensor positions = points_tensor(qp);
  const Tensor targets = diff::make_tensor(train.size(), 3, std::move(target));
  const Tensor inv_sup = diff::make_tensor(1, 3, {1.0 / sup[0], 1.0 / sup[1], 1.0 / sup[2]});

  for (std::size_t s = 0; s < steps; ++s) {
    Tape tape;
    const auto w = weight_tensors(f.weights, true);
    const Tensor out = field_forward(tape, f, w, positions, qn);
    const Tensor err = tape.mul(tape.sub(out, targets), inv_sup);
    const Tensor loss = tape.mean(tape.mul(err, err));
    tape.backward(loss);
    for (const Tensor& t : w)
      if (!t->has_grad()) t->grad.assign(t->size(), 0.0);
    adam_step(w, f.adam);
    auto blocks = f.weights.blocks();
    for (std::size_t i = 0; i < blocks.size(); ++i) *blocks[i] = w[i]->value;
    f.last_train_loss = loss->value[0];
    ++f.train_steps;
    if (!std::isfinite(f.last_train_loss) || !f.weights.all_finite())
      throw NumericError("lean_neof: non-finite training loss");
  }
  return f;
}

double field_fit_error(const ObservationField& field, const VoxelGrid& grid, const ObservationAttributes& attrs) {
  FieldQueryBatch batch{grid.centers(), grid.normals()};
  const auto out = field.query(batch);
  const auto sup = field.sup();
  double acc = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto row = attrs.row(j);
    for (int a = 0; a < 3; ++a) {
      const double e = (out[j][a] - row[a]) / sup[a];
      acc += e * e;
    }
  }
  return acc / static_cast<double>(3 * out.size());
}

CameraCapture capture_camera(const CameraPose& pose, const VoxelGrid& grid, const std::vector<std::size_t>& visible,
                             std::size_t max_queries) {
  CameraCapture cap;
  cap.visible_count = visible.size();
  if (visible.empty()) return cap;
  const Mat3 rt = pose.rotation().transpose();
  for (std::size_t t : strided_subset(visible.size(), max_queries)) {
    const Voxel& v = grid.voxels.at(visible[t]);
    cap.voxels.push_back(visible[t]);
    cap.local_points.push_back(rt * (v.center - pose.position));
    cap.normals.push_back(v.normal);
  }
  cap.weight = static_cast<double>(visible.size()) / static_cast<double>(cap.voxels.size());
  return cap;
}

PlacementCapture capture_views(const CameraRig& rig, const VoxelGrid& grid,
                               const std::vector<std::vector<std::size_t>>& visible, std::size_t max_queries) {
  if (visible.size() != rig.size()) throw InvalidArgument("capture_views: one visible set per camera required");
  PlacementCapture cap;
  cap.voxel_count = grid.size();
  cap.planar = grid.mode == SceneMode::planar2d;
  for (std::size_t i = 0; i < rig.size(); ++i)
    cap.cameras.push_back(capture_camera(rig.poses[i], grid, visible[i], max_queries));
  return cap;
}

PlacementLoss placement_loss(const ObservationField& field, const CameraRig& rig, const PlacementCapture& capture,
                             const LossWeights& lw, bool field_gradients, bool pose_gradients) {
  const std::size_t k = rig.size();
  if (k == 0) throw InvalidArgument("placement_loss: empty rig");
  if (capture.cameras.size() != k) throw InvalidArgument("placement_loss: capture does not match rig");
  if (capture.voxel_count == 0) throw InvalidArgument("placement_loss: zero voxel count");
  const auto sup = field.sup();
  const auto wv = lw.as_array();
  const double n = static_cast<double>(capture.voxel_count);

  PlacementLoss res;
  res.contributions.assign(k, 0.0);
  res.mass.assign(k, 0.0);
  res.pose_grad.assign(k, {});
  res.grad_norms.assign(k, 0.0);
  res.empty_view.assign(k, 0);

  Tape tape;
  std::vector<Tensor> leaves;  // position, forward_hint, right_hint per camera
  std::vector<Tensor> parts;
  std::vector<Vec3> normals;
  std::vector<double> qweights;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < k; ++i) {
    const CameraPose& pose = rig.poses[i];
    leaves.push_back(diff::row_vector(pose.position, pose_gradients));
    leaves.push_back(diff::row_vector(pose.forward_hint, pose_gradients));
    leaves.push_back(diff::row_vector(pose.right_hint, pose_gradients));
    const CameraCapture& cc = capture.cameras[i];
    if (cc.local_points.empty()) {
      res.empty_view[i] = 1;
      continue;
    }
    const Tensor &p = leaves[3 * i], &a = leaves[3 * i + 1], &b = leaves[3 * i + 2];
    const Tensor f = tape.normalize_rows(a);
    const Tensor r = tape.normalize_rows(tape.sub(b, tape.mul(f, tape.sum_over_cols(tape.mul(f, b)))));
    const Tensor y = tape.cross_rows(f, r);
    const Tensor rot_rows = tape.concat_rows({r, y, f});
    parts.push_back(tape.add(tape.matmul(points_tensor(cc.local_points), rot_rows), p));
    normals.insert(normals.end(), cc.normals.begin(), cc.normals.end());
    qweights.insert(qweights.end(), cc.local_points.size(), cc.weight);
    owner.insert(owner.end(), cc.local_points.size(), i);
  }

  std::array<double, 3> base{};
  for (int c = 0; c < 3; ++c) base[c] = wv[c] * sup[c];
  const double base_sum = base[0] + base[1] + base[2];
  if (parts.empty()) {
    res.components = sup;
    res.L = base_sum;
    std::fill(res.contributions.begin(), res.contributions.end(), base_sum);
    if (field_gradients)
      for (const auto* blk : field.weights.blocks()) res.field_grad.emplace_back(blk->size(), 0.0);
    return res;
  }

  const auto w = weight_tensors(field.weights, field_gradients);
  const Tensor x = tape.concat_rows(parts);
  const Tensor out = field_forward(tape, field, w, x, normals);

  std::vector<std::array<double, 3>> per_cam(k, {0.0, 0.0, 0.0});
  for (std::size_t t = 0; t < owner.size(); ++t)
    for (int c = 0; c < 3; ++c) per_cam[owner[t]][c] += qweights[t] * out->at(t, c);
  for (std::size_t i = 0; i < k; ++i) {
    const double seen = static_cast<double>(capture.cameras[i].visible_count);
    res.contributions[i] = base_sum;
    for (int c = 0; c < 3; ++c) {
      res.mass[i] += wv[c] * per_cam[i][c];
      if (seen > 0.0) res.contributions[i] -= wv[c] * per_cam[i][c] / seen;
    }
  }

  const Tensor qw = diff::make_tensor(qweights.size(), 1, qweights);
  const Tensor totals = tape.sum_over_rows(tape.mul(out, qw));
  const Tensor comps = tape.add(tape.scale(totals, -1.0 / (static_cast<double>(k) * n)),
                                diff::make_tensor(1, 3, {sup[0], sup[1], sup[2]}));
  const Tensor loss = tape.sum(tape.mul(comps, diff::make_tensor(1, 3, {wv[0], wv[1], wv[2]})));
  for (int c = 0; c < 3; ++c) res.components[c] = comps->value[c];
  res.L = loss->value[0];
  if (!std::isfinite(res.L)) throw NumericError("placement_loss: non-finite loss");

  if (pose_gradients || field_gradients) {
    tape.backward(loss);
    for (std::size_t i = 0; i < k; ++i) {
      double sq = 0.0;
      for (int part = 0; part < 3; ++part) {
        const Tensor& leaf = leaves[3 * i + part];
        for (int a = 0; a < 3; ++a) {
          double g = leaf->has_grad() ? leaf->grad[a] : 0.0;
          if (capture.planar && a == 2) g = 0.0;
          res.pose_grad[i][3 * part + a] = g;
          sq += g * g;
        }
      }
      res.grad_norms[i] = std::sqrt(sq);
    }
    if (field_gradients)
      for (const Tensor& t : w) res.field_grad.push_back(t->has_grad() ? t->grad : std::vector<double>(t->size(), 0.0));
  }
  return res;
}

CameraTerm camera_term(const ObservationField& field, const CameraPose& pose, const CameraCapture& cap,
                       const LossWeights& lw) {
  const auto sup = field.sup();
  const auto wv = lw.as_array();
  CameraTerm term;
  for (int c = 0; c < 3; ++c) term.contribution += wv[c] * sup[c];
  if (cap.local_points.empty()) return term;
  const Mat3 r = pose.rotation();
  FieldQueryBatch batch;
  for (const Vec3& l : cap.local_points) batch.positions.push_back(r * l + pose.position);
  batch.normals = cap.normals;
  for (const auto& o : field.query(batch))
    for (int c = 0; c < 3; ++c) term.mass += wv[c] * cap.weight * o[c];
  term.contribution -= term.mass / static_cast<double>(cap.visible_count);
  return term;
}

// Blob layout: "NEOF", u32 version, u32 section count, then per section
// u32 name length, name bytes, u64 value count, little-endian f64 values.
namespace {

constexpr std::uint32_t kBlobVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw IoError("field blob: truncated");
  }
  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
    pos += static_cast<std::size_t>(width);
    return v;
  }
};

std::vector<double> vec3s(const std::vector<Vec3>& v) {
  std::vector<double> out;
  for (const Vec3& p : v) out.insert(out.end(), {p.x(), p.y(), p.z()});
  return out;
}

std::vector<Vec3> to_vec3s(const std::vector<double>& v) {
  if (v.size() % 3) throw IoError("field blob: malformed point section");
  std::vector<Vec3> out(v.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Vec3(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
  return out;
}

const char* const kWeightNames[7] = {"w1_pos", "w1_nrm", "b1", "w2", "b2", "wq", "wk"};

}  // namespace

std::vector<std::uint8_t> serialize_field(const ObservationField& f) {
  std::vector<std::pair<std::string, std::vector<double>>> sections;
  const auto& c = f.config;
  sections.emplace_back("meta", std::vector<double>{
      static_cast<double>(c.hidden), static_cast<double>(c.key_dim), static_cast<double>(f.K),
      static_cast<double>(f.voxel_count), f.mode == SceneMode::planar2d ? 1.0 : 0.0, f.scale,
      f.center.x(), f.center.y(), f.center.z(), static_cast<double>(f.train_steps), f.last_train_loss,
      static_cast<double>(c.seed >> 32), static_cast<double>(c.seed & 0xFFFFFFFFULL),
      static_cast<double>(c.initial_steps), static_cast<double>(c.finetune_steps),
      static_cast<double>(c.max_train_queries), static_cast<double>(c.max_keys), c.schedule.initial,
      c.schedule.decay, static_cast<double>(c.schedule.interval), c.init_sharpness, c.init_noise});
  const auto blocks = f.weights.blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i) sections.emplace_back(kWeightNames[i], *blocks[i]);
  sections.emplace_back("key_positions", vec3s(f.key_positions));
  sections.emplace_back("key_normals", vec3s(f.key_normals));
  std::vector<double> attrs;
  for (const auto& a : f.key_attributes) attrs.insert(attrs.end(), a.begin(), a.end());
  sections.emplace_back("key_attributes", std::move(attrs));

  std::vector<std::uint8_t> out = {'N', 'E', 'O', 'F'};
  put_u32(out, kBlobVersion);
  put_u32(out, static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, values] : sections) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u64(out, values.size());
    for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

ObservationField deserialize_field(const std::vector<std::uint8_t>& bytes) {
  Reader rd{bytes};
  rd.need(4);
  if (std::memcmp(bytes.data(), "NEOF", 4) != 0) throw IoError("field blob: bad magic");
  rd.pos = 4;
  if (rd.uint(4) != kBlobVersion) throw IoError("field blob: unsupported version");
  const std::size_t count = rd.uint(4);
  std::map<std::string, std::vector<double>> sections;
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t len = rd.uint(4);
    rd.need(len);
    std::string name(bytes.begin() + static_cast<std::ptrdiff_t>(rd.pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(rd.pos + len));
    rd.pos += len;
    const std::uint64_t n = rd.uint(8);
    if (n > (bytes.size() - rd.pos) / 8) throw IoError("field blob: truncated section " + name);
    std::vector<double> values(n);
    for (auto& v : values) v = std::bit_cast<double>(rd.uint(8));
    sections[name] = std::move(values);
  }
  auto get = [&](const std::string& name) -> const std::vector<double>& {
    const auto it = sections.find(name);
    if (it == sections.end()) throw IoError("field blob: missing section " + name);
    return it->second;
  };
  const auto& meta = get("meta");
  if (meta.size() < 22) throw IoError("field blob: short meta section");
  ObservationField f;
  auto& c = f.config;
  c.hidden = static_cast<std::size_t>(meta[0]);
  c.key_dim = static_cast<std::size_t>(meta[1]);
  f.K = static_cast<int>(meta[2]);
  f.voxel_count = static_cast<std::size_t>(meta[3]);
  f.mode = meta[4] != 0.0 ? SceneMode::planar2d : SceneMode::volumetric3d;
  f.scale = meta[5];
  f.center = Vec3(meta[6], meta[7], meta[8]);
  f.train_steps = static_cast<std::size_t>(meta[9]);
  f.last_train_loss = meta[10];
  c.seed = (static_cast<std::uint64_t>(meta[11]) << 32) | static_cast<std::uint64_t>(meta[12]);
  c.initial_steps = static_cast<std::size_t>(meta[13]);
  c.finetune_steps = static_cast<std::size_t>(meta[14]);
  c.max_train_queries = static_cast<std::size_t>(meta[15]);
  c.max_keys = static_cast<std::size_t>(meta[16]);
  c.schedule.initial = meta[17];
  c.schedule.decay = meta[18];
  c.schedule.interval = static_cast<std::size_t>(meta[19]);
  c.init_sharpness = meta[20];
  c.init_noise = meta[21];
  f.adam.schedule = c.schedule;
  auto blocks = f.weights.blocks();
  const std::size_t h = c.hidden, dk = c.key_dim;
  const std::size_t expect[7] = {3 * h, 3 * h, h, h * h, h, h * dk, h * dk};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    *blocks[i] = get(kWeightNames[i]);
    if (blocks[i]->size() != expect[i]) throw IoError(std::string("field blob: bad size for ") + kWeightNames[i]);
  }
  f.key_positions = to_vec3s(get("key_positions"));
  f.key_normals = to_vec3s(get("key_normals"));
  const auto& attrs = get("key_attributes");
  if (attrs.size() != 3 * f.key_positions.size() || f.key_normals.size() != f.key_positions.size())
    throw IoError("field blob: inconsistent key sections");
  for (std::size_t j = 0; j < f.key_positions.size(); ++j)
    f.key_attributes.push_back({attrs[3 * j], attrs[3 * j + 1], attrs[3 * j + 2]});
  return f;
}

}  // namespace neofcam
