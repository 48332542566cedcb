#include "neofcam/hybrid.hpp"

#include "neofcam/hull.hpp"
#include "neofcam/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace neofcam {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void constrain_pose(CameraPose& pose, bool planar) {
  if (planar) {
    pose.position.z() = 0.0;
    Vec3 f(pose.forward_hint.x(), pose.forward_hint.y(), 0.0);
    if (f.norm() < 1e-12) f = Vec3::UnitX();
    f.normalize();
    pose.forward_hint = f;
    pose.right_hint = Vec3(f.y(), -f.x(), 0.0);
  } else {
    pose.orthonormalize();
  }
}

double scaled_grad_norm(const std::array<double, 9>& g, double diag) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) s += (diag * g[a]) * (diag * g[a]);
  for (int a = 3; a < 9; ++a) s += g[a] * g[a];
  return std::sqrt(s);
}

// First-order bound on the loss change one Adam step of this camera can
// cause (Adam moves each coordinate by at most about lr).
double step_loss_bound(const std::array<double, 9>& g, double diag, double lr) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) s += std::abs(diag * g[a]);
  for (int a = 3; a < 9; ++a) s += std::abs(g[a]);
  return lr * s;
}

double grid_diagonal(const VoxelGrid& grid) {
  Vec3 lo = grid.voxels[0].center, hi = lo;
  for (const Voxel& v : grid.voxels) {
    lo = lo.cwiseMin(v.center);
    hi = hi.cwiseMax(v.center);
  }
  return std::max((hi - lo).norm(), grid.resolution);
}

TraceEntry snapshot(std::size_t iter, const char* phase, const CameraRig& rig, const VoxelGrid& grid,
                    const Analysis& an, const ObservationField& field, const OptimizerConfig& cfg, double wall_ms) {
  TraceEntry e;
  e.iter = iter;
  e.phase = phase;
  const auto cap = capture_views(rig, grid, an.visible, cfg.max_queries_per_camera);
  const auto pl = placement_loss(field, rig, cap, cfg.weights, false, false);
  e.L = pl.L;
  e.components = pl.components;
  const auto rep = evaluate_coverage(rig, grid, an.coverage, cfg.K, cfg.uc_mode);
  e.uc = rep.uc;
  e.angle_quality = rep.angle_quality;
  e.wall_ms = wall_ms;
  e.poses = rig.poses;
  return e;
}

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::hybrid: return "hybrid";
    case Strategy::grad_only: return "grad_only";
    case Strategy::non_grad_only: return "non_grad_only";
  }
  return "hybrid";
}

Strategy strategy_from_string(const std::string& text) {
  if (text == "hybrid") return Strategy::hybrid;
  if (text == "grad_only") return Strategy::grad_only;
  if (text == "non_grad_only") return Strategy::non_grad_only;
  throw ConfigError("unknown strategy '" + text + "'");
}

void OptimizerConfig::validate() const {
  K.validate();
  if (!(eps_loss > 0.0) || !(eps_step > 0.0) || !(eps_grad > 0.0))
    throw ConfigError("optimizer tolerances must be positive");
  if (m < 1) throw ConfigError("optimizer m must be >= 1");
  if (weights.vis < 0.0 || weights.cc < 0.0 || weights.co < 0.0) throw ConfigError("loss weights must be >= 0");
  if (!(large_loss_factor > 0.0)) throw ConfigError("large_loss_factor must be positive");
  if (resolution < 0.0) throw ConfigError("resolution must be >= 0");
  if (intrinsics) intrinsics->validate();
}

Analysis analyze(const CameraRig& rig, const VoxelGrid& grid, const OptimizerConfig& cfg) {
  Analysis an;
  an.visible = visible_sets(rig, grid, cfg.visibility);
  an.coverage = coverage_from_sets(an.visible, grid.size());
  an.attributes = attributes_from_coverage(an.coverage, rig, grid, cfg.K);
  return an;
}

CameraRig initialize(const TargetScene& scene, std::size_t k, std::uint64_t seed, const CameraIntrinsics& intrinsics) {
  if (k < 1) throw InvalidArgument("initialize: k must be >= 1");
  intrinsics.validate();
  if (!(scene.bounds.diagonal() > 0.0)) throw GeometryError("initialize: degenerate scene bounds");
  const bool planar = scene.mode == SceneMode::planar2d;
  const Aabb box = scene.bounds.inflated(1.5);

  std::vector<Vec2> polygon;
  Hull3 hull;
  if (planar) {
    std::vector<Vec2> flat(scene.size());
    for (std::size_t i = 0; i < scene.size(); ++i) flat[i] = scene.points[i].head<2>();
    for (std::size_t idx : convex_hull_2d(flat)) polygon.push_back(flat[idx]);
  } else {
    hull = convex_hull_3d(scene.points);
  }

  Rng rng(seed);
  CameraRig rig;
  rig.intrinsics = intrinsics;
  for (std::size_t i = 0; i < k; ++i) {
    Vec3 p;
    bool ok = false;
    for (int attempt = 0; attempt < 10000 && !ok; ++attempt) {
      for (int a = 0; a < 3; ++a) p[a] = uniform(rng, box.min[a], box.max[a]);
      if (planar) {
        p.z() = 0.0;
        ok = !convex_polygon_contains_strictly(polygon, p.head<2>());
      } else {
        ok = !hull.contains_strictly(p);
      }
    }
    if (!ok) throw GeometryError("initialize: rejection sampling exceeded 10000 tries");
    if (planar)
      rig.poses.push_back(CameraPose::planar(p.head<2>(), uniform(rng, 0.0, 2.0 * kPi)));
    else
      rig.poses.push_back(CameraPose::from_rotation(p, random_rotation(rng)));
  }
  return rig;
}

PoseOptimizer::PoseOptimizer(const LearningRateSchedule& schedule, std::size_t cameras, double diag) {
  adam.schedule = schedule;
  position_scale = diag;
  adam.lr_scale.assign(3 * cameras, 1.0);
  for (std::size_t i = 0; i < cameras; ++i) adam.lr_scale[3 * i] = diag;
}

void PoseOptimizer::reset_camera(std::size_t camera) {
  for (std::size_t s = 0; s < 3; ++s) adam.reset_slot(3 * camera + s);
}

GradPhaseResult grad_phase(CameraRig& rig, const ObservationField& field, const VoxelGrid& grid,
                           const std::vector<std::vector<std::size_t>>& visible, const OptimizerConfig& cfg,
                           PoseOptimizer& opt) {
  const bool planar = grid.mode == SceneMode::planar2d;
  const std::size_t k = rig.size();
  const auto capture = capture_views(rig, grid, visible, cfg.max_queries_per_camera);
  PlacementLoss pl = placement_loss(field, rig, capture, cfg.weights);
  GradPhaseResult res;
  res.L_before = pl.L;

  for (std::size_t step = 0; step < cfg.inner_step_cap; ++step) {
    bool any = false;
    for (const auto& g : pl.pose_grad)
      for (double x : g) any = any || x != 0.0;
    if (!any) break;

    std::vector<diff::Tensor> params;
    for (std::size_t i = 0; i < k; ++i) {
      const CameraPose& pose = rig.poses[i];
      const Vec3* parts[3] = {&pose.position, &pose.forward_hint, &pose.right_hint};
      for (int part = 0; part < 3; ++part) {
        auto t = diff::row_vector(*parts[part], true);
        t->grad.assign(pl.pose_grad[i].begin() + 3 * part, pl.pose_grad[i].begin() + 3 * part + 3);
        params.push_back(t);
      }
    }
    adam_step(params, opt.adam);
    CameraRig next = rig;
    for (std::size_t i = 0; i < k; ++i) {
      CameraPose& pose = next.poses[i];
      for (int a = 0; a < 3; ++a) {
        pose.position[a] = params[3 * i]->value[a];
        pose.forward_hint[a] = params[3 * i + 1]->value[a];
        pose.right_hint[a] = params[3 * i + 2]->value[a];
      }
      constrain_pose(pose, planar);
    }
    PlacementLoss nl = placement_loss(field, next, capture, cfg.weights);
    if (!std::isfinite(nl.L)) throw NumericError("grad_phase: non-finite loss");
    ++res.steps;
    if (nl.L > pl.L) {
      res.rejected_last = true;
      break;
    }
    const double delta = pl.L - nl.L;
    rig = std::move(next);
    pl = std::move(nl);
    if (delta < cfg.eps_loss) break;
  }
  res.L_after = pl.L;
  res.contributions = pl.contributions;
  res.empty_view = pl.empty_view;
  res.grad_norms.resize(k);
  for (std::size_t i = 0; i < k; ++i) res.grad_norms[i] = scaled_grad_norm(pl.pose_grad[i], opt.position_scale);
  return res;
}

std::vector<CameraPose> candidate_poses(const VoxelGrid& grid, const ObservationAttributes& attrs,
                                        const CameraIntrinsics& intrinsics, std::size_t m, const LossWeights& lw) {
  const std::size_t n = grid.size();
  if (n == 0 || m == 0) return {};
  const bool planar = grid.mode == SceneMode::planar2d;
  std::vector<double> w(attrs.c);
  if (std::all_of(w.begin(), w.end(), [](double x) { return x <= 0.0; })) {
    const auto sup = attribute_sup(attrs.K);
    const auto wv = lw.as_array();
    for (std::size_t j = 0; j < n; ++j) {
      const auto o = attrs.row(j);
      w[j] = 1e-12;
      for (int c = 0; c < 3; ++c) w[j] += wv[c] * o[c] / sup[c];
    }
  }

  // greedy farthest-point seeding weighted by need
  std::vector<std::size_t> seeds;
  std::size_t first = 0;
  for (std::size_t j = 1; j < n; ++j)
    if (w[j] > w[first]) first = j;
  seeds.push_back(first);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  while (seeds.size() < m) {
    const Vec3& s = grid.voxels[seeds.back()].center;
    for (std::size_t j = 0; j < n; ++j) dist[j] = std::min(dist[j], (grid.voxels[j].center - s).norm());
    std::size_t best = n;
    double best_score = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double score = w[j] * dist[j];
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    if (best == n) break;
    seeds.push_back(best);
  }

  std::vector<Vec3> centroid(seeds.size(), Vec3::Zero()), normal(seeds.size(), Vec3::Zero());
  std::vector<double> mass(seeds.size(), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (!(w[j] > 0.0)) continue;
    std::size_t r = 0;
    double dr = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const double d = (grid.voxels[j].center - grid.voxels[seeds[s]].center).norm();
      if (d < dr) {
        dr = d;
        r = s;
      }
    }
    centroid[r] += w[j] * grid.voxels[j].center;
    normal[r] += w[j] * grid.voxels[j].normal;
    mass[r] += w[j];
  }

  const double standoff = 0.5 * (intrinsics.near + intrinsics.far);
  std::vector<CameraPose> out;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const Voxel& seed = grid.voxels[seeds[s]];
    const Vec3 c = mass[s] > 0.0 ? Vec3(centroid[s] / mass[s]) : seed.center;
    Vec3 nrm = normal[s];
    if (planar) nrm.z() = 0.0;
    if (nrm.norm() < 1e-9) nrm = seed.normal;
    nrm.normalize();
    const Vec3 pos = c + standoff * nrm;
    if (planar)
      out.push_back(CameraPose::planar(pos.head<2>(), std::atan2(-nrm.y(), -nrm.x())));
    else
      out.push_back(CameraPose::looking_along(pos, -nrm));
  }
  return out;
}

NonGradResult non_grad_phase(CameraRig& rig, ObservationField& field, const VoxelGrid& grid, Analysis& an,
                             const OptimizerConfig& cfg, bool waive, PoseOptimizer* opt) {
  NonGradResult res;
  const std::size_t k = rig.size();
  const std::size_t cap = cfg.max_commits_per_phase ? cfg.max_commits_per_phase : 2 * k;
  const double diag = opt ? opt->position_scale : grid_diagonal(grid);
  const double lr = opt ? opt->adam.schedule.at(opt->adam.step) : cfg.pose_schedule.initial;
  const std::size_t n = grid.size();

  while (res.commits.size() < cap) {
    const auto capture = capture_views(rig, grid, an.visible, cfg.max_queries_per_camera);
    const PlacementLoss pl = placement_loss(field, rig, capture, cfg.weights, false, !waive);
    const double mean = std::accumulate(pl.contributions.begin(), pl.contributions.end(), 0.0) / static_cast<double>(k);

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < k; ++i) {
      const bool small_grad = waive || step_loss_bound(pl.pose_grad[i], diag, lr) < cfg.eps_grad;
      if (pl.empty_view[i] || (small_grad && pl.contributions[i] > cfg.large_loss_factor * mean))
        candidates.push_back(i);
    }
    if (candidates.empty()) break;
    std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
      return pl.contributions[a] > pl.contributions[b];
    });

    const auto proposals = candidate_poses(grid, an.attributes, rig.intrinsics, cfg.m, cfg.weights);
    std::vector<double> proposal_mass(proposals.size());
    for (std::size_t p = 0; p < proposals.size(); ++p) {
      const auto vis = visible_set(proposals[p], rig.intrinsics, grid, cfg.visibility);
      const auto cc = capture_camera(proposals[p], grid, vis, cfg.max_queries_per_camera);
      proposal_mass[p] = camera_term(field, proposals[p], cc, cfg.weights).mass;
    }

    bool committed = false;
    for (std::size_t i : candidates) {
      double best_L = pl.L;
      std::size_t best = proposals.size();
      for (std::size_t p = 0; p < proposals.size(); ++p) {
        const double L_new = pl.L - (proposal_mass[p] - pl.mass[i]) / (static_cast<double>(k) * static_cast<double>(n));
        if (L_new < best_L) {
          best_L = L_new;
          best = p;
        }
      }
      if (best == proposals.size()) continue;
      rig.poses[i] = proposals[best];
      res.commits.push_back({i, pl.L, best_L});
      if (opt) opt->reset_camera(i);
      an = analyze(rig, grid, cfg);
      field = lean_neof(std::move(field), grid, an.attributes);
      committed = true;
      break;
    }
    if (!committed) break;
  }
  return res;
}

double check_step_update(const CameraRig& before, const CameraRig& after, double diag) {
  if (before.size() != after.size()) throw InvalidArgument("check_step_update: camera count changed");
  double worst = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double dp = (after.poses[i].position - before.poses[i].position).norm() / diag;
    const double dr = rotation_angle_between(before.poses[i].rotation(), after.poses[i].rotation());
    worst = std::max(worst, dp + dr);
  }
  return worst;
}

OptimizationResult optimize(const TargetScene& scene, std::size_t k, const OptimizerConfig& cfg) {
  cfg.validate();
  validate_scene(scene);
  OptimizationResult out;
  const double res = cfg.resolution > 0.0 ? cfg.resolution : default_resolution(scene);
  out.grid = voxelize(scene, res);
  const VoxelGrid& grid = out.grid;
  const double diag = scene.bounds.diagonal();
  const CameraIntrinsics intr = cfg.intrinsics ? *cfg.intrinsics : default_intrinsics_for(scene);

  auto t0 = Clock::now();
  CameraRig rig = initialize(scene, k, cfg.seed, intr);
  Analysis an = analyze(rig, grid, cfg);
  FieldConfig fc = cfg.field;
  fc.seed = derive_seed(cfg.seed, 0xF1E1D5EEDULL);
  ObservationField field = lean_neof(std::nullopt, grid, an.attributes, std::nullopt, fc);
  out.initial = evaluate_coverage(rig, grid, an.coverage, cfg.K, cfg.uc_mode);
  out.trace.entries.push_back(snapshot(0, "init", rig, grid, an, field, cfg, ms_since(t0)));
  double L_prev = out.trace.entries.back().L;

  PoseOptimizer opt(cfg.pose_schedule, k, diag);
  out.trace.stop_reason = "max_iterations";
  for (std::size_t t = 1; t <= cfg.max_outer_iterations; ++t) {
    const CameraRig prev = rig;
    bool stalled = true;
    if (cfg.strategy != Strategy::non_grad_only) {
      t0 = Clock::now();
      grad_phase(rig, field, grid, an.visible, cfg, opt);
      an = analyze(rig, grid, cfg);
      field = lean_neof(std::move(field), grid, an.attributes);
      out.trace.entries.push_back(snapshot(t, "grad", rig, grid, an, field, cfg, ms_since(t0)));
      const double L_now = out.trace.entries.back().L;
      stalled = std::abs(L_prev - L_now) < cfg.eps_loss;
      L_prev = L_now;
    }
    if (cfg.strategy != Strategy::grad_only && stalled) {
      t0 = Clock::now();
      const bool waive = cfg.strategy == Strategy::non_grad_only;
      NonGradResult ng = non_grad_phase(rig, field, grid, an, cfg, waive, &opt);
      if (!ng.commits.empty())
        field = lean_neof(std::move(field), grid, an.attributes, 2 * field.config.finetune_steps);
      TraceEntry e = snapshot(t, "non_grad", rig, grid, an, field, cfg, ms_since(t0));
      e.commits = std::move(ng.commits);
      out.trace.entries.push_back(std::move(e));
      L_prev = out.trace.entries.back().L;
    }
    out.trace.outer_iterations = t;
    if (check_step_update(prev, rig, diag) < cfg.eps_step) {
      out.trace.stop_reason = "step_tolerance";
      break;
    }
  }
  out.final = evaluate_coverage(rig, grid, an.coverage, cfg.K, cfg.uc_mode);
  out.rig = std::move(rig);
  return out;
}

}  // namespace neofcam
