#include "neofcam/experiment.hpp"

#include "neofcam/metrics.hpp"
#include "neofcam/point_io.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace neofcam {
namespace {

using json = nlohmann::ordered_json;

// Path-aware accessors so config errors point at the offending field.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  void only(std::initializer_list<const char*> keys) const {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!allowed.count(it.key())) fail(at(it.key()), "unknown field");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& raw(const char* key) const { return j_.at(key); }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const char* key, double def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(at(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(at(key), "must be finite");
    return x;
  }
  std::uint64_t count(const char* key, std::uint64_t def) const {
    if (!has(key)) return def;
    return as_count(j_.at(key), at(key));
  }
  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_boolean()) fail(at(key), "expected true or false");
    return j_.at(key).get<bool>();
  }
  std::string text(const char* key, const std::string& def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_string()) fail(at(key), "expected a string");
    return j_.at(key).get<std::string>();
  }
  Vec3 vec(const char* key, const Vec3& def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() < 2 || v.size() > 3) fail(at(key), "expected [x, y] or [x, y, z]");
    Vec3 out = Vec3::Zero();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(at(key), "expected numbers");
      out[static_cast<int>(i)] = v[i].get<double>();
    }
    return out;
  }
  Obj child(const char* key) const { return Obj(j_.at(key), at(key)); }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
  }
  static std::uint64_t as_count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      fail(path, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

 private:
  const json& j_;
  std::string path_;
};

template <class E, class F>
E enum_field(const Obj& o, const char* key, E def, F&& parse) {
  if (!o.has(key)) return def;
  const std::string t = o.text(key, "");
  try {
    return parse(t);
  } catch (const Error& e) {
    Obj::fail(o.at(key), e.what());
  }
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

ShapeSpec parse_shape(const Obj& o) {
  o.only({"kind", "size", "center", "rotation", "components", "samples", "seed", "path"});
  ShapeSpec s;
  s.kind = enum_field(o, "kind", ShapeKind::circle, shape_kind_from_string);
  s.size = o.number("size", 1.0);
  s.center = o.vec("center", Vec3::Zero()).head<2>();
  s.rotation = o.number("rotation", 0.0);
  s.sample_count = o.count("samples", 256);
  s.seed = o.count("seed", 0);
  s.path = o.text("path", "");
  if (o.has("components")) {
    const json& arr = o.raw("components");
    if (!arr.is_array()) Obj::fail(o.at("components"), "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      s.components.push_back(parse_shape(Obj(arr[i], o.at("components") + "[" + std::to_string(i) + "]")));
  }
  return s;
}

json shape_json(const ShapeSpec& s) {
  json j;
  j["kind"] = to_string(s.kind);
  j["size"] = s.size;
  j["center"] = json::array({s.center.x(), s.center.y()});
  j["rotation"] = s.rotation;
  j["samples"] = s.sample_count;
  j["seed"] = s.seed;
  if (!s.path.empty()) j["path"] = s.path;
  if (!s.components.empty()) {
    j["components"] = json::array();
    for (const auto& c : s.components) j["components"].push_back(shape_json(c));
  }
  return j;
}

SceneSource parse_scene(const Obj& o) {
  o.only({"generator", "path", "seed", "samples", "shape", "center", "radius", "half_extent", "major", "minor",
          "mesh_samples"});
  SceneSource s;
  s.generator = o.text("generator", "");
  s.path = o.text("path", "");
  if (s.generator.empty() == s.path.empty()) Obj::fail(o.at("generator"), "exactly one of generator / path is required");
  static const std::set<std::string> known{"random_composite", "shape", "sphere", "box", "torus"};
  if (!s.generator.empty() && !known.count(s.generator))
    Obj::fail(o.at("generator"), "unknown generator '" + s.generator + "'");
  s.seed = o.count("seed", 0);
  s.samples = o.count("samples", 320);
  if (o.has("shape")) s.shape = parse_shape(o.child("shape"));
  else if (s.generator == "shape") Obj::fail(o.at("shape"), "required for the shape generator");
  s.center = o.vec("center", Vec3::Zero());
  s.radius = o.number("radius", 1.0);
  s.half_extent = o.vec("half_extent", Vec3::Ones());
  s.major = o.number("major", 1.0);
  s.minor = o.number("minor", 0.3);
  s.mesh_samples = o.count("mesh_samples", 4096);
  return s;
}

json scene_json(const SceneSource& s) {
  json j;
  if (!s.path.empty()) {
    j["path"] = s.path;
    j["mesh_samples"] = s.mesh_samples;
    j["seed"] = s.seed;
    return j;
  }
  j["generator"] = s.generator;
  j["seed"] = s.seed;
  j["samples"] = s.samples;
  if (s.generator == "shape") j["shape"] = shape_json(s.shape);
  if (s.generator == "sphere" || s.generator == "box" || s.generator == "torus") j["center"] = vec3_json(s.center);
  if (s.generator == "sphere") j["radius"] = s.radius;
  if (s.generator == "box") j["half_extent"] = vec3_json(s.half_extent);
  if (s.generator == "torus") {
    j["major"] = s.major;
    j["minor"] = s.minor;
  }
  return j;
}

LearningRateSchedule parse_schedule(const Obj& o, const LearningRateSchedule& def) {
  o.only({"initial", "decay", "interval"});
  LearningRateSchedule s;
  s.initial = o.number("initial", def.initial);
  s.decay = o.number("decay", def.decay);
  s.interval = o.count("interval", def.interval);
  return s;
}

json schedule_json(const LearningRateSchedule& s) {
  return json{{"initial", s.initial}, {"decay", s.decay}, {"interval", s.interval}};
}

OptimizerConfig parse_optimizer_config(const Obj& o) {
  o.only({"weights", "eps_loss", "eps_step", "eps_grad", "m", "max_outer_iterations", "inner_step_cap",
          "large_loss_factor", "max_commits_per_phase", "pose_lr", "max_queries_per_camera", "field", "visibility"});
  OptimizerConfig c;
  if (o.has("weights")) {
    const Obj w = o.child("weights");
    w.only({"w_vis", "w_cc", "w_co"});
    c.weights.vis = w.number("w_vis", c.weights.vis);
    c.weights.cc = w.number("w_cc", c.weights.cc);
    c.weights.co = w.number("w_co", c.weights.co);
  }
  c.eps_loss = o.number("eps_loss", c.eps_loss);
  c.eps_step = o.number("eps_step", c.eps_step);
  c.eps_grad = o.number("eps_grad", c.eps_grad);
  c.m = o.count("m", c.m);
  c.max_outer_iterations = o.count("max_outer_iterations", c.max_outer_iterations);
  c.inner_step_cap = o.count("inner_step_cap", c.inner_step_cap);
  c.large_loss_factor = o.number("large_loss_factor", c.large_loss_factor);
  c.max_commits_per_phase = o.count("max_commits_per_phase", c.max_commits_per_phase);
  if (o.has("pose_lr")) c.pose_schedule = parse_schedule(o.child("pose_lr"), c.pose_schedule);
  c.max_queries_per_camera = o.count("max_queries_per_camera", c.max_queries_per_camera);
  if (o.has("field")) {
    const Obj f = o.child("field");
    f.only({"hidden", "key_dim", "initial_steps", "finetune_steps", "max_train_queries", "max_keys", "lr",
            "init_sharpness", "init_noise"});
    FieldConfig& fc = c.field;
    fc.hidden = f.count("hidden", fc.hidden);
    fc.key_dim = f.count("key_dim", fc.key_dim);
    fc.initial_steps = f.count("initial_steps", fc.initial_steps);
    fc.finetune_steps = f.count("finetune_steps", fc.finetune_steps);
    fc.max_train_queries = f.count("max_train_queries", fc.max_train_queries);
    fc.max_keys = f.count("max_keys", fc.max_keys);
    if (f.has("lr")) fc.schedule = parse_schedule(f.child("lr"), fc.schedule);
    fc.init_sharpness = f.number("init_sharpness", fc.init_sharpness);
    fc.init_noise = f.number("init_noise", fc.init_noise);
  }
  if (o.has("visibility")) {
    const Obj v = o.child("visibility");
    v.only({"hpr_gamma", "backface_culling"});
    c.visibility.hpr_gamma = v.number("hpr_gamma", c.visibility.hpr_gamma);
    c.visibility.backface_culling = v.boolean("backface_culling", c.visibility.backface_culling);
  }
  return c;
}

json optimizer_config_json(const OptimizerConfig& c) {
  json j;
  j["weights"] = json{{"w_vis", c.weights.vis}, {"w_cc", c.weights.cc}, {"w_co", c.weights.co}};
  j["eps_loss"] = c.eps_loss;
  j["eps_step"] = c.eps_step;
  j["eps_grad"] = c.eps_grad;
  j["m"] = c.m;
  j["max_outer_iterations"] = c.max_outer_iterations;
  j["inner_step_cap"] = c.inner_step_cap;
  j["large_loss_factor"] = c.large_loss_factor;
  j["max_commits_per_phase"] = c.max_commits_per_phase;
  j["pose_lr"] = schedule_json(c.pose_schedule);
  j["max_queries_per_camera"] = c.max_queries_per_camera;
  const FieldConfig& f = c.field;
  j["field"] = json{{"hidden", f.hidden},
                    {"key_dim", f.key_dim},
                    {"initial_steps", f.initial_steps},
                    {"finetune_steps", f.finetune_steps},
                    {"max_train_queries", f.max_train_queries},
                    {"max_keys", f.max_keys},
                    {"lr", schedule_json(f.schedule)},
                    {"init_sharpness", f.init_sharpness},
                    {"init_noise", f.init_noise}};
  j["visibility"] = json{{"hpr_gamma", c.visibility.hpr_gamma}, {"backface_culling", c.visibility.backface_culling}};
  return j;
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["scene"] = scene_json(c.scene);
  j["mode"] = to_string(c.mode);
  j["k"] = c.k;
  j["K"] = c.K;
  if (c.intrinsics)
    j["intrinsics"] = json{{"hfov", c.intrinsics->hfov},
                           {"vfov", c.intrinsics->vfov},
                           {"near", c.intrinsics->near},
                           {"far", c.intrinsics->far}};
  else
    j["intrinsics"] = nullptr;
  if (c.optimizer_is_list || c.optimizers.size() != 1) {
    j["optimizer"] = json::array();
    for (auto o : c.optimizers) j["optimizer"].push_back(to_string(o));
  } else {
    j["optimizer"] = to_string(c.optimizers.front());
  }
  j["optimizer_config"] = optimizer_config_json(c.optimizer_config);
  j["anneal"] = json{{"initial_temperature", c.anneal.initial_temperature},
                     {"cooling", c.anneal.cooling},
                     {"steps_per_temperature", c.anneal.steps_per_temperature},
                     {"position_sigma", c.anneal.position_sigma},
                     {"rotation_sigma", c.anneal.rotation_sigma},
                     {"final_temperature", c.anneal.final_temperature}};
  j["random_trials"] = c.random_trials;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["uc_mode"] = to_string(c.uc_mode);
  j["resolution"] = c.resolution;
  return j;
}

ExperimentConfig config_from_json(const json& root) {
  const Obj o(root, "");
  o.only({"scene", "mode", "k", "K", "intrinsics", "optimizer", "optimizer_config", "anneal", "random_trials",
          "seeds", "output_dir", "uc_mode", "resolution"});
  ExperimentConfig c;
  if (!o.has("scene")) Obj::fail("scene", "required");
  c.scene = parse_scene(o.child("scene"));
  c.mode = enum_field(o, "mode", c.mode, scene_mode_from_string);
  if (o.has("k")) {
    const json& v = o.raw("k");
    c.k.clear();
    if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) c.k.push_back(Obj::as_count(v[i], "k[" + std::to_string(i) + "]"));
    } else {
      c.k.push_back(Obj::as_count(v, "k"));
    }
  }
  c.K = static_cast<int>(o.count("K", 3));
  if (o.has("intrinsics")) {
    const Obj in = o.child("intrinsics");
    in.only({"hfov", "vfov", "near", "far"});
    CameraIntrinsics ci;
    ci.hfov = in.number("hfov", ci.hfov);
    ci.vfov = in.number("vfov", ci.vfov);
    ci.near = in.number("near", ci.near);
    ci.far = in.number("far", ci.far);
    c.intrinsics = ci;
  }
  if (o.has("optimizer")) {
    const json& v = o.raw("optimizer");
    c.optimizers.clear();
    auto one = [&](const json& x, const std::string& path) {
      if (!x.is_string()) Obj::fail(path, "expected an optimizer name");
      try {
        c.optimizers.push_back(optimizer_kind_from_string(x.get<std::string>()));
      } catch (const Error& e) {
        Obj::fail(path, e.what());
      }
    };
    if (v.is_array()) {
      c.optimizer_is_list = true;
      for (std::size_t i = 0; i < v.size(); ++i) one(v[i], "optimizer[" + std::to_string(i) + "]");
    } else {
      one(v, "optimizer");
    }
  }
  if (o.has("optimizer_config")) c.optimizer_config = parse_optimizer_config(o.child("optimizer_config"));
  if (o.has("anneal")) {
    const Obj a = o.child("anneal");
    a.only({"initial_temperature", "cooling", "steps_per_temperature", "position_sigma", "rotation_sigma",
            "final_temperature"});
    AnnealConfig& ac = c.anneal;
    ac.initial_temperature = a.number("initial_temperature", ac.initial_temperature);
    ac.cooling = a.number("cooling", ac.cooling);
    ac.steps_per_temperature = a.count("steps_per_temperature", ac.steps_per_temperature);
    ac.position_sigma = a.number("position_sigma", ac.position_sigma);
    ac.rotation_sigma = a.number("rotation_sigma", ac.rotation_sigma);
    ac.final_temperature = a.number("final_temperature", ac.final_temperature);
  }
  c.random_trials = o.count("random_trials", c.random_trials);
  if (o.has("seeds")) {
    const json& v = o.raw("seeds");
    if (!v.is_array()) Obj::fail("seeds", "expected an array");
    c.seeds.clear();
    for (std::size_t i = 0; i < v.size(); ++i) c.seeds.push_back(Obj::as_count(v[i], "seeds[" + std::to_string(i) + "]"));
  }
  c.output_dir = o.text("output_dir", c.output_dir);
  c.uc_mode = enum_field(o, "uc_mode", c.uc_mode, uc_mode_from_string);
  c.resolution = o.number("resolution", c.resolution);
  c.validate();
  return c;
}

json poses_json(const std::vector<CameraPose>& poses) {
  json arr = json::array();
  for (const CameraPose& p : poses) {
    const Mat3 r = p.rotation();
    arr.push_back(json{{"position", vec3_json(p.position)}, {"forward", vec3_json(r.col(2))}, {"right", vec3_json(r.col(0))}});
  }
  return arr;
}

json iteration_json(std::size_t iter, const std::string& phase, double L, const std::array<double, 3>* comps,
                    std::optional<double> uc, std::optional<double> aq, double wall_ms) {
  json e;
  e["iter"] = iter;
  e["phase"] = phase;
  e["L"] = L;
  e["L_vis"] = comps ? json((*comps)[0]) : json(nullptr);
  e["L_cc"] = comps ? json((*comps)[1]) : json(nullptr);
  e["L_co"] = comps ? json((*comps)[2]) : json(nullptr);
  e["uc"] = uc ? json(*uc) : json(nullptr);
  e["angle_quality"] = aq ? json(*aq) : json(nullptr);
  e["wall_ms"] = wall_ms;
  return e;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json run_cell(const ExperimentConfig& cfg, const TargetScene& scene, std::size_t k, std::uint64_t seed,
              OptimizerKind kind, CellResult& cell) {
  ExperimentConfig embedded = cfg;
  embedded.k = {k};
  embedded.seeds = {seed};
  embedded.optimizers = {kind};
  embedded.optimizer_is_list = false;

  const CameraIntrinsics intr = resolve_intrinsics(cfg, scene);
  json out;
  out["config"] = config_json(embedded);
  out["k"] = k;
  out["seed"] = seed;
  out["optimizer"] = to_string(kind);
  json iters = json::array();

  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  std::vector<CameraPose> final_poses;
  EvaluationReport init, fin;

  if (kind == OptimizerKind::hybrid || kind == OptimizerKind::grad_only || kind == OptimizerKind::non_grad_only) {
    OptimizerConfig oc = cfg.optimizer_config;
    oc.K.K = cfg.K;
    oc.uc_mode = cfg.uc_mode;
    oc.resolution = cfg.resolution;
    oc.intrinsics = intr;
    oc.seed = seed;
    oc.strategy = kind == OptimizerKind::hybrid      ? Strategy::hybrid
                  : kind == OptimizerKind::grad_only ? Strategy::grad_only
                                                     : Strategy::non_grad_only;
    const OptimizationResult r = optimize(scene, k, oc);
    for (const TraceEntry& e : r.trace.entries) {
      json it = iteration_json(e.iter, e.phase, e.L, &e.components, e.uc, e.angle_quality, e.wall_ms);
      if (!e.commits.empty()) {
        it["commits"] = json::array();
        for (const CommitRecord& c : e.commits)
          it["commits"].push_back(json{{"camera", c.camera}, {"L_before", c.L_before}, {"L_after", c.L_after}});
      }
      iters.push_back(std::move(it));
    }
    out["stop_reason"] = r.trace.stop_reason;
    final_poses = r.rig.poses;
    init = r.initial;
    fin = r.final;
  } else {
    const VoxelGrid grid = voxelize(scene, resolve_resolution(cfg, scene));
    EnergySettings es;
    es.K.K = cfg.K;
    es.w_vis = cfg.optimizer_config.weights.vis;
    es.uc_mode = cfg.uc_mode;
    es.visibility = cfg.optimizer_config.visibility;
    if (kind == OptimizerKind::sa) {
      AnnealConfig ac = cfg.anneal;
      ac.seed = seed;
      const AnnealResult r = simulated_annealing(scene, grid, k, intr, ac, es);
      iters.push_back(iteration_json(0, "init", r.initial_energy, nullptr, r.initial.uc, r.initial.angle_quality, 0.0));
      for (const AnnealTraceEntry& e : r.trace) {
        json it = iteration_json(e.level + 1, "anneal", e.energy, nullptr, std::nullopt, std::nullopt, 0.0);
        it["temperature"] = e.temperature;
        it["best_energy"] = e.best_energy;
        it["acceptance_rate"] = e.acceptance_rate;
        iters.push_back(std::move(it));
      }
      final_poses = r.rig.poses;
      init = r.initial;
      fin = r.final;
    } else {
      const RandomSearchResult r = random_search(scene, grid, k, cfg.random_trials, seed, intr, es);
      iters.push_back(iteration_json(0, "init", energy_of(r.initial, es.w_vis), nullptr, r.initial.uc,
                                     r.initial.angle_quality, 0.0));
      iters.push_back(iteration_json(1, "random", r.energy, nullptr, r.final.uc, r.final.angle_quality, 0.0));
      out["best_trial"] = r.best_trial;
      final_poses = r.rig.poses;
      init = r.initial;
      fin = r.final;
    }
    if (!iters.empty()) iters.back()["wall_ms"] = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  }

  out["per_iteration"] = std::move(iters);
  out["initial"] = json{{"uc", init.uc}, {"angle_quality", init.angle_quality}};
  out["final"] = json{{"uc", fin.uc}, {"angle_quality", fin.angle_quality}, {"poses", poses_json(final_poses)}};
  cell.initial_uc = init.uc;
  cell.uc = fin.uc;
  cell.angle_quality = fin.angle_quality;
  return out;
}

}  // namespace

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::hybrid: return "hybrid";
    case OptimizerKind::grad_only: return "grad_only";
    case OptimizerKind::non_grad_only: return "non_grad_only";
    case OptimizerKind::sa: return "sa";
    case OptimizerKind::random: return "random";
  }
  return "hybrid";
}

OptimizerKind optimizer_kind_from_string(const std::string& t) {
  if (t == "hybrid") return OptimizerKind::hybrid;
  if (t == "grad_only") return OptimizerKind::grad_only;
  if (t == "non_grad_only") return OptimizerKind::non_grad_only;
  if (t == "sa") return OptimizerKind::sa;
  if (t == "random") return OptimizerKind::random;
  throw ConfigError("unknown optimizer '" + t + "' (expected hybrid, grad_only, non_grad_only, sa or random)");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (k.empty()) throw ConfigError("k: at least one camera count is required");
  for (std::size_t i = 0; i < k.size(); ++i)
    if (k[i] < 1) throw ConfigError("k[" + std::to_string(i) + "]: must be >= 1");
  if (optimizers.empty()) throw ConfigError("optimizer: at least one optimizer is required");
  if (K < 1) throw ConfigError("K: must be >= 1");
  if (resolution < 0.0) throw ConfigError("resolution: must be >= 0");
  if (random_trials < 1) throw ConfigError("random_trials: must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  if (intrinsics) {
    try {
      intrinsics->validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("intrinsics: ") + e.what());
    }
  }
  try {
    OptimizerConfig oc = optimizer_config;
    oc.K.K = K;
    oc.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("optimizer_config: ") + e.what());
  }
  try {
    anneal.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("anneal: ") + e.what());
  }
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("<root>: invalid JSON: ") + e.what());
  }
  return config_from_json(root);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_experiment_config(text);
}

std::string serialize_experiment_config(const ExperimentConfig& c) { return config_json(c).dump(2) + "\n"; }

TargetScene build_scene(const ExperimentConfig& c) {
  const SceneSource& s = c.scene;
  if (!s.path.empty()) {
    LoadOptions lo;
    lo.mesh_samples = s.mesh_samples;
    lo.seed = s.seed;
    return load_scene(s.path, c.mode, lo);
  }
  if (s.generator == "random_composite" || s.generator == "shape") {
    if (c.mode != SceneMode::planar2d) throw ConfigError("scene.generator: '" + s.generator + "' requires mode planar2d");
    return generate_planar_shape(s.generator == "shape" ? s.shape : random_composite_spec(s.seed, s.samples));
  }
  if (c.mode != SceneMode::volumetric3d)
    throw ConfigError("scene.generator: '" + s.generator + "' requires mode volumetric3d");
  if (s.generator == "sphere") return sample_sphere(s.center, s.radius, s.samples, s.seed);
  if (s.generator == "box") return sample_box(s.center, s.half_extent, s.samples, s.seed);
  if (s.generator == "torus") return sample_torus(s.center, s.major, s.minor, s.samples, s.seed);
  throw ConfigError("scene.generator: unknown generator '" + s.generator + "'");
}

CameraIntrinsics resolve_intrinsics(const ExperimentConfig& c, const TargetScene& scene) {
  return c.intrinsics ? *c.intrinsics : default_intrinsics_for(scene);
}

double resolve_resolution(const ExperimentConfig& c, const TargetScene& scene) {
  return c.resolution > 0.0 ? c.resolution : default_resolution(scene);
}

bool RunSummary::ok() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok; });
}

std::string cell_file_name(std::size_t k, std::uint64_t seed, OptimizerKind kind) {
  return "cell_k" + std::to_string(k) + "_s" + std::to_string(seed) + "_" + to_string(kind) + ".json";
}

RunSummary run_experiment(const ExperimentConfig& cfg, std::size_t threads) {
  cfg.validate();
  const TargetScene scene = build_scene(cfg);
  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  RunSummary summary;
  for (std::size_t k : cfg.k)
    for (std::uint64_t seed : cfg.seeds)
      for (OptimizerKind kind : cfg.optimizers) {
        CellResult c;
        c.k = k;
        c.seed = seed;
        c.optimizer = kind;
        c.file = dir / cell_file_name(k, seed, kind);
        summary.cells.push_back(c);
      }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < summary.cells.size(); i = next++) {
      CellResult& c = summary.cells[i];
      try {
        const json out = run_cell(cfg, scene, c.k, c.seed, c.optimizer, c);
        write_text(c.file, out.dump(2) + "\n");
        c.ok = true;
      } catch (const std::exception& e) {
        c.ok = false;
        c.error = e.what();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, summary.cells.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  json s;
  s["config"] = config_json(cfg);
  s["cells"] = json::array();
  std::map<std::string, std::vector<double>> per_opt;
  for (const CellResult& c : summary.cells) {
    json e{{"k", c.k}, {"seed", c.seed}, {"optimizer", to_string(c.optimizer)}, {"file", c.file.filename().string()},
           {"ok", c.ok}};
    if (c.ok) {
      e["initial_uc"] = c.initial_uc;
      e["uc"] = c.uc;
      e["angle_quality"] = c.angle_quality;
      per_opt[to_string(c.optimizer)].push_back(c.uc);
    } else {
      e["error"] = c.error;
    }
    s["cells"].push_back(std::move(e));
  }
  s["optimizers"] = json::object();
  for (OptimizerKind kind : cfg.optimizers) {
    const auto it = per_opt.find(to_string(kind));
    if (it == per_opt.end() || it->second.empty()) continue;
    const auto& v = it->second;
    double sum = 0.0;
    for (double x : v) sum += x;
    s["optimizers"][to_string(kind)] = json{{"cells", v.size()},
                                            {"mean_uc", sum / static_cast<double>(v.size())},
                                            {"min_uc", *std::min_element(v.begin(), v.end())},
                                            {"max_uc", *std::max_element(v.begin(), v.end())}};
  }
  summary.summary_file = dir / "summary.json";
  write_text(summary.summary_file, s.dump(2) + "\n");
  return summary;
}

std::string to_string(AttributeChannel c) {
  switch (c) {
    case AttributeChannel::c: return "c";
    case AttributeChannel::phi_cc: return "phi_cc";
    case AttributeChannel::phi_co: return "phi_co";
    case AttributeChannel::combined: return "combined";
  }
  return "c";
}

AttributeChannel attribute_channel_from_string(const std::string& t) {
  if (t == "c") return AttributeChannel::c;
  if (t == "phi_cc") return AttributeChannel::phi_cc;
  if (t == "phi_co") return AttributeChannel::phi_co;
  if (t == "combined") return AttributeChannel::combined;
  throw ConfigError("unknown channel '" + t + "' (expected c, phi_cc, phi_co or combined)");
}

std::vector<double> channel_values(const ObservationAttributes& attrs, AttributeChannel channel,
                                   const LossWeights& lw) {
  const auto sup = attribute_sup(attrs.K);
  const auto w = lw.as_array();
  const double wsum = w[0] + w[1] + w[2];
  if (channel == AttributeChannel::combined && !(wsum > 0.0))
    throw InvalidArgument("channel_values: combined channel needs positive weights");
  std::vector<double> out(attrs.size());
  for (std::size_t j = 0; j < attrs.size(); ++j) {
    const auto row = attrs.row(j);
    double t = 0.0;
    switch (channel) {
      case AttributeChannel::c: t = row[0] / sup[0]; break;
      case AttributeChannel::phi_cc: t = row[1] / sup[1]; break;
      case AttributeChannel::phi_co: t = row[2] / sup[2]; break;
      case AttributeChannel::combined:
        for (int a = 0; a < 3; ++a) t += w[a] * row[a] / sup[a];
        t /= wsum;
        break;
    }
    out[j] = std::clamp(t, 0.0, 1.0);
  }
  return out;
}

Rgb attribute_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const auto r = static_cast<std::uint8_t>(std::lround(255.0 * t));
  return Rgb{r, 0, static_cast<std::uint8_t>(255 - r)};
}

void export_colored_cloud(const VoxelGrid& grid, const ObservationAttributes& attrs, AttributeChannel channel,
                          const std::filesystem::path& path, const LossWeights& weights) {
  if (attrs.size() != grid.size())
    throw InvalidArgument("export_colored_cloud: attributes do not match the voxel count");
  const auto t = channel_values(attrs, channel, weights);
  std::vector<Rgb> colors;
  colors.reserve(t.size());
  for (double x : t) colors.push_back(attribute_color(x));
  const auto centers = grid.centers();
  const auto normals = grid.normals();
  write_ply(path, centers, &normals, &colors);
}

PoseFile read_cell_poses(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": invalid JSON: " + e.what());
  }
  PoseFile pf;
  try {
    pf.k = j.at("k").get<std::size_t>();
    pf.seed = j.at("seed").get<std::uint64_t>();
    for (const json& p : j.at("final").at("poses")) {
      CameraPose pose;
      for (int a = 0; a < 3; ++a) {
        pose.position[a] = p.at("position").at(a).get<double>();
        pose.forward_hint[a] = p.at("forward").at(a).get<double>();
        pose.right_hint[a] = p.at("right").at(a).get<double>();
      }
      pf.poses.push_back(pose);
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": not a cell results file: " + e.what());
  }
  return pf;
}

std::string format_report(const std::filesystem::path& summary_file) {
  json s;
  try {
    s = json::parse(read_text(summary_file));
  } catch (const json::parse_error& e) {
    throw IoError(summary_file.string() + ": invalid JSON: " + e.what());
  }
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(16) << "optimizer" << std::right << std::setw(7) << "cells" << std::setw(10) << "mean_uc"
     << std::setw(10) << "min_uc" << std::setw(10) << "max_uc" << "\n";
  for (auto it = s["optimizers"].begin(); it != s["optimizers"].end(); ++it) {
    const json& v = it.value();
    os << std::left << std::setw(16) << it.key() << std::right << std::setw(7) << v["cells"].get<std::size_t>()
       << std::setw(10) << v["mean_uc"].get<double>() << std::setw(10) << v["min_uc"].get<double>() << std::setw(10)
       << v["max_uc"].get<double>() << "\n";
  }
  os << "\n"
     << std::left << std::setw(16) << "optimizer" << std::right << std::setw(5) << "k" << std::setw(8) << "seed"
     << std::setw(10) << "init_uc" << std::setw(10) << "uc" << std::setw(10) << "aq" << "\n";
  for (const json& c : s["cells"]) {
    os << std::left << std::setw(16) << c["optimizer"].get<std::string>() << std::right << std::setw(5)
       << c["k"].get<std::size_t>() << std::setw(8) << c["seed"].get<std::uint64_t>();
    if (c["ok"].get<bool>())
      os << std::setw(10) << c["initial_uc"].get<double>() << std::setw(10) << c["uc"].get<double>() << std::setw(10)
         << c["angle_quality"].get<double>() << "\n";
    else
      os << "  FAILED: " << c["error"].get<std::string>() << "\n";
  }
  return os.str();
}

}  // namespace neofcam
