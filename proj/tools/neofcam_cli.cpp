#include "neofcam/experiment.hpp"
#include "neofcam/kernels.hpp"
#include "neofcam/metrics.hpp"
#include "neofcam/point_io.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed_override;
  std::size_t threads = 1;
};

neofcam::ExperimentConfig load(const Common& c) {
  neofcam::ExperimentConfig cfg = neofcam::load_experiment_config(c.config);
  if (c.seed_override) cfg.seeds = {*c.seed_override};
  return cfg;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw neofcam::IoError("cannot write " + out);
  f << text;
}

int cmd_generate(const Common& c) {
  const auto cfg = load(c);
  const auto scene = neofcam::build_scene(cfg);
  const std::string out = c.out.empty() ? "scene.ply" : c.out;
  neofcam::write_ply(out, scene.points, &scene.normals);
  const auto grid = neofcam::voxelize(scene, neofcam::resolve_resolution(cfg, scene));
  std::printf("%zu points, %zu voxels -> %s\n", scene.size(), grid.size(), out.c_str());
  return 0;
}

int cmd_optimize(const Common& c) {
  auto cfg = load(c);
  if (!c.out.empty()) cfg.output_dir = c.out;
  const auto summary = neofcam::run_experiment(cfg, c.threads);
  std::size_t failed = 0;
  for (const auto& cell : summary.cells) {
    if (cell.ok) {
      std::printf("%-14s k=%zu seed=%llu uc %.4f -> %.4f aq %.4f\n", neofcam::to_string(cell.optimizer).c_str(),
                  cell.k, static_cast<unsigned long long>(cell.seed), cell.initial_uc, cell.uc, cell.angle_quality);
    } else {
      ++failed;
      std::fprintf(stderr, "FAILED %s: %s\n", cell.file.filename().string().c_str(), cell.error.c_str());
    }
  }
  std::printf("summary: %s\n", summary.summary_file.string().c_str());
  return failed == 0 ? 0 : kExitRuntime;
}

struct Posed {
  neofcam::CameraRig rig;
  neofcam::VoxelGrid grid;
  neofcam::ExperimentConfig cfg;
};

Posed posed(const Common& c, const std::string& result_file) {
  Posed p;
  p.cfg = load(c);
  const auto scene = neofcam::build_scene(p.cfg);
  p.grid = neofcam::voxelize(scene, neofcam::resolve_resolution(p.cfg, scene));
  p.rig.poses = neofcam::read_cell_poses(result_file).poses;
  p.rig.intrinsics = neofcam::resolve_intrinsics(p.cfg, scene);
  p.rig.validate();
  return p;
}

int cmd_evaluate(const Common& c, const std::string& result_file) {
  const Posed p = posed(c, result_file);
  neofcam::CoverageThreshold K{p.cfg.K};
  const auto rep = neofcam::evaluate(p.rig, p.grid, K, p.cfg.uc_mode, p.cfg.optimizer_config.visibility);
  nlohmann::ordered_json j;
  j["cameras"] = rep.cameras;
  j["voxels"] = rep.voxels;
  j["uc"] = rep.uc;
  j["uc_mode"] = neofcam::to_string(p.cfg.uc_mode);
  j["angle_quality"] = rep.angle_quality;
  j["per_voxel_count"] = rep.per_voxel_count;
  emit(j.dump(2) + "\n", c.out);
  return 0;
}

int cmd_export(const Common& c, const std::string& result_file, const std::string& channel) {
  const Posed p = posed(c, result_file);
  const auto ch = neofcam::attribute_channel_from_string(channel);
  const auto attrs = neofcam::shape_analyze(p.rig, p.grid, {p.cfg.K}, p.cfg.optimizer_config.visibility);
  const std::string out = c.out.empty() ? "attributes_" + channel + ".ply" : c.out;
  neofcam::export_colored_cloud(p.grid, attrs, ch, out, p.cfg.optimizer_config.weights);
  std::printf("%zu voxels (%s) -> %s\n", p.grid.size(), channel.c_str(), out.c_str());
  return 0;
}

int cmd_report(const Common& c, const std::string& dir) {
  std::string base = dir;
  if (base.empty()) base = load(c).output_dir;
  emit(neofcam::format_report(std::filesystem::path(base) / "summary.json"), c.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"camera placement optimization with a learned observation field"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t seed_override = 0;
  std::string result_file, channel = "combined", report_dir, backend;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", common.config, "experiment config (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--out", common.out, "output file or directory");
    sub->add_option("--seed-override", seed_override, "replace the config's seed list by this seed");
    sub->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--kernels", backend, "kernel backend (scalar or avx2)");
  };

  auto* gen = app.add_subcommand("generate", "build the configured scene and write it as PLY");
  add_common(gen, true);
  auto* opt = app.add_subcommand("optimize", "run every (k, seed, optimizer) cell of the config");
  add_common(opt, true);
  auto* ev = app.add_subcommand("evaluate", "recompute metrics for the final poses of a cell file");
  add_common(ev, true);
  ev->add_option("result", result_file, "cell results file")->required();
  auto* ex = app.add_subcommand("export", "write voxel centers colored by an attribute channel");
  add_common(ex, true);
  ex->add_option("result", result_file, "cell results file")->required();
  ex->add_option("--channel", channel, "c, phi_cc, phi_co or combined");
  auto* rep = app.add_subcommand("report", "tabulate summary.json");
  add_common(rep, false);
  rep->add_option("dir", report_dir, "results directory (default: the config's output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  for (auto* sub : {gen, opt, ev, ex, rep})
    if (sub->parsed() && sub->count("--seed-override")) common.seed_override = seed_override;

  try {
    if (!backend.empty()) {
      if (backend != "scalar" && backend != "avx2")
        throw neofcam::ConfigError("--kernels: expected scalar or avx2, got '" + backend + "'");
      neofcam::kernels::set_backend(backend == "avx2" ? neofcam::kernels::Backend::avx2
                                                      : neofcam::kernels::Backend::scalar);
    }
    if (gen->parsed()) return cmd_generate(common);
    if (opt->parsed()) return cmd_optimize(common);
    if (ev->parsed()) return cmd_evaluate(common, result_file);
    if (ex->parsed()) return cmd_export(common, result_file, channel);
    if (rep->parsed()) {
      if (report_dir.empty() && common.config.empty()) throw neofcam::ConfigError("report: give a directory or --config");
      return cmd_report(common, report_dir);
    }
  } catch (const neofcam::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
