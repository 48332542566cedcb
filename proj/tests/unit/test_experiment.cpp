#include "doctest.h"

#include "json.hpp"
#include "neofcam/experiment.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace neofcam;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "neofcam_test_experiment" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* kSmall = R"({
  "scene": {"generator": "random_composite", "seed": 1000, "samples": 200},
  "mode": "planar2d",
  "k": 4,
  "K": 3,
  "optimizer": "hybrid",
  "optimizer_config": {
    "max_outer_iterations": 3,
    "field": {"initial_steps": 40, "finetune_steps": 10}
  },
  "anneal": {"cooling": 0.5},
  "random_trials": 4,
  "seeds": [0]
})";

ExperimentConfig small(const fs::path& out) {
  auto cfg = parse_experiment_config(kSmall);
  cfg.output_dir = out.string();
  return cfg;
}

void strip_wall(json& j) {
  if (j.is_object()) {
    j.erase("wall_ms");
    for (auto& [k, v] : j.items()) strip_wall(v);
  } else if (j.is_array()) {
    for (auto& v : j) strip_wall(v);
  }
}

std::vector<fs::path> files_in(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + NEOFCAM_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config round trip is field-by-field identical") {
  const auto a = parse_experiment_config(kSmall);
  const std::string text = serialize_experiment_config(a);
  const auto b = parse_experiment_config(text);
  CHECK(serialize_experiment_config(b) == text);
  CHECK(b.scene.generator == "random_composite");
  CHECK(b.scene.seed == 1000);
  CHECK(b.k == std::vector<std::size_t>{4});
  CHECK(b.optimizer_config.max_outer_iterations == 3);
  CHECK(b.optimizer_config.field.initial_steps == 40);
  CHECK(b.anneal.cooling == 0.5);
  CHECK(b.optimizers == std::vector<OptimizerKind>{OptimizerKind::hybrid});

  // every serialized field of the parsed text agrees with the original JSON
  const json orig = json::parse(kSmall), ser = json::parse(text);
  CHECK(ser["k"] == json::array({4}));
  CHECK(ser["optimizer"] == orig["optimizer"]);
  CHECK(ser["scene"]["seed"] == orig["scene"]["seed"]);
  CHECK(ser["optimizer_config"]["field"]["finetune_steps"] == orig["optimizer_config"]["field"]["finetune_steps"]);

  auto lists = parse_experiment_config(
      R"({"scene": {"generator": "sphere", "radius": 0.5}, "mode": "volumetric3d", "k": [2, 3],
          "optimizer": ["sa", "random"], "seeds": [1, 2], "intrinsics": {"hfov": 1.0, "vfov": 0.8, "near": 0.1, "far": 3}})");
  const auto again = parse_experiment_config(serialize_experiment_config(lists));
  CHECK(again.k == std::vector<std::size_t>{2, 3});
  CHECK(again.optimizers == std::vector<OptimizerKind>{OptimizerKind::sa, OptimizerKind::random});
  REQUIRE(again.intrinsics);
  CHECK(again.intrinsics->vfov == 0.8);
  CHECK(again.scene.radius == 0.5);
}

TEST_CASE("config errors name the field path") {
  const auto msg = [](const std::string& text) {
    try {
      parse_experiment_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const std::string scene = R"("scene": {"generator": "random_composite"})";
  CHECK(msg("{" + scene + R"(, "optimizer_config": {"weights": {"w_vis": "high"}}})")
            .find("optimizer_config.weights.w_vis") != std::string::npos);
  CHECK(msg("{" + scene + R"(, "optimizer_config": {"field": {"hiden": 3}}})").find("hiden") != std::string::npos);
  CHECK(msg("{" + scene + R"(, "optimizer": "gradient"})").find("optimizer") != std::string::npos);
  CHECK(msg("{" + scene + R"(, "seeds": []})").find("seeds") != std::string::npos);
  CHECK(msg(R"({"mode": "planar2d"})").find("scene") != std::string::npos);
  CHECK(msg(R"({"scene": {"generator": "cube"}})").find("scene.generator") != std::string::npos);
  CHECK(!msg("{ not json").empty());
  CHECK_THROWS_AS(load_experiment_config("/nonexistent/neofcam.json"), ConfigError);
}

TEST_CASE("one cell writes exactly a result file and the summary") {
  const auto dir = tmp("one_cell");
  const auto summary = run_experiment(small(dir));
  REQUIRE(summary.ok());
  const auto files = files_in(dir);
  REQUIRE(files.size() == 2);
  CHECK(fs::exists(dir / cell_file_name(4, 0, OptimizerKind::hybrid)));
  CHECK(fs::exists(dir / "summary.json"));

  const json cell = json::parse(slurp(dir / cell_file_name(4, 0, OptimizerKind::hybrid)));
  for (const char* key : {"config", "per_iteration", "final"}) CHECK(cell.contains(key));
  const auto& it = cell["per_iteration"];
  REQUIRE(it.size() >= 2);
  for (const char* key : {"iter", "phase", "L", "L_vis", "L_cc", "L_co", "uc", "angle_quality", "wall_ms"})
    CHECK(it[1].contains(key));
  CHECK(cell["final"]["poses"].size() == 4);
  CHECK(cell["final"]["uc"] == summary.cells[0].uc);

  // the embedded config reproduces the cell
  const auto embedded = parse_experiment_config(cell["config"].dump());
  CHECK(embedded.seeds == std::vector<std::uint64_t>{0});

  const auto poses = read_cell_poses(dir / cell_file_name(4, 0, OptimizerKind::hybrid));
  CHECK(poses.poses.size() == 4);
  CHECK(poses.k == 4);
}

TEST_CASE("rerunning an identical config gives identical payloads") {
  const auto d1 = tmp("rerun_a"), d2 = tmp("rerun_b");
  auto c1 = small(d1), c2 = small(d2);
  c1.optimizers = c2.optimizers = {OptimizerKind::hybrid, OptimizerKind::sa};
  run_experiment(c1);
  run_experiment(c2);
  for (OptimizerKind k : c1.optimizers) {
    json a = json::parse(slurp(d1 / cell_file_name(4, 0, k)));
    json b = json::parse(slurp(d2 / cell_file_name(4, 0, k)));
    a.erase("config");  // output_dir differs
    b.erase("config");
    strip_wall(a);
    strip_wall(b);
    CHECK(a == b);
  }
}

TEST_CASE("summary aggregates per optimizer over seeds") {
  const auto dir = tmp("aggregate");
  auto cfg = small(dir);
  cfg.seeds = {0, 1, 2};
  cfg.optimizers = {OptimizerKind::random, OptimizerKind::grad_only};
  const auto summary = run_experiment(cfg, 2);
  REQUIRE(summary.ok());
  CHECK(summary.cells.size() == 6);
  CHECK(files_in(dir).size() == 7);
  const json s = json::parse(slurp(dir / "summary.json"));
  for (OptimizerKind k : cfg.optimizers) {
    std::vector<double> ucs;
    for (std::uint64_t seed : cfg.seeds)
      ucs.push_back(json::parse(slurp(dir / cell_file_name(4, seed, k)))["final"]["uc"].get<double>());
    double mean = 0;
    for (double u : ucs) mean += u / ucs.size();
    const auto& agg = s["optimizers"][to_string(k)];
    CHECK(agg["cells"] == 3);
    CHECK(agg["mean_uc"].get<double>() == doctest::Approx(mean).epsilon(1e-12));
    CHECK(agg["min_uc"].get<double>() == *std::min_element(ucs.begin(), ucs.end()));
    CHECK(agg["max_uc"].get<double>() == *std::max_element(ucs.begin(), ucs.end()));
  }
  const std::string report = format_report(dir / "summary.json");
  CHECK(report.find("grad_only") != std::string::npos);
  CHECK(report.find("random") != std::string::npos);
}

TEST_CASE("attribute colors: blue at zero, red at sup, rank preserving") {
  const auto zero = attribute_color(0.0), one = attribute_color(1.0);
  CHECK((zero.r == 0 && zero.g == 0 && zero.b == 255));
  CHECK((one.r == 255 && one.g == 0 && one.b == 0));

  VoxelGrid g;
  ObservationAttributes a;
  a.K = 3;
  const std::vector<double> cvals{0.0, 3.0, 1.0, 2.5, 0.5, 3.0};
  for (std::size_t j = 0; j < cvals.size(); ++j) {
    Voxel v;
    v.center = Vec3(static_cast<double>(j), 0, 0);
    v.members = {j};
    g.voxels.push_back(v);
    a.c.push_back(cvals[j]);
    a.phi_cc.push_back(0.0);
    a.phi_co.push_back(0.0);
  }
  const auto dir = tmp("colors");
  export_colored_cloud(g, a, AttributeChannel::c, dir / "c.ply");
  const auto colors = read_ply_colors(dir / "c.ply");
  REQUIRE(colors.size() == cvals.size());
  CHECK((colors[0].r == 0 && colors[0].b == 255));
  CHECK((colors[1].r == 255 && colors[1].b == 0));
  for (std::size_t i = 0; i < cvals.size(); ++i)
    for (std::size_t j = 0; j < cvals.size(); ++j)
      if (cvals[i] < cvals[j]) CHECK(colors[i].r < colors[j].r);

  // all-sup on every channel: the combined channel is pure red
  ObservationAttributes full = a;
  std::fill(full.c.begin(), full.c.end(), 3.0);
  std::fill(full.phi_cc.begin(), full.phi_cc.end(), kPi / 2);
  std::fill(full.phi_co.begin(), full.phi_co.end(), 1.0);
  export_colored_cloud(g, full, AttributeChannel::combined, dir / "full.ply");
  for (const Rgb& c : read_ply_colors(dir / "full.ply")) CHECK((c.r == 255 && c.g == 0 && c.b == 0));
  CHECK_THROWS(export_colored_cloud(g, a, AttributeChannel::c, "/nonexistent/dir/x.ply"));
  CHECK(attribute_channel_from_string("phi_co") == AttributeChannel::phi_co);
}

TEST_CASE("CLI exit codes") {
  const auto dir = tmp("cli");
  {
    std::ofstream f(dir / "ok.json");
    f << kSmall;
  }
  {
    std::ofstream f(dir / "bad.json");
    f << R"({"scene": {"generator": "random_composite"}, "k": "ten"})";
  }
  const std::string ok = (dir / "ok.json").string(), bad = (dir / "bad.json").string();
  const std::string out = (dir / "results").string();
  CHECK(run_cli("") == 2);
  CHECK(run_cli("optimize --config " + bad) == 2);
  CHECK(run_cli("optimize --config /nonexistent.json") == 2);
  CHECK(run_cli("optimize --config " + ok + " --out " + out) == 0);
  const std::string cell = (fs::path(out) / cell_file_name(4, 0, OptimizerKind::hybrid)).string();
  CHECK(fs::exists(cell));
  CHECK(run_cli("evaluate --config " + ok + " " + cell + " --out " + (dir / "eval.json").string()) == 0);
  const json ev = json::parse(slurp(dir / "eval.json"));
  CHECK(ev["uc"] == json::parse(slurp(cell))["final"]["uc"]);
  CHECK(run_cli("export --config " + ok + " " + cell + " --channel c --out " + (dir / "c.ply").string()) == 0);
  CHECK(run_cli("report " + out) == 0);
  CHECK(run_cli("generate --config " + ok + " --out " + (dir / "scene.ply").string()) == 0);
  CHECK(run_cli("evaluate --config " + ok + " " + (dir / "missing.json").string()) == 3);
  CHECK(run_cli("optimize --config " + ok + " --kernels sse9") == 2);
}
