#include "doctest.h"

#include "neofcam/point_io.hpp"
#include "neofcam/scene.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

using namespace neofcam;

namespace {

std::filesystem::path tmp(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "neofcam_test_point_io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

const std::vector<Vec3> kPts{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.25, -0.5, 2}};
const std::vector<Vec3> kNrm{{0, 0, 1}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}};

}  // namespace

TEST_CASE("binary PLY round trip with normals and colors") {
  const auto p = tmp("bin.ply");
  std::vector<Rgb> colors{{255, 0, 0}, {0, 255, 0}, {0, 0, 255}, {10, 20, 30}};
  write_ply(p, kPts, &kNrm, &colors);
  const PointFile f = read_point_file(p);
  REQUIRE(f.vertices.size() == 4);
  REQUIRE(f.normals.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK((f.vertices[i] - kPts[i]).norm() < 1e-6);
    CHECK((f.normals[i] - kNrm[i]).norm() < 1e-6);
  }
  const auto c = read_ply_colors(p);
  REQUIRE(c.size() == 4);
  CHECK(c[3].r == 10);
  CHECK(c[3].g == 20);
  CHECK(c[3].b == 30);
}

TEST_CASE("ascii PLY round trip") {
  const auto p = tmp("ascii.ply");
  write_ply_ascii(p, kPts);
  const PointFile f = read_point_file(p);
  REQUIRE(f.vertices.size() == 4);
  CHECK(f.normals.empty());
  CHECK((f.vertices[3] - kPts[3]).norm() < 1e-6);
}

TEST_CASE("ascii PLY with faces is triangulated") {
  const auto p = tmp("quad.ply");
  write_text(p,
             "ply\nformat ascii 1.0\ncomment quad\nelement vertex 4\nproperty float x\nproperty float y\n"
             "property float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n"
             "0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
  const PointFile f = read_point_file(p);
  REQUIRE(f.triangles.size() == 2);
  CHECK(f.triangles[0] == std::array<std::size_t, 3>{0, 1, 2});
  CHECK(f.triangles[1] == std::array<std::size_t, 3>{0, 2, 3});
}

TEST_CASE("big endian binary PLY") {
  const auto p = tmp("be.ply");
  std::string body =
      "ply\nformat binary_big_endian 1.0\nelement vertex 2\nproperty double x\nproperty double y\n"
      "property double z\nend_header\n";
  const double vals[] = {1.5, -2.0, 3.25, 0.0, 0.5, 7.0};
  for (double v : vals) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    for (int b = 7; b >= 0; --b) body.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
  }
  write_text(p, body);
  const PointFile f = read_point_file(p);
  REQUIRE(f.vertices.size() == 2);
  CHECK(f.vertices[0].isApprox(Vec3(1.5, -2.0, 3.25)));
  CHECK(f.vertices[1].isApprox(Vec3(0.0, 0.5, 7.0)));
}

TEST_CASE("OBJ vertices, normals and faces") {
  const auto p = tmp("tri.obj");
  write_text(p,
             "# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 2\nf 1//1 2//1 3//1\n");
  const PointFile f = read_point_file(p);
  REQUIRE(f.vertices.size() == 3);
  REQUIRE(f.triangles.size() == 1);
  REQUIRE(f.normals.size() == 3);
  CHECK(f.normals[1].normalized().isApprox(Vec3(0, 0, 1)));

  // a mesh is surface sampled on load
  LoadOptions opt;
  opt.mesh_samples = 200;
  const TargetScene s = load_scene(p, SceneMode::volumetric3d, opt);
  CHECK(s.size() == 200);
  for (const Vec3& q : s.points) {
    CHECK(std::abs(q.z()) < 1e-9);
    CHECK(q.x() + q.y() <= 1.0 + 1e-9);
  }
}

TEST_CASE("unreadable and malformed files raise IoError") {
  CHECK_THROWS_AS(read_point_file(tmp("missing.ply")), IoError);
  const auto bad = tmp("bad.ply");
  write_text(bad, "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nend_header\n1\n");
  CHECK_THROWS_AS(read_point_file(bad), IoError);
  const auto ext = tmp("cloud.xyz");
  write_text(ext, "0 0 0\n");
  CHECK_THROWS_AS(read_point_file(ext), IoError);
}
