#include "neofcam/scene.hpp"

#include "neofcam/point_io.hpp"
#include "neofcam/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace neofcam {
namespace {

constexpr double kUnitTol = 1e-6;

struct BoundarySample {
  Vec2 point;
  Vec2 normal;
};

std::vector<Vec2> polygon_vertices(const ShapeSpec& spec) {
  std::vector<Vec2> local;
  if (spec.kind == ShapeKind::square) {
    const double h = 0.5 * spec.size;
    local = {{-h, -h}, {h, -h}, {h, h}, {-h, h}};
  } else {
    const double r = spec.size / std::sqrt(3.0);
    for (int k = 0; k < 3; ++k) {
      const double a = 0.5 * kPi + k * 2.0 * kPi / 3.0;
      local.emplace_back(r * std::cos(a), r * std::sin(a));
    }
  }
  const Eigen::Rotation2Dd rot(spec.rotation);
  std::vector<Vec2> out;
  out.reserve(local.size());
  for (const Vec2& v : local) out.push_back(rot * v + spec.center);
  return out;  // counter-clockwise
}

double perimeter(const ShapeSpec& spec) {
  switch (spec.kind) {
    case ShapeKind::circle: return 2.0 * kPi * spec.size;
    case ShapeKind::triangle: return 3.0 * spec.size;
    case ShapeKind::square: return 4.0 * spec.size;
    default: return 0.0;
  }
}

void check_primitive(const ShapeSpec& spec) {
  if (!(spec.size > 0.0) || !std::isfinite(spec.size))
    throw InvalidArgument("shape size must be strictly positive");
}

// n samples evenly spaced by arc length, starting at arc offset `phase`
// (a fraction of one spacing).
std::vector<BoundarySample> sample_primitive(const ShapeSpec& spec, std::size_t n, double phase) {
  check_primitive(spec);
  std::vector<BoundarySample> out;
  out.reserve(n);
  if (spec.kind == ShapeKind::circle) {
    for (std::size_t i = 0; i < n; ++i) {
      const double a = spec.rotation + (static_cast<double>(i) + phase) * 2.0 * kPi / static_cast<double>(n);
      const Vec2 dir(std::cos(a), std::sin(a));
      out.push_back({spec.center + spec.size * dir, dir});
    }
    return out;
  }
  const std::vector<Vec2> verts = polygon_vertices(spec);
  const double total = perimeter(spec);
  const double step = total / static_cast<double>(n);
  std::size_t edge = 0;
  double edge_start = 0.0;
  const double edge_len = spec.size;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = (static_cast<double>(i) + phase) * step;
    while (edge + 1 < verts.size() && s >= edge_start + edge_len) {
      edge_start += edge_len;
      ++edge;
    }
    const Vec2& a = verts[edge];
    const Vec2& b = verts[(edge + 1) % verts.size()];
    const Vec2 e = (b - a) / edge_len;
    const double t = std::clamp(s - edge_start, 0.0, edge_len);
    out.push_back({a + t * e, Vec2(e.y(), -e.x())});
  }
  return out;
}

std::vector<BoundarySample> sample_shape(const ShapeSpec& spec, std::size_t n, double phase);

std::vector<BoundarySample> sample_composite(const ShapeSpec& spec, std::size_t n, double phase) {
  if (spec.components.empty()) throw InvalidArgument("composite shape has no components");
  const std::size_t dense = std::max<std::size_t>(64, 16 * n);
  std::vector<BoundarySample> kept;
  std::vector<double> weight;
  for (std::size_t c = 0; c < spec.components.size(); ++c) {
    const ShapeSpec& comp = spec.components[c];
    const std::vector<BoundarySample> pts = sample_shape(comp, dense, 0.5);
    const double w = comp.kind == ShapeKind::composite ? 0.0 : perimeter(comp) / static_cast<double>(dense);
    for (const BoundarySample& s : pts) {
      bool inside = false;
      for (std::size_t o = 0; o < spec.components.size() && !inside; ++o)
        if (o != c && shape_contains_strictly(spec.components[o], s.point)) inside = true;
      if (inside) continue;
      kept.push_back(s);
      weight.push_back(w);
    }
  }
  // Nested composites carry no analytic perimeter; give their samples the
  // mean spacing of the primitive ones (or unit spacing if none exist).
  double ref = 0.0;
  std::size_t ref_n = 0;
  for (double w : weight)
    if (w > 0.0) { ref += w; ++ref_n; }
  ref = ref_n ? ref / static_cast<double>(ref_n) : 1.0;
  for (double& w : weight)
    if (w == 0.0) w = ref;
  if (kept.empty()) throw GeometryError("composite shape has an empty boundary");

  std::vector<double> cumulative(kept.size());
  std::partial_sum(weight.begin(), weight.end(), cumulative.begin());
  const double total = cumulative.back();
  std::vector<BoundarySample> out;
  out.reserve(n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = (static_cast<double>(i) + phase) * total / static_cast<double>(n);
    while (k + 1 < kept.size() && cumulative[k] <= s) ++k;
    out.push_back(kept[k]);
  }
  return out;
}

std::vector<BoundarySample> sample_shape(const ShapeSpec& spec, std::size_t n, double phase) {
  switch (spec.kind) {
    case ShapeKind::circle:
    case ShapeKind::triangle:
    case ShapeKind::square: return sample_primitive(spec, n, phase);
    case ShapeKind::composite: return sample_composite(spec, n, phase);
    case ShapeKind::external: break;
  }
  throw InvalidArgument("external shapes are loaded from file, not generated");
}

std::vector<std::size_t> nearest_neighbors(const std::vector<Vec3>& pts, std::size_t i, std::size_t k,
                                           std::vector<std::pair<double, std::size_t>>& scratch) {
  scratch.clear();
  for (std::size_t j = 0; j < pts.size(); ++j) scratch.emplace_back((pts[j] - pts[i]).squaredNorm(), j);
  const std::size_t take = std::min(k + 1, scratch.size());
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(take - 1), scratch.end());
  std::vector<std::size_t> idx;
  idx.reserve(take);
  for (std::size_t t = 0; t < take; ++t) idx.push_back(scratch[t].second);
  return idx;
}

}  // namespace

std::string to_string(SceneMode mode) {
  return mode == SceneMode::planar2d ? "planar2d" : "volumetric3d";
}

SceneMode scene_mode_from_string(const std::string& text) {
  if (text == "planar2d") return SceneMode::planar2d;
  if (text == "volumetric3d") return SceneMode::volumetric3d;
  throw InvalidArgument("unknown scene mode '" + text + "'");
}

bool Aabb::contains(const Vec3& p, double tol) const {
  for (int a = 0; a < 3; ++a)
    if (p[a] < min[a] - tol || p[a] > max[a] + tol) return false;
  return true;
}

Aabb Aabb::inflated(double factor) const {
  const Vec3 c = center();
  const Vec3 h = 0.5 * factor * extent();
  return {c - h, c + h};
}

Vec3 TargetScene::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : points) c += p;
  return points.empty() ? c : Vec3(c / static_cast<double>(points.size()));
}

TargetScene make_scene(std::vector<Vec3> points, std::vector<Vec3> normals, SceneMode mode) {
  if (points.empty()) throw GeometryError("scene has zero points");
  if (points.size() != normals.size())
    throw GeometryError("scene point and normal counts differ");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite() || !normals[i].allFinite())
      throw GeometryError("scene contains non-finite coordinates");
    if (mode == SceneMode::planar2d) {
      points[i].z() = 0.0;
      normals[i].z() = 0.0;
    }
    const double len = normals[i].norm();
    if (len < 1e-12) throw GeometryError("scene normal " + std::to_string(i) + " has zero length");
    normals[i] /= len;
  }
  TargetScene scene;
  scene.mode = mode;
  scene.bounds.min = scene.bounds.max = points.front();
  for (const Vec3& p : points) {
    scene.bounds.min = scene.bounds.min.cwiseMin(p);
    scene.bounds.max = scene.bounds.max.cwiseMax(p);
  }
  if (points.size() > 1 && scene.bounds.min == scene.bounds.max) throw GeometryError("all scene points coincide");
  scene.points = std::move(points);
  scene.normals = std::move(normals);
  return scene;
}

void validate_scene(const TargetScene& scene) {
  if (scene.points.empty()) throw GeometryError("scene has zero points");
  if (scene.points.size() != scene.normals.size()) throw GeometryError("point/normal count mismatch");
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    if (std::abs(scene.normals[i].norm() - 1.0) > kUnitTol)
      throw GeometryError("normal " + std::to_string(i) + " is not unit length");
    if (!scene.bounds.contains(scene.points[i])) throw GeometryError("bounds do not contain every point");
    if (scene.mode == SceneMode::planar2d &&
        (scene.points[i].z() != scene.points.front().z() || scene.normals[i].z() != 0.0))
      throw GeometryError("planar scene has out-of-plane geometry");
  }
}

std::vector<Vec3> estimate_normals(const std::vector<Vec3>& points, std::size_t k, SceneMode mode) {
  const std::size_t min_points = mode == SceneMode::planar2d ? 2 : 3;
  if (points.size() < min_points) throw GeometryError("too few points to estimate normals");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  std::vector<Vec3> normals(points.size());
  std::vector<std::pair<double, std::size_t>> scratch;
  scratch.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::vector<std::size_t> nb = nearest_neighbors(points, i, k, scratch);
    Vec3 mean = Vec3::Zero();
    for (std::size_t j : nb) mean += points[j];
    mean /= static_cast<double>(nb.size());
    Mat3 cov = Mat3::Zero();
    for (std::size_t j : nb) {
      const Vec3 d = points[j] - mean;
      cov += d * d.transpose();
    }
    Vec3 n;
    if (mode == SceneMode::planar2d) {
      const Eigen::Matrix2d c2 = cov.topLeftCorner<2, 2>();
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c2);
      const Vec2 v = es.eigenvectors().col(0);
      n = Vec3(v.x(), v.y(), 0.0);
    } else {
      Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
      n = es.eigenvectors().col(0);
    }
    if (n.norm() < 1e-12) n = points[i] - centroid;
    if (n.norm() < 1e-12) n = mode == SceneMode::planar2d ? Vec3::UnitX() : Vec3::UnitZ();
    n.normalize();
    if (n.dot(points[i] - centroid) < 0.0) n = -n;
    normals[i] = n;
  }
  return normals;
}

TargetScene load_scene(const std::filesystem::path& path, SceneMode mode, const LoadOptions& options) {
  PointFile file = read_point_file(path);
  if (file.vertices.empty()) throw GeometryError("'" + path.string() + "' contains zero points");

  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  if (!file.triangles.empty()) {
    // area-weighted surface sampling with face normals
    std::vector<double> area(file.triangles.size());
    std::vector<Vec3> face_normal(file.triangles.size());
    for (std::size_t t = 0; t < file.triangles.size(); ++t) {
      const auto& tri = file.triangles[t];
      const Vec3 c = (file.vertices[tri[1]] - file.vertices[tri[0]])
                         .cross(file.vertices[tri[2]] - file.vertices[tri[0]]);
      area[t] = 0.5 * c.norm();
      face_normal[t] = area[t] > 0.0 ? Vec3(c.normalized()) : Vec3::Zero();
    }
    std::vector<double> cumulative(area.size());
    std::partial_sum(area.begin(), area.end(), cumulative.begin());
    const double total = cumulative.back();
    if (!(total > 0.0)) throw GeometryError("'" + path.string() + "' has only degenerate faces");
    Rng rng(options.seed);
    for (std::size_t s = 0; s < options.mesh_samples; ++s) {
      const double u = uniform01(rng) * total;
      const auto t = static_cast<std::size_t>(
          std::min<std::ptrdiff_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin(),
                                   static_cast<std::ptrdiff_t>(cumulative.size() - 1)));
      double r1 = uniform01(rng), r2 = uniform01(rng);
      if (r1 + r2 > 1.0) { r1 = 1.0 - r1; r2 = 1.0 - r2; }
      const auto& tri = file.triangles[t];
      const Vec3& a = file.vertices[tri[0]];
      points.push_back(a + r1 * (file.vertices[tri[1]] - a) + r2 * (file.vertices[tri[2]] - a));
      Vec3 n = face_normal[t];
      if (!file.normals.empty()) {
        const Vec3 vn = file.normals[tri[0]] + file.normals[tri[1]] + file.normals[tri[2]];
        if (vn.norm() > 1e-12 && vn.dot(n) < 0.0) n = -n;
      }
      normals.push_back(n);
    }
  } else {
    points = std::move(file.vertices);
    normals = std::move(file.normals);
  }

  if (mode == SceneMode::planar2d)
    for (Vec3& p : points) p.z() = 0.0;
  if (points.size() >= 2) {
    bool coincident = true;
    for (const Vec3& p : points)
      if ((p - points.front()).norm() > 1e-12) { coincident = false; break; }
    if (coincident) throw GeometryError("'" + path.string() + "': all points coincide");
  }
  bool need_estimate = normals.empty();
  if (!need_estimate && mode == SceneMode::planar2d)
    for (const Vec3& n : normals)
      if (Vec2(n.x(), n.y()).norm() < 1e-12) { need_estimate = true; break; }
  if (need_estimate) normals = estimate_normals(points, options.normal_neighbors, mode);
  return make_scene(std::move(points), std::move(normals), mode);
}

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::circle: return "circle";
    case ShapeKind::triangle: return "triangle";
    case ShapeKind::square: return "square";
    case ShapeKind::composite: return "composite";
    case ShapeKind::external: return "external";
  }
  return "?";
}

ShapeKind shape_kind_from_string(const std::string& text) {
  for (ShapeKind k : {ShapeKind::circle, ShapeKind::triangle, ShapeKind::square, ShapeKind::composite,
                      ShapeKind::external})
    if (to_string(k) == text) return k;
  throw InvalidArgument("unknown shape kind '" + text + "'");
}

bool shape_contains_strictly(const ShapeSpec& spec, const Vec2& p, double tol) {
  switch (spec.kind) {
    case ShapeKind::circle: return (p - spec.center).norm() < spec.size - tol;
    case ShapeKind::triangle:
    case ShapeKind::square: {
      const std::vector<Vec2> v = polygon_vertices(spec);
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec2 e = (v[(i + 1) % v.size()] - v[i]).normalized();
        const Vec2 inward(-e.y(), e.x());
        if (inward.dot(p - v[i]) <= tol) return false;
      }
      return true;
    }
    case ShapeKind::composite:
      for (const ShapeSpec& c : spec.components)
        if (shape_contains_strictly(c, p, tol)) return true;
      return false;
    case ShapeKind::external: return false;
  }
  return false;
}

TargetScene generate_planar_shape(const ShapeSpec& spec) {
  if (spec.kind == ShapeKind::external)
    throw InvalidArgument("external shapes are loaded from file, not generated");
  if (spec.sample_count < 3) throw InvalidArgument("sample_count must be at least 3");
  Rng rng(spec.seed);
  const double phase = uniform01(rng);
  const std::vector<BoundarySample> samples = sample_shape(spec, spec.sample_count, phase);
  std::vector<Vec3> points, normals;
  points.reserve(samples.size());
  normals.reserve(samples.size());
  for (const BoundarySample& s : samples) {
    points.emplace_back(s.point.x(), s.point.y(), 0.0);
    normals.emplace_back(s.normal.x(), s.normal.y(), 0.0);
  }
  return make_scene(std::move(points), std::move(normals), SceneMode::planar2d);
}

ShapeSpec random_composite_spec(std::uint64_t seed, std::size_t sample_count) {
  Rng rng(seed ^ 0x5eedc0de12345678ULL);
  ShapeSpec spec;
  spec.kind = ShapeKind::composite;
  spec.sample_count = sample_count;
  spec.seed = seed;
  const int count = 2 + static_cast<int>(uniform01(rng) * 3.0);
  const ShapeKind kinds[] = {ShapeKind::circle, ShapeKind::triangle, ShapeKind::square};
  for (int c = 0; c < count; ++c) {
    ShapeSpec comp;
    comp.kind = kinds[std::min(2, static_cast<int>(uniform01(rng) * 3.0))];
    comp.size = 0.6 + 0.6 * uniform01(rng);
    if (comp.kind != ShapeKind::circle) comp.size *= 1.6;
    comp.rotation = 2.0 * kPi * uniform01(rng);
    if (c == 0) {
      comp.center = Vec2::Zero();
    } else {
      const ShapeSpec& anchor = spec.components[static_cast<std::size_t>(uniform01(rng) * c)];
      const double a = 2.0 * kPi * uniform01(rng);
      const double reach = anchor.kind == ShapeKind::circle ? anchor.size : 0.45 * anchor.size;
      comp.center = anchor.center + (0.6 + 0.35 * uniform01(rng)) * reach * Vec2(std::cos(a), std::sin(a));
    }
    spec.components.push_back(comp);
  }
  return spec;
}

TargetScene sample_sphere(const Vec3& center, double radius, std::size_t n, std::uint64_t seed) {
  if (n == 0 || !(radius > 0.0)) throw InvalidArgument("sample_sphere needs n > 0 and radius > 0");
  Rng rng(seed);
  // Fibonacci lattice, randomly rotated about z by the seed.
  const double spin = 2.0 * kPi * uniform01(rng);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> pts, nrm;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double a = spin + golden * static_cast<double>(i);
    const Vec3 d(r * std::cos(a), r * std::sin(a), z);
    pts.push_back(center + radius * d);
    nrm.push_back(d);
  }
  return make_scene(std::move(pts), std::move(nrm), SceneMode::volumetric3d);
}

TargetScene sample_box(const Vec3& center, const Vec3& half, std::size_t n, std::uint64_t seed) {
  if (n == 0 || !(half.minCoeff() > 0.0)) throw InvalidArgument("sample_box needs n > 0 and positive extents");
  Rng rng(seed);
  const double areas[3] = {half.y() * half.z(), half.x() * half.z(), half.x() * half.y()};
  const double total = 2.0 * (areas[0] + areas[1] + areas[2]);
  std::vector<Vec3> pts, nrm;
  for (std::size_t i = 0; i < n; ++i) {
    double u = uniform01(rng) * total;
    int face = 0;
    for (; face < 5; ++face) {
      const double a = areas[face / 2];
      if (u < a) break;
      u -= a;
    }
    const int axis = face / 2;
    const double sign = face % 2 == 0 ? 1.0 : -1.0;
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = (2.0 * uniform01(rng) - 1.0) * half[k];
    p[axis] = sign * half[axis];
    Vec3 nn = Vec3::Zero();
    nn[axis] = sign;
    pts.push_back(center + p);
    nrm.push_back(nn);
  }
  return make_scene(std::move(pts), std::move(nrm), SceneMode::volumetric3d);
}

TargetScene sample_torus(const Vec3& center, double major, double minor, std::size_t n, std::uint64_t seed) {
  if (n == 0 || !(minor > 0.0) || !(major > minor)) throw InvalidArgument("sample_torus needs major > minor > 0");
  Rng rng(seed);
  std::vector<Vec3> pts, nrm;
  while (pts.size() < n) {
    const double u = 2.0 * kPi * uniform01(rng);
    const double v = 2.0 * kPi * uniform01(rng);
    // accept proportionally to the local area element
    if (uniform01(rng) * (major + minor) > major + minor * std::cos(v)) continue;
    const Vec3 ring(std::cos(u), std::sin(u), 0.0);
    const Vec3 nn = std::cos(v) * ring + std::sin(v) * Vec3::UnitZ();
    pts.push_back(center + major * ring + minor * nn);
    nrm.push_back(nn);
  }
  return make_scene(std::move(pts), std::move(nrm), SceneMode::volumetric3d);
}

std::size_t CellKeyHash::operator()(const CellKey& k) const noexcept {
  std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
  h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
  h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
  return static_cast<std::size_t>(h);
}

std::vector<Vec3> VoxelGrid::centers() const {
  std::vector<Vec3> out;
  out.reserve(voxels.size());
  for (const Voxel& v : voxels) out.push_back(v.center);
  return out;
}

std::vector<Vec3> VoxelGrid::normals() const {
  std::vector<Vec3> out;
  out.reserve(voxels.size());
  for (const Voxel& v : voxels) out.push_back(v.normal);
  return out;
}

double default_resolution(const TargetScene& scene) {
  const double d = scene.bounds.diagonal();
  return d > 0.0 ? d / 32.0 : 1.0;
}

VoxelGrid voxelize(const TargetScene& scene, double resolution, std::size_t max_cells) {
  if (!(resolution > 0.0) || !std::isfinite(resolution))
    throw InvalidArgument("voxel resolution must be positive");
  if (scene.points.empty()) throw GeometryError("cannot voxelize an empty scene");
  const bool planar = scene.mode == SceneMode::planar2d;
  const Vec3 extent = scene.bounds.extent();
  long double cells = 1.0L;
  std::int64_t limit[3];
  for (int a = 0; a < 3; ++a) {
    const long double na = std::floor(static_cast<long double>(extent[a]) / resolution) + 1.0L;
    limit[a] = (planar && a == 2) ? 1 : static_cast<std::int64_t>(std::min<long double>(na, 4.0e18L));
    cells *= static_cast<long double>(limit[a]);
  }
  if (cells > static_cast<long double>(max_cells))
    throw GeometryError("voxel resolution " + std::to_string(resolution) + " yields more than " +
                        std::to_string(max_cells) + " cells");

  VoxelGrid grid;
  grid.resolution = resolution;
  grid.origin = scene.bounds.min;
  grid.mode = scene.mode;
  grid.voxel_of_point.resize(scene.points.size());

  std::vector<std::pair<CellKey, std::size_t>> keyed;
  keyed.reserve(scene.points.size());
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    const Vec3 rel = (scene.points[i] - grid.origin) / resolution;
    std::int64_t c[3];
    for (int a = 0; a < 3; ++a)
      c[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(rel[a])), 0, limit[a] - 1);
    keyed.push_back({CellKey{c[0], c[1], c[2]}, i});
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& l, const auto& r) {
    return std::tie(l.first.x, l.first.y, l.first.z) < std::tie(r.first.x, r.first.y, r.first.z);
  });
  for (const auto& [key, point] : keyed) {
    auto it = grid.index.find(key);
    if (it == grid.index.end()) {
      Voxel v;
      v.cell = key;
      v.center = grid.origin + resolution * Vec3(static_cast<double>(key.x) + 0.5,
                                                 static_cast<double>(key.y) + 0.5,
                                                 static_cast<double>(key.z) + 0.5);
      if (planar) v.center.z() = scene.points[point].z();
      it = grid.index.emplace(key, grid.voxels.size()).first;
      grid.voxels.push_back(std::move(v));
    }
    grid.voxels[it->second].members.push_back(point);
    grid.voxel_of_point[point] = it->second;
  }
  for (Voxel& v : grid.voxels) {
    Vec3 mean = Vec3::Zero();
    for (std::size_t m : v.members) mean += scene.normals[m];
    if (mean.norm() > 1e-9) {
      v.normal = mean.normalized();
    } else {
      std::size_t best = v.members.front();
      for (std::size_t m : v.members)
        if ((scene.points[m] - v.center).squaredNorm() < (scene.points[best] - v.center).squaredNorm())
          best = m;
      v.normal = scene.normals[best];
    }
  }
  return grid;
}

}  // namespace neofcam
