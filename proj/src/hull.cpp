#include "neofcam/hull.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace neofcam {
namespace {

struct Face {
  std::array<std::size_t, 3> v;
  Vec3 normal;
  double offset;
  bool alive;
};

Face make_face(std::span<const Vec3> pts, std::size_t a, std::size_t b, std::size_t c) {
  Face f{{a, b, c}, Vec3::Zero(), 0.0, true};
  const Vec3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
  const double len = n.norm();
  if (len > 0.0) f.normal = n / len;
  f.offset = f.normal.dot(pts[a]);
  return f;
}

std::vector<std::size_t> extremes_along(std::span<const Vec3> pts, const Vec3& dir) {
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double s = dir.dot(pts[i]);
    if (s < dir.dot(pts[lo])) lo = i;
    if (s > dir.dot(pts[hi])) hi = i;
  }
  std::vector<std::size_t> out{lo, hi};
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

bool Hull3::contains_strictly(const Vec3& p, double tol) const {
  if (dimension != 3) return false;
  for (std::size_t f = 0; f < face_normals.size(); ++f)
    if (face_normals[f].dot(p) - face_offsets[f] >= -tol) return false;
  return true;
}

Hull3 convex_hull_3d(std::span<const Vec3> pts, double rel_eps) {
  Hull3 hull;
  const std::size_t n = pts.size();
  if (n == 0) throw InvalidArgument("convex_hull_3d: empty point set");

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : pts) centroid += p;
  centroid /= static_cast<double>(n);
  double scale = 0.0;
  for (const Vec3& p : pts) scale = std::max(scale, (p - centroid).lpNorm<Eigen::Infinity>());
  for (const Vec3& p : pts) scale = std::max(scale, p.lpNorm<Eigen::Infinity>() * 1e-3);
  const double eps = rel_eps * std::max(scale, 1e-300);

  // initial simplex from axis extremes
  std::array<std::size_t, 6> ext{};
  for (int a = 0; a < 3; ++a) {
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (pts[i][a] < pts[lo][a]) lo = i;
      if (pts[i][a] > pts[hi][a]) hi = i;
    }
    ext[2 * a] = lo;
    ext[2 * a + 1] = hi;
  }
  std::size_t ia = ext[0], ib = ext[1];
  double best = -1.0;
  for (std::size_t s = 0; s < 6; ++s)
    for (std::size_t t = s + 1; t < 6; ++t) {
      const double d = (pts[ext[s]] - pts[ext[t]]).squaredNorm();
      if (d > best) { best = d; ia = ext[s]; ib = ext[t]; }
    }
  if (std::sqrt(best) <= eps) {
    hull.dimension = 0;
    hull.vertices = {ia};
    return hull;
  }
  const Vec3 dir = (pts[ib] - pts[ia]).normalized();
  std::size_t ic = ia;
  double dline = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 d = pts[i] - pts[ia];
    const double dist = (d - d.dot(dir) * dir).norm();
    if (dist > dline) { dline = dist; ic = i; }
  }
  if (dline <= eps) {
    hull.dimension = 1;
    hull.vertices = extremes_along(pts, dir);
    return hull;
  }
  const Vec3 pn = (pts[ib] - pts[ia]).cross(pts[ic] - pts[ia]).normalized();
  std::size_t id = ia;
  double dplane = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dist = std::abs(pn.dot(pts[i] - pts[ia]));
    if (dist > dplane) { dplane = dist; id = i; }
  }
  if (dplane <= eps) {
    hull.dimension = 2;
    const Vec3 u = dir;
    const Vec3 v = pn.cross(u);
    std::vector<Vec2> flat(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 d = pts[i] - pts[ia];
      flat[i] = Vec2(d.dot(u), d.dot(v));
    }
    hull.vertices = convex_hull_2d(flat, rel_eps);
    std::sort(hull.vertices.begin(), hull.vertices.end());
    return hull;
  }

  hull.dimension = 3;
  std::vector<Face> faces;
  std::unordered_map<std::uint64_t, std::size_t> edge_face;
  auto edge_key = [n](std::size_t a, std::size_t b) {
    return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(n) + b;
  };
  auto add_face = [&](std::size_t a, std::size_t b, std::size_t c) {
    faces.push_back(make_face(pts, a, b, c));
    const std::size_t f = faces.size() - 1;
    edge_face[edge_key(a, b)] = f;
    edge_face[edge_key(b, c)] = f;
    edge_face[edge_key(c, a)] = f;
  };

  const Vec3 interior = 0.25 * (pts[ia] + pts[ib] + pts[ic] + pts[id]);
  auto add_oriented = [&](std::size_t a, std::size_t b, std::size_t c) {
    const Vec3 nrm = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    if (nrm.dot(interior - pts[a]) > 0.0) std::swap(b, c);
    add_face(a, b, c);
  };
  add_oriented(ia, ib, ic);
  add_oriented(ia, ib, id);
  add_oriented(ia, ic, id);
  add_oriented(ib, ic, id);

  std::vector<std::size_t> alive{0, 1, 2, 3};
  std::vector<std::size_t> visible;
  std::vector<char> is_visible;
  std::vector<std::pair<std::size_t, std::size_t>> horizon;
  for (std::size_t p = 0; p < n; ++p) {
    if (p == ia || p == ib || p == ic || p == id) continue;
    visible.clear();
    for (std::size_t f : alive)
      if (faces[f].normal.dot(pts[p]) - faces[f].offset > eps) visible.push_back(f);
    if (visible.empty()) continue;
    is_visible.assign(faces.size(), 0);
    for (std::size_t f : visible) is_visible[f] = 1;
    horizon.clear();
    for (std::size_t f : visible) {
      const auto& v = faces[f].v;
      for (int e = 0; e < 3; ++e) {
        const std::size_t a = v[e], b = v[(e + 1) % 3];
        const auto it = edge_face.find(edge_key(b, a));
        if (it == edge_face.end() || !is_visible[it->second]) horizon.emplace_back(a, b);
      }
    }
    for (std::size_t f : visible) {
      faces[f].alive = false;
      const auto& v = faces[f].v;
      for (int e = 0; e < 3; ++e) {
        const auto it = edge_face.find(edge_key(v[e], v[(e + 1) % 3]));
        if (it != edge_face.end() && it->second == f) edge_face.erase(it);
      }
    }
    for (const auto& [a, b] : horizon) add_face(a, b, p);
    std::vector<std::size_t> next;
    next.reserve(alive.size() + horizon.size());
    for (std::size_t f : alive)
      if (faces[f].alive) next.push_back(f);
    for (std::size_t f = faces.size() - horizon.size(); f < faces.size(); ++f) next.push_back(f);
    alive.swap(next);
  }

  std::vector<char> is_vertex(n, 0);
  for (std::size_t f : alive) {
    hull.faces.push_back(faces[f].v);
    hull.face_normals.push_back(faces[f].normal);
    hull.face_offsets.push_back(faces[f].offset);
    for (std::size_t v : faces[f].v) is_vertex[v] = 1;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (is_vertex[i]) hull.vertices.push_back(i);
  return hull;
}

std::vector<std::size_t> convex_hull_2d(std::span<const Vec2> pts, double rel_eps) {
  const std::size_t n = pts.size();
  if (n == 0) return {};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return pts[l].x() < pts[r].x() || (pts[l].x() == pts[r].x() && pts[l].y() < pts[r].y());
  });
  double scale = 0.0;
  for (const Vec2& p : pts) scale = std::max(scale, (p - pts[order.front()]).lpNorm<Eigen::Infinity>());
  if (scale == 0.0) return {order.front()};
  const double eps = rel_eps * scale * scale;
  auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
    return (pts[a] - pts[o]).x() * (pts[b] - pts[o]).y() - (pts[a] - pts[o]).y() * (pts[b] - pts[o]).x();
  };
  std::vector<std::size_t> h(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], order[i]) <= eps) --k;
    h[k++] = order[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], order[i]) <= eps) --k;
    h[k++] = order[i];
  }
  h.resize(k > 1 ? k - 1 : k);
  // collapse duplicates of the lexicographic extremes (degenerate inputs)
  std::vector<std::size_t> out;
  for (std::size_t v : h)
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  return out;
}

bool convex_polygon_contains_strictly(std::span<const Vec2> ccw, const Vec2& p, double tol) {
  if (ccw.size() < 3) return false;
  for (std::size_t i = 0; i < ccw.size(); ++i) {
    const Vec2 a = ccw[i], b = ccw[(i + 1) % ccw.size()];
    const Vec2 e = b - a;
    const double len = e.norm();
    if (len == 0.0) continue;
    const double side = (e.x() * (p - a).y() - e.y() * (p - a).x()) / len;
    if (side <= tol) return false;
  }
  return true;
}

}  // namespace neofcam
