#include "poincare/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "poincare/error.hpp"

namespace poincare {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b, double tol) {
  const Vec2 ab = b - a;
  const Vec2 ap = p - a;
  const double len2 = ab.squaredNorm();
  if (std::abs(cross(ab, ap)) > tol * std::sqrt(len2)) return false;
  const double t = ap.dot(ab);
  return t >= -tol * std::sqrt(len2) && t <= len2 + tol * std::sqrt(len2);
}

}  // namespace

double Polygon::signed_area() const {
  double twice = 0.0;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    twice += cross(vertices[i], vertices[(i + 1) % n]);
  }
  return 0.5 * twice;
}

bool Polygon::contains(const Vec2& p) const {
  const std::size_t n = vertices.size();
  if (n < 3) return false;
  constexpr double kTol = 1e-12;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[j];
    if (on_segment(p, a, b, kTol)) return true;
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool region_contains(const Region& region, const Vec2& p) {
  return std::any_of(region.begin(), region.end(),
                     [&](const Polygon& poly) { return poly.contains(p); });
}

double region_area(const Region& region) {
  double total = 0.0;
  for (const auto& poly : region) total += std::abs(poly.signed_area());
  return total;
}

Polygon rectangle(const BBox& box) {
  return Polygon{{box.lo, Vec2(box.hi.x(), box.lo.y()), box.hi, Vec2(box.lo.x(), box.hi.y())}};
}

TriMesh::TriMesh(std::vector<Vec2> nodes, std::vector<Triangle> triangles, Region region)
    : nodes_(std::move(nodes)), triangles_(std::move(triangles)), region_(std::move(region)) {
  if (nodes_.empty() || triangles_.empty()) {
    throw Error(ErrorCode::kEmptyMesh, "mesh has no nodes or no triangles");
  }
  bbox_.lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  bbox_.hi = -bbox_.lo;
  for (const auto& x : nodes_) {
    if (!x.allFinite()) throw Error(ErrorCode::kInvalidGeometry, "non-finite node coordinate");
    bbox_.lo = bbox_.lo.cwiseMin(x);
    bbox_.hi = bbox_.hi.cwiseMax(x);
  }
  const double scale2 = std::max((bbox_.hi - bbox_.lo).squaredNorm(), 1e-300);
  const int n = static_cast<int>(nodes_.size());

  geom_.reserve(triangles_.size());
  for (std::size_t m = 0; m < triangles_.size(); ++m) {
    const Triangle& t = triangles_[m];
    for (int idx : t) {
      if (idx < 0 || idx >= n) {
        throw Error(ErrorCode::kInvalidGeometry,
                    "triangle " + std::to_string(m) + " has out-of-range node index");
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw Error(ErrorCode::kInvalidGeometry,
                  "triangle " + std::to_string(m) + " repeats a node index");
    }
    const Vec2& a = node(t[0]);
    const Vec2& b = node(t[1]);
    const Vec2& c = node(t[2]);
    const double twice_area = cross(b - a, c - a);
    if (!(twice_area > 1e-14 * scale2)) {
      throw Error(ErrorCode::kInvalidGeometry,
                  "triangle " + std::to_string(m) + " is inverted or degenerate");
    }
    ElementGeom g;
    g.area = 0.5 * twice_area;
    g.centroid = (a + b + c) / 3.0;
    // grad(phi_i) is the inward normal of the opposite edge scaled by
    // |edge| / (2 * area): rotate the edge (j -> k) by +90 degrees.
    const std::array<Vec2, 3> p = {a, b, c};
    for (int i = 0; i < 3; ++i) {
      const Vec2 e = p[(i + 2) % 3] - p[(i + 1) % 3];
      g.basis_grads[i] = Vec2(-e.y(), e.x()) / twice_area;
    }
    geom_.push_back(g);
  }
}

double TriMesh::total_area() const {
  double total = 0.0;
  for (const auto& g : geom_) total += g.area;
  return total;
}

std::array<double, 3> TriMesh::barycentric(std::size_t m, const Vec2& p) const {
  const ElementGeom& g = geom_[m];
  const Vec2 d = p - g.centroid;
  return {1.0 / 3.0 + g.basis_grads[0].dot(d), 1.0 / 3.0 + g.basis_grads[1].dot(d),
          1.0 / 3.0 + g.basis_grads[2].dot(d)};
}

TriMesh build_rect_mesh(const BBox& box, int nx, int ny) {
  if (nx < 1 || ny < 1) {
    throw Error(ErrorCode::kInvalidGeometry, "grid counts must be positive");
  }
  if (!(box.width() > 0.0) || !(box.height() > 0.0) || !box.lo.allFinite() ||
      !box.hi.allFinite()) {
    throw Error(ErrorCode::kInvalidGeometry, "degenerate bounding box");
  }
  std::vector<Vec2> nodes;
  nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j) {
    // Pin the last row/column to the exact box edge.
    const double y = j == ny ? box.hi.y() : box.lo.y() + box.height() * j / ny;
    for (int i = 0; i <= nx; ++i) {
      const double x = i == nx ? box.hi.x() : box.lo.x() + box.width() * i / nx;
      nodes.emplace_back(x, y);
    }
  }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<Triangle> tris;
  tris.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int n00 = id(i, j), n10 = id(i + 1, j), n01 = id(i, j + 1), n11 = id(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        tris.push_back({n00, n10, n11});
        tris.push_back({n00, n11, n01});
      } else {
        tris.push_back({n00, n10, n01});
        tris.push_back({n10, n11, n01});
      }
    }
  }
  return TriMesh(std::move(nodes), std::move(tris), Region{rectangle(box)});
}

TriMesh build_masked_mesh(const TriMesh& base, const Region& region) {
  std::vector<int> remap(base.node_count(), -1);
  std::vector<std::size_t> kept;
  for (std::size_t m = 0; m < base.element_count(); ++m) {
    if (region_contains(region, base.geom(m).centroid)) {
      kept.push_back(m);
      for (int idx : base.triangle(m)) remap[static_cast<std::size_t>(idx)] = 0;
    }
  }
  if (kept.empty()) {
    throw Error(ErrorCode::kEmptyMesh, "mask region does not intersect the mesh");
  }
  std::vector<Vec2> nodes;
  for (std::size_t i = 0; i < remap.size(); ++i) {
    if (remap[i] == 0) {
      remap[i] = static_cast<int>(nodes.size());
      nodes.push_back(base.nodes()[i]);
    }
  }
  std::vector<Triangle> tris;
  tris.reserve(kept.size());
  for (std::size_t m : kept) {
    const Triangle& t = base.triangle(m);
    tris.push_back({remap[static_cast<std::size_t>(t[0])], remap[static_cast<std::size_t>(t[1])],
                    remap[static_cast<std::size_t>(t[2])]});
  }
  return TriMesh(std::move(nodes), std::move(tris), region);
}

PointLocator::PointLocator(const TriMesh& mesh) : mesh_(&mesh) {
  const BBox& box = mesh.bbox();
  const double n = static_cast<double>(mesh.element_count());
  // Roughly two elements per bucket.
  const double aspect = std::max(box.width(), 1e-300) / std::max(box.height(), 1e-300);
  cols_ = std::clamp(static_cast<int>(std::ceil(std::sqrt(n / 2.0 * aspect))), 1, 4096);
  rows_ = std::clamp(static_cast<int>(std::ceil(n / 2.0 / cols_)), 1, 4096);
  origin_ = box.lo;
  cell_ = Vec2(std::max(box.width(), 1e-300) / cols_, std::max(box.height(), 1e-300) / rows_);
  buckets_.assign(static_cast<std::size_t>(cols_ * rows_), {});

  for (std::size_t m = 0; m < mesh.element_count(); ++m) {
    Vec2 lo = mesh.vertex(m, 0), hi = lo;
    for (int a = 1; a < 3; ++a) {
      lo = lo.cwiseMin(mesh.vertex(m, a));
      hi = hi.cwiseMax(mesh.vertex(m, a));
    }
    auto clamp_col = [&](double x) {
      return std::clamp(static_cast<int>(std::floor((x - origin_.x()) / cell_.x())), 0, cols_ - 1);
    };
    auto clamp_row = [&](double y) {
      return std::clamp(static_cast<int>(std::floor((y - origin_.y()) / cell_.y())), 0, rows_ - 1);
    };
    // Tiny pad so points on bucket seams land in both neighbours.
    const double pad_x = 1e-9 * cell_.x(), pad_y = 1e-9 * cell_.y();
    for (int r = clamp_row(lo.y() - pad_y); r <= clamp_row(hi.y() + pad_y); ++r) {
      for (int c = clamp_col(lo.x() - pad_x); c <= clamp_col(hi.x() + pad_x); ++c) {
        buckets_[static_cast<std::size_t>(r * cols_ + c)].push_back(m);
      }
    }
  }
}

bool PointLocator::contains(std::size_t m, const Vec2& p) const {
  constexpr double kTol = 1e-12;
  const auto b = mesh_->barycentric(m, p);
  return b[0] >= -kTol && b[1] >= -kTol && b[2] >= -kTol;
}

std::size_t PointLocator::bucket_of(const Vec2& p) const {
  const int c = std::clamp(static_cast<int>(std::floor((p.x() - origin_.x()) / cell_.x())), 0,
                           cols_ - 1);
  const int r = std::clamp(static_cast<int>(std::floor((p.y() - origin_.y()) / cell_.y())), 0,
                           rows_ - 1);
  return static_cast<std::size_t>(r * cols_ + c);
}

std::optional<std::size_t> PointLocator::locate(const Vec2& p) const {
  if (!p.allFinite()) return std::nullopt;
  const BBox& box = mesh_->bbox();
  const double tol = 1e-12 * std::max(box.width(), box.height());
  if (p.x() < box.lo.x() - tol || p.x() > box.hi.x() + tol || p.y() < box.lo.y() - tol ||
      p.y() > box.hi.y() + tol) {
    return std::nullopt;
  }
  for (std::size_t m : buckets_[bucket_of(p)]) {
    if (contains(m, p)) return m;
  }
  return std::nullopt;
}

std::size_t PointLocator::nearest_element(const Vec2& p) const {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < mesh_->element_count(); ++m) {
    const double d2 = (mesh_->geom(m).centroid - p).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = m;
    }
  }
  return best;
}

}  // namespace poincare
