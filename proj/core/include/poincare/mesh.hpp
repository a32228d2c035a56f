#ifndef POINCARE_MESH_HPP_
#define POINCARE_MESH_HPP_

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "poincare/types.hpp"

namespace poincare {

// Simple polygon given by its vertex loop (either orientation, no repeat of
// the first vertex at the end).
struct Polygon {
  std::vector<Vec2> vertices;

  double signed_area() const;
  // Closed-set containment: points on the boundary count as inside.
  bool contains(const Vec2& p) const;
};

// Finite union of simple polygons.
using Region = std::vector<Polygon>;

bool region_contains(const Region& region, const Vec2& p);

// Sum of polygon areas; polygons of a region are assumed not to overlap.
double region_area(const Region& region);

Polygon rectangle(const BBox& box);

using Triangle = std::array<int, 3>;

// Affine P1 geometry of one triangle. The hat-function gradients are
// constant on the element.
struct ElementGeom {
  double area = 0.0;
  std::array<Vec2, 3> basis_grads;
  Vec2 centroid;
};

// 2D conforming triangulation. Construction validates the invariants
// (valid distinct indices, strictly positive orientation) and precomputes
// per-element geometry; the object is immutable afterwards.
class TriMesh {
 public:
  TriMesh(std::vector<Vec2> nodes, std::vector<Triangle> triangles,
          Region region = {});

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t element_count() const { return triangles_.size(); }

  const std::vector<Vec2>& nodes() const { return nodes_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Region& region() const { return region_; }

  const Vec2& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const Triangle& triangle(std::size_t m) const { return triangles_[m]; }
  const ElementGeom& geom(std::size_t m) const { return geom_[m]; }
  const Vec2& vertex(std::size_t m, int local) const {
    return node(triangles_[m][static_cast<std::size_t>(local)]);
  }

  double total_area() const;
  const BBox& bbox() const { return bbox_; }

  // Barycentric coordinates of `p` with respect to element m.
  std::array<double, 3> barycentric(std::size_t m, const Vec2& p) const;

 private:
  std::vector<Vec2> nodes_;
  std::vector<Triangle> triangles_;
  Region region_;
  std::vector<ElementGeom> geom_;
  BBox bbox_;
};

// Structured grid of nx*ny cells over `box`, each cell split along one
// diagonal. The diagonal alternates with the parity of (i + j), so for even
// nx (ny) the mesh is mirror-symmetric about the vertical (horizontal)
// midline.
TriMesh build_rect_mesh(const BBox& box, int nx, int ny);

// Keeps the triangles of `base` whose centroid lies in `region` and
// renumbers the used nodes densely (in increasing original order).
TriMesh build_masked_mesh(const TriMesh& base, const Region& region);

// JSON mesh document: {"nodes": [[x,y],...], "triangles": [[i,j,k],...],
// "region": [[[x,y],...], ...]} ("region" optional).
TriMesh load_mesh(std::istream& in);
void save_mesh(std::ostream& out, const TriMesh& mesh);

// Uniform bucket grid over the mesh bounding box. Each bucket lists, in
// ascending order, the elements whose bounding box overlaps it, so the
// first hit during a query is the lowest-index containing element.
class PointLocator {
 public:
  explicit PointLocator(const TriMesh& mesh);

  // Element whose closed triangle contains `p`, or nullopt when outside.
  std::optional<std::size_t> locate(const Vec2& p) const;

  // Element with the nearest centroid (never fails on a nonempty mesh).
  std::size_t nearest_element(const Vec2& p) const;

  const TriMesh& mesh() const { return *mesh_; }

 private:
  bool contains(std::size_t m, const Vec2& p) const;
  std::size_t bucket_of(const Vec2& p) const;

  const TriMesh* mesh_;
  int cols_ = 1;
  int rows_ = 1;
  Vec2 origin_;
  Vec2 cell_;
  std::vector<std::vector<std::size_t>> buckets_;
};

}  // namespace poincare

#endif  // POINCARE_MESH_HPP_
