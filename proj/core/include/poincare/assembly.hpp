#ifndef POINCARE_ASSEMBLY_HPP_
#define POINCARE_ASSEMBLY_HPP_

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/SparseCore>

#include "poincare/measures.hpp"
#include "poincare/mesh.hpp"
#include "poincare/types.hpp"

namespace poincare {

// Symmetric sparse matrix stored in full (both triangles), column-major.
using SparseSym = Eigen::SparseMatrix<double>;

// Piecewise-constant SPD metric, one 2x2 matrix per element.
using MetricField = MatField;

// Per-element second-moment tensors of the hat-function gradients:
// block(m, a, b) = integral over element m of grad(phi_a) grad(phi_b)^T dmu,
// which for P1 elements is mass[m] * g_a g_b^T.
struct ElemStiffTensor {
  std::size_t node_count = 0;
  std::vector<Triangle> triangles;
  std::vector<double> mass;
  std::vector<std::array<Vec2, 3>> grads;
  std::vector<std::array<Mat2, 9>> blocks;

  std::size_t element_count() const { return triangles.size(); }
  const Mat2& block(std::size_t m, int a, int b) const {
    return blocks[m][static_cast<std::size_t>(3 * a + b)];
  }
};

// M_ij = integral of phi_i phi_j dmu with the field's quadrature rule.
// Throws kDegenerateMeasure if every entry vanishes.
SparseSym assemble_mass(const TriMesh& mesh, const DensityField& field);

ElemStiffTensor assemble_elem_stiffness(const TriMesh& mesh, const DensityField& field);

// K^W_ij = sum_m trace(K_{i,j,m} W_m). Throws kInvalidMetric if some W_m is
// not symmetric and kInvalidArgument on an element-count mismatch.
SparseSym assemble_weighted_stiffness(const ElemStiffTensor& tensors, const MetricField& metric);

// Repeated weighted assembly on a fixed sparsity pattern. The element ->
// value-slot map is computed once, so each call is a pure contraction that
// accumulates in element order (bitwise reproducible).
class WeightedStiffnessAssembler {
 public:
  explicit WeightedStiffnessAssembler(const ElemStiffTensor& tensors);

  SparseSym assemble(const MetricField& metric) const;

  const ElemStiffTensor& tensors() const { return *tensors_; }

 private:
  const ElemStiffTensor* tensors_;
  SparseSym pattern_;
  // slots_[m][3 * a + b]: index into the value array for local pair (a, b).
  std::vector<std::array<Eigen::Index, 9>> slots_;
};

// Throws kInvalidMetric when some matrix is not symmetric (relative 1e-12)
// or not finite.
void check_metric(const MetricField& metric);

}  // namespace poincare

#endif  // POINCARE_ASSEMBLY_HPP_
