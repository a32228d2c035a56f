#include "poincare/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "poincare/error.hpp"

namespace poincare {

namespace {

using Triplet = Eigen::Triplet<double>;

// Hat function a evaluated at the midpoint of edge e (vertices e, e+1).
double hat_at_midpoint(int a, int e) { return (a == e || a == (e + 1) % 3) ? 0.5 : 0.0; }

}  // namespace

void check_metric(const MetricField& metric) {
  for (std::size_t m = 0; m < metric.size(); ++m) {
    const Mat2& w = metric[m];
    if (!w.allFinite()) {
      throw Error(ErrorCode::kInvalidMetric, "metric of element " + std::to_string(m) +
                                                 " is not finite");
    }
    const double scale = w.cwiseAbs().maxCoeff();
    if (std::abs(w(0, 1) - w(1, 0)) > 1e-12 * scale) {
      throw Error(ErrorCode::kInvalidMetric, "metric of element " + std::to_string(m) +
                                                 " is not symmetric");
    }
  }
}

SparseSym assemble_mass(const TriMesh& mesh, const DensityField& field) {
  if (field.element_count() != mesh.element_count()) {
    throw Error(ErrorCode::kInvalidArgument, "density field does not match the mesh");
  }
  std::vector<Triplet> triplets;
  triplets.reserve(9 * mesh.element_count());
  bool any = false;
  for (std::size_t m = 0; m < mesh.element_count(); ++m) {
    const Triangle& t = mesh.triangle(m);
    const auto& w = field.edge_weight[m];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        double v = 0.0;
        for (int e = 0; e < 3; ++e) {
          v += w[static_cast<std::size_t>(e)] * hat_at_midpoint(a, e) * hat_at_midpoint(b, e);
        }
        any = any || v != 0.0;
        triplets.emplace_back(t[static_cast<std::size_t>(a)], t[static_cast<std::size_t>(b)], v);
      }
    }
  }
  if (!any) throw Error(ErrorCode::kDegenerateMeasure, "mass matrix is identically zero");
  const auto n = static_cast<Eigen::Index>(mesh.node_count());
  SparseSym mass(n, n);
  mass.setFromTriplets(triplets.begin(), triplets.end());
  mass.makeCompressed();
  return mass;
}

ElemStiffTensor assemble_elem_stiffness(const TriMesh& mesh, const DensityField& field) {
  if (field.element_count() != mesh.element_count()) {
    throw Error(ErrorCode::kInvalidArgument, "density field does not match the mesh");
  }
  ElemStiffTensor out;
  out.node_count = mesh.node_count();
  out.triangles = mesh.triangles();
  out.mass = field.element_mass;
  out.grads.resize(mesh.element_count());
  out.blocks.resize(mesh.element_count());
  for (std::size_t m = 0; m < mesh.element_count(); ++m) {
    const auto& g = mesh.geom(m).basis_grads;
    out.grads[m] = g;
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = 0; b < 3; ++b) {
        out.blocks[m][3 * a + b] = field.element_mass[m] * g[a] * g[b].transpose();
      }
    }
  }
  return out;
}

SparseSym assemble_weighted_stiffness(const ElemStiffTensor& tensors, const MetricField& metric) {
  return WeightedStiffnessAssembler(tensors).assemble(metric);
}

WeightedStiffnessAssembler::WeightedStiffnessAssembler(const ElemStiffTensor& tensors)
    : tensors_(&tensors) {
  const auto n = static_cast<Eigen::Index>(tensors.node_count);
  std::vector<Triplet> triplets;
  triplets.reserve(9 * tensors.element_count());
  for (const Triangle& t : tensors.triangles) {
    for (int a : t) {
      for (int b : t) triplets.emplace_back(a, b, 1.0);
    }
  }
  pattern_.resize(n, n);
  pattern_.setFromTriplets(triplets.begin(), triplets.end());
  pattern_.makeCompressed();

  slots_.resize(tensors.element_count());
  const auto* outer = pattern_.outerIndexPtr();
  const auto* inner = pattern_.innerIndexPtr();
  for (std::size_t m = 0; m < tensors.element_count(); ++m) {
    const Triangle& t = tensors.triangles[m];
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = 0; b < 3; ++b) {
        // Column t[b], row t[a].
        const auto* first = inner + outer[t[b]];
        const auto* last = inner + outer[t[b] + 1];
        const auto* it = std::lower_bound(first, last, t[a]);
        slots_[m][3 * a + b] = static_cast<Eigen::Index>(it - inner);
      }
    }
  }
}

SparseSym WeightedStiffnessAssembler::assemble(const MetricField& metric) const {
  const ElemStiffTensor& k = *tensors_;
  if (metric.size() != k.element_count()) {
    throw Error(ErrorCode::kInvalidArgument, "metric field does not match the element count");
  }
  check_metric(metric);
  SparseSym out = pattern_;
  double* values = out.valuePtr();
  std::fill(values, values + out.nonZeros(), 0.0);
  for (std::size_t m = 0; m < k.element_count(); ++m) {
    const Mat2& w = metric[m];
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = a; b < 3; ++b) {
        const double v = (k.blocks[m][3 * a + b].cwiseProduct(w.transpose())).sum();
        values[slots_[m][3 * a + b]] += v;
        if (b != a) values[slots_[m][3 * b + a]] += v;
      }
    }
  }
  return out;
}

}  // namespace poincare
