#ifndef POINCARE_MEASURES_HPP_
#define POINCARE_MEASURES_HPP_

#include <array>
#include <iosfwd>
#include <string_view>
#include <utility>
#include <vector>

#include "poincare/mesh.hpp"
#include "poincare/types.hpp"

namespace poincare {

enum class DensityKind {
  kTrimodal,               // sum_i exp(-|x - c_i|^2 / sigma2)
  kRing,                   // exp(-(|x| - r)^2 / sigma2)
  kUniformRegion,          // indicator of a polygon union
  kUniformRegionEpsilon,   // indicator + epsilon * indicator of a hull
  kGaussian,               // exp(-|x - c|^2 / (2 sigma2)), isotropic
  kCustom,                 // tabulated element masses, no pointwise evaluator
};

std::string_view to_string(DensityKind kind);
DensityKind density_kind_from_string(std::string_view name);

// Unnormalized Lebesgue density on the plane. `shift` translates the whole
// density: the evaluated value at x is the base value at x - shift.
struct DensitySpec {
  DensityKind kind = DensityKind::kTrimodal;
  double sigma2 = 0.0;
  std::vector<Vec2> centers;
  double radius = 0.0;
  double epsilon = 0.0;
  Region region;
  Region hull;
  Vec2 shift = Vec2::Zero();

  static DensitySpec trimodal(double sigma2 = 0.025);
  static DensitySpec ring(double radius = 0.65, double sigma2 = 0.0032);
  static DensitySpec uniform_region(Region region);
  static DensitySpec uniform_region_epsilon(Region region, Region hull, double epsilon);
  static DensitySpec gaussian(const Vec2& mean, double sigma2);

  // Throws kInvalidArgument when the parameters violate the kind's domain.
  void validate() const;

  // True for the indicator-type kinds (discontinuous across region edges).
  bool piecewise_constant() const;
};

// The three mode centres of the trimodal benchmark.
std::vector<Vec2> trimodal_centers();

// H-shaped benchmark region: two vertical bars joined by a thin bridge.
Region h_shape_region();

double eval_density(const DensitySpec& spec, const Vec2& x);

// Gradient of the potential V = -log(density); zero for the uniform kinds.
Vec2 potential_gradient(const DensitySpec& spec, const Vec2& x);

// Normalized measure discretized on a mesh. Every integral against the
// measure uses the same three-point edge-midpoint rule: `edge_weight[m][e]`
// is the probability mass attached to the midpoint of the edge joining the
// local vertices e and (e + 1) % 3 of element m.
struct DensityField {
  std::vector<double> element_mass;
  std::vector<std::array<double, 3>> edge_weight;
  Vec2 mean = Vec2::Zero();
  Mat2 covariance = Mat2::Zero();
  double trace_cov = 0.0;

  std::size_t element_count() const { return element_mass.size(); }
};

// Midpoint of edge e of element m (see DensityField).
Vec2 edge_midpoint(const TriMesh& mesh, std::size_t m, int e);

// Integrates `spec` over every element; throws kDegenerateMeasure when the
// density vanishes on the whole mesh.
DensityField element_masses(const TriMesh& mesh, const DensitySpec& spec);

// Field from externally tabulated element masses (normalized here). Each
// element's mass is split evenly over its three quadrature points.
DensityField field_from_masses(const TriMesh& mesh, std::vector<double> masses);

// Reads "elem_id,mass" rows (header optional) for a mesh of `element_count`
// elements.
std::vector<double> load_masses_csv(std::istream& in, std::size_t element_count);

// Recomputes mean and covariance from the quadrature weights.
std::pair<Vec2, Mat2> moments_of_field(const DensityField& field, const TriMesh& mesh);

// Integral of a scalar function against the discretized measure.
template <typename F>
double integrate(const DensityField& field, const TriMesh& mesh, F&& f) {
  double total = 0.0;
  for (std::size_t m = 0; m < field.element_count(); ++m) {
    for (int e = 0; e < 3; ++e) {
      const double w = field.edge_weight[m][static_cast<std::size_t>(e)];
      if (w != 0.0) total += w * f(edge_midpoint(mesh, m, e), m);
    }
  }
  return total;
}

}  // namespace poincare

#endif  // POINCARE_MEASURES_HPP_
