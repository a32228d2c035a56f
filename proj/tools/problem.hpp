#ifndef POINCARE_TOOLS_PROBLEM_HPP_
#define POINCARE_TOOLS_PROBLEM_HPP_

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "poincare/measures.hpp"
#include "poincare/mesh.hpp"
#include "run_config.hpp"

namespace poincare::cli {

// Mesh plus discretized measure for one run.
struct Problem {
  std::string name;
  std::unique_ptr<TriMesh> mesh;
  std::optional<DensitySpec> spec;  // absent for tabulated masses
  DensityField field;

  // grad V for the sampler; throws when the measure has no evaluator.
  std::function<Vec2(const Vec2&)> grad_potential() const;
};

// trimodal, ring, hshape, hshape-eps, uniform-square, custom.
const std::vector<std::string>& benchmark_names();

// Builds the benchmark's mesh and measure with the config's overrides.
// "custom" needs mesh.file and density.masses.
Problem make_problem(const RunConfig& config);

}  // namespace poincare::cli

#endif  // POINCARE_TOOLS_PROBLEM_HPP_
