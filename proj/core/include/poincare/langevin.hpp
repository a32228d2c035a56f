#ifndef POINCARE_LANGEVIN_HPP_
#define POINCARE_LANGEVIN_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "poincare/assembly.hpp"
#include "poincare/measures.hpp"
#include "poincare/mesh.hpp"
#include "poincare/types.hpp"

namespace poincare {

// raw: -W grad V with W piecewise constant (div W = 0 inside elements).
// smoothed: div W - W grad V for the nodal average of W (continuous, P1).
// stein: -(x - m), the gradient-free drift of a Stein kernel.
enum class DriftMode { kRaw, kSmoothed, kStein };

std::string_view to_string(DriftMode mode);
DriftMode drift_mode_from_string(std::string_view name);

Vec2 drift(DriftMode mode, const Mat2& w, const Vec2& div_w, const Vec2& grad_v, const Vec2& mean,
           const Vec2& x);

// Symmetric square root with negative eigenvalues clipped at zero.
Mat2 psd_sqrt(const Mat2& w);

struct LocalMetric {
  Mat2 w = Mat2::Identity();
  Vec2 div = Vec2::Zero();
  bool outside = false;
};

// Metric seen by the sampler. On a mesh, points outside every element take
// W and div W from the element with the nearest centroid.
class MeshMetric {
 public:
  static MeshMetric constant(const Mat2& w);

  // Nodal values for the smoothed mode are averages of the incident
  // elements weighted by their probability mass (by area where all of
  // them carry none).
  MeshMetric(const TriMesh& mesh, MetricField metric, const DensityField& field);

  // raw and stein use the element value, smoothed the P1 interpolant.
  LocalMetric at(const Vec2& x, DriftMode mode) const;

  bool on_mesh() const { return mesh_ != nullptr; }
  const std::vector<Mat2>& nodal() const { return nodal_; }
  // Divergence of the smoothed field, constant per element.
  const std::vector<Vec2>& element_divergence() const { return div_; }

 private:
  MeshMetric() = default;

  const TriMesh* mesh_ = nullptr;
  std::shared_ptr<const PointLocator> locator_;
  MetricField element_;
  std::vector<Mat2> nodal_;
  std::vector<Vec2> div_;
  Mat2 constant_ = Mat2::Identity();
};

struct SamplerConfig {
  DriftMode drift = DriftMode::kSmoothed;
  double dt = 0.01;
  int steps = 1000;
  Vec2 x0 = Vec2::Zero();
  double x0_spread = 0.0;  // x0 + spread * Z when positive
  std::uint64_t seed = 0;
  std::uint64_t chain_id = 0;
  Vec2 mean = Vec2::Zero();                         // m, for the stein drift
  std::function<Vec2(const Vec2&)> grad_potential;  // grad V, V = -log density

  // Throws kInvalidArgument unless dt > 0, steps >= 1 and x0 is finite.
  void validate() const;
};

struct ChainTrace {
  std::vector<Vec2> positions;  // steps + 1 rows; row 0 is the start
  int exited_mesh_count = 0;    // steps that ended outside the mesh
  SamplerConfig config;
};

// X + (div W - W grad V) dt + sqrt(2 dt W) Z with Z drawn from
// (seed, chain_id, step). Sets *outside when x lies off the mesh.
Vec2 ula_step(const Vec2& x, const MeshMetric& metric, const SamplerConfig& config,
              std::uint64_t step, bool* outside = nullptr);

// Throws kDivergence with the step index on a non-finite position.
ChainTrace run_chain(const SamplerConfig& config, const MeshMetric& metric);

// Chains 0..count-1 (chain_id = first_id + i), in parallel.
std::vector<ChainTrace> run_chains(const SamplerConfig& config, const MeshMetric& metric, int count,
                                   int threads = 1);

// Sokal's estimator: tau = 1/2 + sum_{t=1}^{M} rho(t) with the smallest
// window M >= c tau(M). Autocovariances by FFT. In units of steps.
struct AutocorrelationTime {
  double tau = 0.0;
  int window = 0;
};
AutocorrelationTime integrated_autocorrelation_time(const std::vector<double>& series,
                                                    double c = 6.0);

struct ChainReport {
  std::string drift;
  int steps = 0;
  double dt = 0.0;
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Zero();
  Vec2 mean_ref = Vec2::Zero();  // quadrature moments of the target
  Mat2 cov_ref = Mat2::Zero();
  double tau_int = 0.0;  // of u2(X_n), in steps
  int tau_window = 0;
  double gap_est = 0.0;  // 1 / (dt tau_int)
  double occupancy_tv = 0.0;
  double exited_fraction = 0.0;
  bool exit_flag = false;  // exited_fraction above 1%
};

// u2 holds nodal coefficients of the observable; points off the mesh use
// the nearest element with clamped barycentric weights. Occupancy off the
// mesh counts toward the total-variation distance. Throws kInvalidArgument
// for traces shorter than 100 positions.
ChainReport diagnostics(const ChainTrace& trace, const DensityField& field, const TriMesh& mesh,
                        const Eigen::VectorXd& u2);

}  // namespace poincare

#endif  // POINCARE_LANGEVIN_HPP_
