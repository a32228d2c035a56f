#ifndef POINCARE_METRIC_OPT_HPP_
#define POINCARE_METRIC_OPT_HPP_

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "poincare/assembly.hpp"
#include "poincare/eigen_solver.hpp"
#include "poincare/measures.hpp"
#include "poincare/mesh.hpp"

namespace poincare {

enum class UpdateRule { kGradientAscent, kMomentum, kNesterov };

std::string_view to_string(UpdateRule rule);
UpdateRule update_rule_from_string(std::string_view name);

// Momentum factor of the accelerated rule at iteration k: 1 - 3 / (5 + k).
double nesterov_alpha(int k);

// Sum_m |V_m|_F^2 mu_m.
double factor_norm2(const MatField& factor, const DensityField& field);

// <A, B> = sum_m trace(A_m B_m) mu_m, the L2(mu) pairing of matrix fields.
double field_inner(const MatField& a, const MatField& b, const DensityField& field);

// W_m = V_m^2 trace(Cov) / sum_m' |V_m'|_F^2 mu_m'. Throws kDegenerateFactor
// for a zero field and kInvalidMetric for a non-symmetric factor.
MetricField metric_from_factor(const MatField& factor, const DensityField& field);

// Sum_m trace(W_m) mu_m.
double metric_trace_integral(const MetricField& metric, const DensityField& field);

// Sum_m W_m mu_m.
Mat2 metric_integral(const MetricField& metric, const DensityField& field);

// Eigen-decomposition summary of one metric.
struct Spectrum {
  std::vector<double> eigenvalues;  // lambda_2, lambda_3, ... (ascending)
  Eigen::VectorXd u2;               // eigenvector of lambda_2, M-normalized
  Eigen::MatrixXd subspace;
};

struct ObjectiveEval {
  double objective = 0.0;           // J: lambda_2 of the trace-normalized metric
  std::vector<double> eigenvalues;  // lambda_2 .. lambda_{1+k}
  double gap32 = 0.0;               // lambda_3 - lambda_2 (0 when k == 1)
  Eigen::VectorXd u2;
  MatField g;                       // per-element G_m (PSD, rank one)
  MatField gradient;                // L2(mu) gradient of J with respect to V
};

// Everything that stays fixed while the metric changes: element stiffness
// tensors, the mass matrix, the fixed-pattern assembler and a cached
// eigensolver (symbolic factorization plus warm-start subspace).
class MetricProblem {
 public:
  MetricProblem(const TriMesh& mesh, const DensityField& field, EigenSolveOptions options = {});

  MetricProblem(const MetricProblem&) = delete;
  MetricProblem& operator=(const MetricProblem&) = delete;

  const TriMesh& mesh() const { return *mesh_; }
  const DensityField& field() const { return *field_; }
  const ElemStiffTensor& tensors() const { return tensors_; }
  const SparseSym& mass() const { return mass_; }

  SparseSym stiffness(const MetricField& metric) const { return assembler_.assemble(metric); }

  // The first k nonzero eigenvalues of (K^W, M); k >= 1.
  Spectrum spectrum(const MetricField& metric, int k);

  // J(V) and its gradient. With S = sum |V_m|^2 mu_m and t = trace(Cov):
  //   J = lambda_2(K^{W(V)}, M),
  //   G_m = t g_m g_m^T / (S U^T M U),  g_m = sum_a U_a grad(phi_a)|_m,
  //   grad_m = G_m V_m + V_m G_m - 2 J V_m / S,
  // which is exact for the pairing field_inner() when lambda_2 is simple.
  // Only the first returned eigenvector is used, whatever the gap.
  ObjectiveEval objective_and_gradient(const MatField& factor, int k);

  // The metric-only part of the gradient: Ghat_m = g_m g_m^T / U^T M U, the
  // supergradient of W -> lambda_2(K^W, M) in the field_inner() pairing.
  MatField supergradient(const Eigen::VectorXd& u) const;

  void reset_warm_start() { warm_.reset(); }

 private:
  const TriMesh* mesh_;
  const DensityField* field_;
  ElemStiffTensor tensors_;
  SparseSym mass_;
  WeightedStiffnessAssembler assembler_;
  DeflatedEigenSolver solver_;
  std::optional<Eigen::MatrixXd> warm_;
};

struct HistoryRow {
  int iteration = 0;
  std::vector<double> eigenvalues;  // lambda_2 .. lambda_{1+k}
  double objective = 0.0;
  double gap32 = 0.0;
};

struct OptimizerConfig {
  UpdateRule rule = UpdateRule::kNesterov;
  // Step size for the gradient of lambda_2^{V^2} / int |V|^2 dmu, which is
  // the objective gradient divided by trace(Cov).
  double rho = 0.01;
  double alpha = 0.5;        // momentum factor (kMomentum only)
  int iterations = 100;
  int eig_k = 5;
  bool early_stop = true;
  double early_stop_tol = 1e-8;
  int early_stop_window = 5;
  // Return the iterate with the largest lambda_2 instead of the last one.
  // The single-eigenvector step zig-zags once lambda_2 and lambda_3 meet.
  bool keep_best = true;
};

struct OptState {
  MatField factor;     // V
  MatField momentum;   // D
  UpdateRule rule = UpdateRule::kNesterov;
  double rho = 0.01;
  double alpha = 0.5;
  int iteration = 0;   // k, also drives the accelerated schedule
  std::vector<HistoryRow> history;
};

// V_m = I/2, D_m = 0, normalized so that sum |V_m|^2 mu_m = 1.
OptState initial_state(const DensityField& field, const OptimizerConfig& config);

// Rescales V so that sum |V_m|^2 mu_m = 1.
void normalize_factor(MatField& factor, const DensityField& field);

// The direction the rules step along: gradient / trace(Cov).
MatField ascent_direction(const ObjectiveEval& eval, const DensityField& field);

// Point at which the next gradient must be evaluated: V for the plain and
// momentum rules, V + alpha_k D for the accelerated rule.
MatField lookahead_point(const OptState& state);

// Applies one step of the configured rule along `direction` (taken at
// lookahead_point(state)), then renormalizes. Throws kDivergence when the
// iterate stops being finite.
OptState update(const OptState& state, const MatField& direction, const DensityField& field);

struct OptResult {
  MetricField metric;
  MatField factor;
  double lambda2 = 0.0;
  double poincare_constant = 0.0;  // 1 / lambda2
  double gap32 = 0.0;
  Eigen::VectorXd u2;
  int best_iteration = 0;          // history row the metric comes from
  double lambda2_last = 0.0;       // lambda_2 of the last iterate
  std::vector<HistoryRow> history;
  int iterations = 0;              // updates performed
};

using IterationCallback = std::function<void(const HistoryRow&)>;

// The optimization loop: history row k holds the spectrum of V^(k); the
// loop stops after `iterations` updates or, when enabled, once lambda_2
// moved less than early_stop_tol for early_stop_window consecutive steps.
// Eigensolver or divergence errors are rethrown with the iteration index.
// With keep_best the returned metric is the history row with the largest
// lambda_2 (earliest on ties).
OptResult run(MetricProblem& problem, const OptimizerConfig& config,
              const IterationCallback& on_iteration = {});

}  // namespace poincare

#endif  // POINCARE_METRIC_OPT_HPP_
