#include "poincare/metric_opt.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "poincare/error.hpp"

namespace poincare {

std::string_view to_string(UpdateRule rule) {
  switch (rule) {
    case UpdateRule::kGradientAscent: return "ga";
    case UpdateRule::kMomentum: return "momentum";
    case UpdateRule::kNesterov: return "nesterov";
  }
  return "unknown";
}

UpdateRule update_rule_from_string(std::string_view name) {
  for (auto rule : {UpdateRule::kGradientAscent, UpdateRule::kMomentum, UpdateRule::kNesterov}) {
    if (to_string(rule) == name) return rule;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown update rule '" + std::string(name) + "'");
}

double nesterov_alpha(int k) { return 1.0 - 3.0 / (5.0 + k); }

double factor_norm2(const MatField& factor, const DensityField& field) {
  double total = 0.0;
  for (std::size_t m = 0; m < factor.size(); ++m) {
    total += factor[m].squaredNorm() * field.element_mass[m];
  }
  return total;
}

double field_inner(const MatField& a, const MatField& b, const DensityField& field) {
  double total = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    total += (a[m].cwiseProduct(b[m].transpose())).sum() * field.element_mass[m];
  }
  return total;
}

MetricField metric_from_factor(const MatField& factor, const DensityField& field) {
  if (factor.size() != field.element_count()) {
    throw Error(ErrorCode::kInvalidArgument, "factor field does not match the element count");
  }
  check_metric(factor);
  const double s = factor_norm2(factor, field);
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw Error(ErrorCode::kDegenerateFactor, "factor field has zero weighted norm");
  }
  const double scale = field.trace_cov / s;
  MetricField w(factor.size());
  for (std::size_t m = 0; m < factor.size(); ++m) {
    Mat2 v = 0.5 * (factor[m] + factor[m].transpose());
    Mat2 sq = v * v;
    sq(1, 0) = sq(0, 1);
    w[m] = scale * sq;
  }
  return w;
}

double metric_trace_integral(const MetricField& metric, const DensityField& field) {
  double total = 0.0;
  for (std::size_t m = 0; m < metric.size(); ++m) total += metric[m].trace() * field.element_mass[m];
  return total;
}

Mat2 metric_integral(const MetricField& metric, const DensityField& field) {
  Mat2 total = Mat2::Zero();
  for (std::size_t m = 0; m < metric.size(); ++m) total += metric[m] * field.element_mass[m];
  return total;
}

MetricProblem::MetricProblem(const TriMesh& mesh, const DensityField& field,
                             EigenSolveOptions options)
    : mesh_(&mesh),
      field_(&field),
      tensors_(assemble_elem_stiffness(mesh, field)),
      mass_(assemble_mass(mesh, field)),
      assembler_(tensors_),
      solver_(options) {}

Spectrum MetricProblem::spectrum(const MetricField& metric, int k) {
  const SparseSym k_w = assembler_.assemble(metric);
  EigenSolveResult res = solver_.solve(k_w, mass_, k, warm_ ? &*warm_ : nullptr);
  Spectrum out;
  for (const auto& p : res.pairs) out.eigenvalues.push_back(p.value);
  out.u2 = res.pairs.front().vector;
  out.subspace = res.subspace;
  warm_ = std::move(res.subspace);
  return out;
}

MatField MetricProblem::supergradient(const Eigen::VectorXd& u) const {
  const double norm = u.dot(mass_ * u);
  if (!(norm > 0.0)) throw Error(ErrorCode::kDegenerateVector, "eigenvector has zero M-norm");
  MatField g(tensors_.element_count());
  for (std::size_t m = 0; m < g.size(); ++m) {
    const Triangle& t = tensors_.triangles[m];
    Vec2 grad = Vec2::Zero();
    for (std::size_t a = 0; a < 3; ++a) grad += u[t[a]] * tensors_.grads[m][a];
    g[m] = grad * grad.transpose() / norm;
  }
  return g;
}

ObjectiveEval MetricProblem::objective_and_gradient(const MatField& factor, int k) {
  const MetricField metric = metric_from_factor(factor, *field_);
  const Spectrum spec = spectrum(metric, k);
  const double s = factor_norm2(factor, *field_);
  const double t = field_->trace_cov;

  ObjectiveEval out;
  out.eigenvalues = spec.eigenvalues;
  out.objective = spec.eigenvalues.front();
  out.gap32 = spec.eigenvalues.size() > 1 ? spec.eigenvalues[1] - spec.eigenvalues[0] : 0.0;
  out.u2 = spec.u2;
  out.g = supergradient(spec.u2);
  out.gradient.resize(factor.size());
  for (std::size_t m = 0; m < factor.size(); ++m) {
    out.g[m] *= t / s;
    const Mat2& v = factor[m];
    const Mat2& g = out.g[m];
    Mat2 grad = g * v + v * g - 2.0 * out.objective / s * v;
    grad(1, 0) = grad(0, 1) = 0.5 * (grad(0, 1) + grad(1, 0));
    out.gradient[m] = grad;
  }
  return out;
}

void normalize_factor(MatField& factor, const DensityField& field) {
  const double s = factor_norm2(factor, field);
  if (!std::isfinite(s)) {
    throw Error(ErrorCode::kDivergence, "factor field is not finite; try a smaller step size");
  }
  if (!(s > 0.0)) throw Error(ErrorCode::kDegenerateFactor, "factor field has zero weighted norm");
  const double inv = 1.0 / std::sqrt(s);
  for (auto& v : factor) v *= inv;
}

OptState initial_state(const DensityField& field, const OptimizerConfig& config) {
  OptState state;
  state.factor.assign(field.element_count(), Mat2::Identity() / 2.0);
  state.momentum.assign(field.element_count(), Mat2::Zero());
  state.rule = config.rule;
  state.rho = config.rho;
  state.alpha = config.alpha;
  normalize_factor(state.factor, field);
  return state;
}

MatField ascent_direction(const ObjectiveEval& eval, const DensityField& field) {
  MatField out = eval.gradient;
  const double inv = 1.0 / field.trace_cov;
  for (auto& d : out) d *= inv;
  return out;
}

MatField lookahead_point(const OptState& state) {
  if (state.rule != UpdateRule::kNesterov) return state.factor;
  const double a = nesterov_alpha(state.iteration);
  MatField out(state.factor.size());
  for (std::size_t m = 0; m < out.size(); ++m) out[m] = state.factor[m] + a * state.momentum[m];
  return out;
}

OptState update(const OptState& state, const MatField& direction, const DensityField& field) {
  if (direction.size() != state.factor.size()) {
    throw Error(ErrorCode::kInvalidArgument, "step direction does not match the factor field");
  }
  OptState next = state;
  double a = 0.0;
  switch (state.rule) {
    case UpdateRule::kGradientAscent: a = 0.0; break;
    case UpdateRule::kMomentum: a = state.alpha; break;
    case UpdateRule::kNesterov: a = nesterov_alpha(state.iteration); break;
  }
  for (std::size_t m = 0; m < next.factor.size(); ++m) {
    next.momentum[m] = a * state.momentum[m] + state.rho * direction[m];
    next.factor[m] = state.factor[m] + next.momentum[m];
    if (!next.factor[m].allFinite()) {
      throw Error(ErrorCode::kDivergence,
                  "factor of element " + std::to_string(m) +
                      " is not finite after the update; try a smaller step size");
    }
  }
  normalize_factor(next.factor, field);
  next.iteration = state.iteration + 1;
  return next;
}

namespace {

[[noreturn]] void rethrow_at(int iteration) {
  const std::string where = "iteration " + std::to_string(iteration) + ": ";
  try {
    throw;
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(where + e.what(), e.last_residual());
  } catch (const Error& e) {
    throw Error(e.code(), where + e.what());
  }
}

}  // namespace

OptResult run(MetricProblem& problem, const OptimizerConfig& config,
              const IterationCallback& on_iteration) {
  if (config.iterations < 0) {
    throw Error(ErrorCode::kInvalidArgument, "iteration count must be nonnegative");
  }
  if (config.eig_k < 1) throw Error(ErrorCode::kInvalidArgument, "eig_k must be at least 1");
  const DensityField& field = problem.field();
  const int k_eig = std::max(config.eig_k, 2);

  OptState state = initial_state(field, config);
  Eigen::VectorXd prev_u2;
  ObjectiveEval eval;
  int quiet_steps = 0;

  OptResult out;
  out.lambda2 = -1.0;
  auto keep = [&](int k) {
    out.factor = state.factor;
    out.lambda2 = eval.objective;
    out.gap32 = eval.gap32;
    out.u2 = eval.u2;
    out.best_iteration = k;
  };

  for (int k = 0;; ++k) {
    try {
      eval = problem.objective_and_gradient(state.factor, k_eig);
    } catch (const Error&) {
      rethrow_at(k);
    }
    if (prev_u2.size() == eval.u2.size() && prev_u2.dot(eval.u2) < 0.0) eval.u2 = -eval.u2;
    prev_u2 = eval.u2;

    HistoryRow row;
    row.iteration = k;
    row.eigenvalues.assign(eval.eigenvalues.begin(), eval.eigenvalues.begin() + config.eig_k);
    row.objective = eval.objective;
    row.gap32 = eval.gap32;
    if (!state.history.empty()) {
      const double delta = std::abs(row.objective - state.history.back().objective);
      quiet_steps = delta < config.early_stop_tol ? quiet_steps + 1 : 0;
    }
    state.history.push_back(row);
    if (on_iteration) on_iteration(row);
    if (!config.keep_best || eval.objective > out.lambda2) keep(k);

    const bool stalled = config.early_stop && quiet_steps >= config.early_stop_window;
    if (k >= config.iterations || stalled) break;

    try {
      if (state.rule == UpdateRule::kNesterov && k > 0) {
        const ObjectiveEval ahead = problem.objective_and_gradient(lookahead_point(state), k_eig);
        state = update(state, ascent_direction(ahead, field), field);
      } else {
        state = update(state, ascent_direction(eval, field), field);
      }
    } catch (const Error&) {
      rethrow_at(k);
    }
  }

  out.metric = metric_from_factor(out.factor, field);
  out.poincare_constant = 1.0 / out.lambda2;
  out.lambda2_last = eval.objective;
  out.history = std::move(state.history);
  out.iterations = static_cast<int>(out.history.size()) - 1;
  return out;
}

}  // namespace poincare
