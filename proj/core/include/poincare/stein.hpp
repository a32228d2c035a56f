#ifndef POINCARE_STEIN_HPP_
#define POINCARE_STEIN_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "poincare/assembly.hpp"
#include "poincare/measures.hpp"
#include "poincare/mesh.hpp"

namespace poincare {

// Probability density on an interval (lo, hi), possibly infinite, given by
// an unnormalized log-density. Normalization and mean come from quadrature.
// `breakpoints` are interior points where the density is not smooth; the
// quadrature splits there.
class Density1D {
 public:
  using LogPdf = std::function<double(double)>;
  using Sampler = std::function<double(std::mt19937_64&)>;

  static Density1D gaussian(double mean = 0.0, double variance = 1.0);
  // exp(-|x - loc| / b) / (2 b)
  static Density1D laplace(double b = 1.0, double loc = 0.0);
  // (1 + (x / s)^2)^(-beta); the mean needs beta > 1, the variance beta > 3/2.
  static Density1D cauchy(double beta, double s = 1.0);
  static Density1D from_log_pdf(LogPdf log_pdf, double lo, double hi,
                                std::vector<double> breakpoints = {}, std::string name = "custom");

  const std::string& name() const { return name_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  bool in_support(double x) const { return x > lo_ && x < hi_; }

  double log_pdf(double x) const { return log_pdf_(x); }  // unnormalized
  double pdf(double x) const;                             // normalized
  double mean() const { return mean_; }
  // Throws kDomain when the second moment diverges.
  double variance() const;

  // Integral of f against the normalized density.
  double expect(const std::function<double(double)>& f) const;

  // Set by the named families; empty for from_log_pdf densities.
  const Sampler& sampler() const { return sampler_; }
  Density1D& with_sampler(Sampler s) {
    sampler_ = std::move(s);
    return *this;
  }

 private:
  Density1D() = default;
  void finalize();

  std::string name_;
  LogPdf log_pdf_;
  double lo_ = -std::numeric_limits<double>::infinity();
  double hi_ = std::numeric_limits<double>::infinity();
  std::vector<double> breakpoints_;
  double log_norm_ = 0.0;
  double mean_ = 0.0;
  double variance_ = std::numeric_limits<double>::quiet_NaN();
  Sampler sampler_;
};

// Integral of f over [a, b] (either end may be infinite) by adaptive
// Gauss-Kronrod, split at the given breakpoints.
double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    const std::vector<double>& breakpoints = {}, double* error = nullptr);

// W(x) = (1 / p(x)) * integral_x^inf (t - m) p(t) dt, evaluated from the
// right tail for x >= m and from the left tail (with a sign flip) for x < m.
// Throws kDomain outside the open support.
double kernel_1d(const Density1D& density, double x);

// Parses "gauss", "laplace" or "cauchy:<beta>". Unit scale gives the closed
// forms W = 1, 1 + |x| and (1 + x^2) / (2 (beta - 1)); with `standardized`
// the scale is chosen for unit variance instead.
Density1D density_from_token(const std::string& token, bool standardized = false);

// Matrix-valued field x -> W(x), block-diagonal with the declared block
// sizes (all 1 for products of 1D kernels).
struct KernelEval {
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> eval;
  std::vector<int> block_sizes;

  int dim() const;
  Eigen::MatrixXd operator()(const Eigen::VectorXd& x) const { return eval(x); }
};

KernelEval kernel_eval_1d(const Density1D& density);

// Same kernel through a cubic B-spline table on [lo, hi]; exact quadrature
// outside. Meant for Monte Carlo loops.
KernelEval tabulated_kernel_1d(const Density1D& density, double lo, double hi, int points);

// diag(W_1(x_1), ..., W_L(x_L)) with x split according to block sizes.
KernelEval product_kernel(const std::vector<KernelEval>& blocks);

// Product of 1D densities; integrals by nested adaptive quadrature.
struct ProductMeasure {
  std::vector<Density1D> factors;

  int dim() const { return static_cast<int>(factors.size()); }
  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;
  double expect(const std::function<double(const Eigen::VectorXd&)>& f) const;
};

struct TestFunction {
  std::string name;
  std::function<double(const Eigen::VectorXd&)> f;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
};

// All monomials x^a (|a| <= degree) in dimension 1 or 2, constant included.
std::vector<TestFunction> polynomial_tests(int dim, int degree);

// r(f) = integral (x - m) f dmu - integral W grad f dmu, one vector per f.
std::vector<Eigen::VectorXd> stein_residual(const MetricField& metric, const TriMesh& mesh,
                                            const DensityField& field,
                                            const std::vector<TestFunction>& tests);
std::vector<Eigen::VectorXd> stein_residual(const KernelEval& kernel, const ProductMeasure& measure,
                                            const std::vector<TestFunction>& tests);

// (integral |W - I|_F^p dmu)^(1/p); +inf when the integral does not
// converge. Throws kInvalidArgument for p < 2.
double stein_discrepancy_p(const MetricField& metric, const DensityField& field, double p);
double stein_discrepancy_p(const KernelEval& kernel, const ProductMeasure& measure, double p);

// |integral W grad f dmu|^2_{Cov^-1} <= Var(f) <= integral grad f^T W grad f dmu.
struct VarianceBounds {
  double lower = 0.0;
  double upper = 0.0;
  double variance = 0.0;  // by the same quadrature, for comparison
};

// Throws kSingularCovariance when Cov is not invertible.
VarianceBounds variance_bounds(const MetricField& metric, const TriMesh& mesh,
                               const DensityField& field, const TestFunction& f);
VarianceBounds variance_bounds(const KernelEval& kernel, const ProductMeasure& measure,
                               const TestFunction& f);

// integral lambda_max(W) dmu, which bounds the variance of every
// 1-Lipschitz function when W is a Stein kernel.
double lipschitz_variance_bound(const MetricField& metric, const DensityField& field);
double lipschitz_variance_bound(const KernelEval& kernel, const ProductMeasure& measure);

// Uniform rectangular bins over the first one or two coordinates.
struct BinSpec {
  int dims = 2;
  std::array<double, 2> lo{-3.0, -3.0};
  std::array<double, 2> hi{3.0, 3.0};
  std::array<int, 2> n{30, 30};

  static BinSpec symmetric(int dims, double half_width, int bins_per_axis);
  int total() const { return dims == 1 ? n[0] : n[0] * n[1]; }
  // -1 when x falls outside.
  int index(const Eigen::VectorXd& x) const;
  Eigen::Vector2d center(int bin) const;
};

struct BinnedKernel {
  BinSpec bins;
  std::vector<Eigen::MatrixXd> mean;  // conditional mean of (1/N) sum W(X_i)
  std::vector<double> w_est;          // trace(mean) / d
  std::vector<std::int64_t> count;

  bool empty(int bin) const { return count[static_cast<std::size_t>(bin)] == 0; }
};

using VectorSampler = std::function<Eigen::VectorXd(std::mt19937_64&)>;

// Sampler of the product of densities that carry samplers.
VectorSampler product_sampler(const std::vector<Density1D>& factors);

// Estimates x -> E[(1/N) sum_i W(X_i) | (1/sqrt N) sum_i X_i = x] by
// binning `samples` draws of the N-fold sum. Work is split into fixed-size
// batches with their own seeds, so the result does not depend on `threads`.
BinnedKernel sum_kernel_mc(const KernelEval& kernel, const VectorSampler& base, int copies,
                           std::int64_t samples, const BinSpec& bins, std::uint64_t seed,
                           int threads = 1);

}  // namespace poincare

#endif  // POINCARE_STEIN_HPP_
