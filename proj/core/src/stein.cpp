#include "poincare/stein.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <queue>
#include <string>
#include <unordered_map>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "parallel.hpp"
#include "poincare/error.hpp"
#include "poincare/rng.hpp"

namespace poincare {

namespace {

constexpr double kQuadTol = 1e-11;
constexpr int kMaxPieces = 4000;
constexpr double kNestedTol = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Globally adaptive Gauss-Kronrod (61 points) over a list of segments,
// bisecting the piece with the largest error estimate until the total error
// is below tol times the integral of |f| (or below abs_floor). Infinite ends
// are mapped to [0, 1) by t = a + s / (1 - s).
double adaptive_gk(const std::function<double(double)>& f, const std::vector<double>& pts,
                   double tol, double abs_floor, double* error) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  struct Piece {
    std::function<double(double)> const* g;
    double a, b, value, err, l1;
    bool operator<(const Piece& o) const { return err < o.err; }
  };
  std::vector<std::function<double(double)>> mapped;
  mapped.reserve(pts.size());
  std::vector<std::pair<double, double>> ranges;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i], b = pts[i + 1];
    if (std::isfinite(a) && std::isfinite(b)) {
      mapped.emplace_back(f);
      ranges.emplace_back(a, b);
    } else if (std::isfinite(a)) {
      mapped.emplace_back([&f, a](double s) {
        const double u = 1.0 - s;
        const double v = f(a + s / u);
        return v == 0.0 ? 0.0 : v / (u * u);
      });
      ranges.emplace_back(0.0, 1.0);
    } else if (std::isfinite(b)) {
      mapped.emplace_back([&f, b](double s) {
        const double u = 1.0 - s;
        const double v = f(b - s / u);
        return v == 0.0 ? 0.0 : v / (u * u);
      });
      ranges.emplace_back(0.0, 1.0);
    } else {
      throw Error(ErrorCode::kInvalidArgument, "quadrature segment is infinite at both ends");
    }
  }
  auto eval = [](const std::function<double(double)>* g, double a, double b) {
    Piece p{g, a, b, 0.0, 0.0, 0.0};
    p.value = Rule::integrate(*g, a, b, 0, 0.0, &p.err, &p.l1);
    if (!std::isfinite(p.value)) p.err = std::numeric_limits<double>::infinity();
    return p;
  };
  std::priority_queue<Piece> queue;
  double value = 0.0, err = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < mapped.size(); ++i) {
    Piece p = eval(&mapped[i], ranges[i].first, ranges[i].second);
    value += p.value;
    err += p.err;
    l1 += p.l1;
    queue.push(p);
  }
  for (int splits = 0; splits < kMaxPieces && err > std::max(tol * l1, abs_floor); ++splits) {
    const Piece worst = queue.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;
    queue.pop();
    const Piece left = eval(worst.g, worst.a, mid);
    const Piece right = eval(worst.g, mid, worst.b);
    value += left.value + right.value - worst.value;
    err += left.err + right.err - worst.err;
    l1 += left.l1 + right.l1 - worst.l1;
    queue.push(left);
    queue.push(right);
  }
  if (error != nullptr) *error += err;
  return value;
}

// Splits of [a, b] at the given points; infinite ends get extra splits at
// +-1, +-10, ... so that a narrow bump near the origin is never stepped over.
std::vector<double> segment_points(double a, double b, const std::vector<double>& breakpoints,
                                   double decades_to) {
  std::vector<double> pts{a, b};
  for (double p : breakpoints) {
    if (p > a && p < b) pts.push_back(p);
  }
  for (double r = 1.0; r <= decades_to; r *= 10.0) {
    if (r > a && r < b) pts.push_back(r);
    if (-r > a && -r < b) pts.push_back(-r);
  }
  if (pts.size() == 2 && !std::isfinite(a) && !std::isfinite(b)) pts.push_back(0.0);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

Eigen::VectorXd to_vec(const Vec2& x) { return Eigen::VectorXd(x); }

}  // namespace

double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    const std::vector<double>& breakpoints, double* error) {
  if (error != nullptr) *error = 0.0;
  if (!(a < b)) return 0.0;
  return adaptive_gk(f, segment_points(a, b, breakpoints, 0.0), kQuadTol, 0.0, error);
}

// --- Density1D ---------------------------------------------------------------

Density1D Density1D::gaussian(double mean, double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance) || !std::isfinite(mean)) {
    throw Error(ErrorCode::kInvalidArgument, "gaussian needs a finite mean and positive variance");
  }
  Density1D d;
  d.name_ = "gauss";
  d.log_pdf_ = [mean, variance](double x) { return -0.5 * (x - mean) * (x - mean) / variance; };
  d.finalize();
  const double sd = std::sqrt(variance);
  d.sampler_ = [mean, sd](std::mt19937_64& rng) {
    return std::normal_distribution<double>(mean, sd)(rng);
  };
  return d;
}

Density1D Density1D::laplace(double b, double loc) {
  if (!(b > 0.0) || !std::isfinite(b) || !std::isfinite(loc)) {
    throw Error(ErrorCode::kInvalidArgument, "laplace needs a positive finite scale");
  }
  Density1D d;
  d.name_ = "laplace";
  d.log_pdf_ = [b, loc](double x) { return -std::abs(x - loc) / b; };
  d.breakpoints_ = {loc};
  d.finalize();
  d.sampler_ = [b, loc](std::mt19937_64& rng) {
    const double e = std::exponential_distribution<double>(1.0 / b)(rng);
    return std::bernoulli_distribution(0.5)(rng) ? loc + e : loc - e;
  };
  return d;
}

Density1D Density1D::cauchy(double beta, double s) {
  if (!(beta > 1.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::kDomain, "generalized cauchy needs beta > 1 for a finite mean");
  }
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw Error(ErrorCode::kInvalidArgument, "cauchy scale must be positive");
  }
  Density1D d;
  d.name_ = "cauchy:" + std::to_string(beta);
  d.log_pdf_ = [beta, s](double x) { return -beta * std::log1p((x / s) * (x / s)); };
  d.finalize();
  if (!(beta > 1.5)) d.variance_ = kInf;
  // (1 + x^2)^(-beta) is a Student t with nu = 2 beta - 1, scaled by 1 / sqrt(nu).
  const double nu = 2.0 * beta - 1.0;
  const double scale = s / std::sqrt(nu);
  d.sampler_ = [nu, scale](std::mt19937_64& rng) {
    return scale * std::student_t_distribution<double>(nu)(rng);
  };
  return d;
}

Density1D Density1D::from_log_pdf(LogPdf log_pdf, double lo, double hi,
                                  std::vector<double> breakpoints, std::string name) {
  if (!log_pdf) throw Error(ErrorCode::kInvalidArgument, "density evaluator is empty");
  if (!(lo < hi)) throw Error(ErrorCode::kInvalidArgument, "density support is empty");
  Density1D d;
  d.name_ = std::move(name);
  d.log_pdf_ = std::move(log_pdf);
  d.lo_ = lo;
  d.hi_ = hi;
  std::sort(breakpoints.begin(), breakpoints.end());
  d.breakpoints_ = std::move(breakpoints);
  d.finalize();
  return d;
}

void Density1D::finalize() {
  // Reference level for exp(): the largest log-density among a few probes,
  // so the normalizing integral is O(1).
  std::vector<double> probes = breakpoints_;
  if (std::isfinite(lo_) && std::isfinite(hi_)) {
    probes.push_back(0.5 * (lo_ + hi_));
  } else if (std::isfinite(lo_)) {
    probes.push_back(lo_ + 1.0);
  } else if (std::isfinite(hi_)) {
    probes.push_back(hi_ - 1.0);
  } else {
    probes.push_back(0.0);
  }
  double ref = -kInf;
  for (double p : probes) {
    if (in_support(p)) ref = std::max(ref, log_pdf_(p));
  }
  if (!std::isfinite(ref)) {
    throw Error(ErrorCode::kDegenerateMeasure, "density " + name_ + " vanishes at its probes");
  }
  auto unnorm = [this, ref](double x) { return std::exp(log_pdf_(x) - ref); };
  const double z = integrate_1d(unnorm, lo_, hi_, breakpoints_);
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw Error(ErrorCode::kDegenerateMeasure, "density " + name_ + " is not normalizable");
  }
  log_norm_ = ref + std::log(z);
  mean_ = integrate_1d([&](double x) { return x * unnorm(x); }, lo_, hi_, breakpoints_) / z;
  if (!std::isfinite(mean_)) throw Error(ErrorCode::kDomain, "density " + name_ + " has no mean");
  double err = 0.0;
  const double m = mean_;
  const double var = integrate_1d([&](double x) { return (x - m) * (x - m) * unnorm(x); }, lo_,
                                  hi_, breakpoints_, &err) / z;
  variance_ = (std::isfinite(var) && err / z <= 1e-6 * std::max(var, 1e-300)) ? var : kInf;
}

double Density1D::pdf(double x) const {
  if (!in_support(x)) return 0.0;
  return std::exp(log_pdf_(x) - log_norm_);
}

double Density1D::variance() const {
  if (!std::isfinite(variance_)) {
    throw Error(ErrorCode::kDomain, "density " + name_ + " has infinite variance");
  }
  return variance_;
}

double Density1D::expect(const std::function<double(double)>& f) const {
  return integrate_1d([&](double x) {
    const double p = pdf(x);
    return p == 0.0 ? 0.0 : f(x) * p;
  }, lo_, hi_, breakpoints_);
}

double kernel_1d(const Density1D& density, double x) {
  if (!density.in_support(x)) {
    throw Error(ErrorCode::kDomain, "x = " + std::to_string(x) + " is outside the support of " +
                                        density.name());
  }
  const double m = density.mean();
  const double lx = density.log_pdf(x);
  auto integrand = [&](double t) { return (t - m) * std::exp(density.log_pdf(t) - lx); };
  // Integrate the tail on the far side of the mean so the integrand keeps one sign.
  const double value = x >= m ? integrate_1d(integrand, x, density.hi(), density.breakpoints())
                              : -integrate_1d(integrand, density.lo(), x, density.breakpoints());
  return std::max(value, 0.0);
}

Density1D density_from_token(const std::string& token, bool standardized) {
  if (token == "gauss" || token == "gaussian") return Density1D::gaussian();
  if (token == "laplace") return Density1D::laplace(standardized ? std::sqrt(0.5) : 1.0);
  const std::string prefix = "cauchy:";
  if (token.rfind(prefix, 0) == 0) {
    const std::string rest = token.substr(prefix.size());
    double beta = 0.0;
    std::size_t used = 0;
    try {
      beta = std::stod(rest, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != rest.size()) {
      throw Error(ErrorCode::kInvalidArgument, "cannot read beta in '" + token + "'");
    }
    if (standardized) {
      if (!(beta > 1.5)) {
        throw Error(ErrorCode::kDomain, "unit variance needs beta > 3/2 in '" + token + "'");
      }
      return Density1D::cauchy(beta, std::sqrt(2.0 * beta - 3.0));
    }
    return Density1D::cauchy(beta);
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown distribution '" + token + "' (expected gauss, laplace or cauchy:<beta>)");
}

// --- kernels -----------------------------------------------------------------

int KernelEval::dim() const {
  int d = 0;
  for (int b : block_sizes) d += b;
  return d;
}

KernelEval kernel_eval_1d(const Density1D& density) {
  // Nested quadrature asks for the same abscissae over and over; remember them.
  struct Cache {
    std::mutex mutex;
    std::unordered_map<double, double> values;
  };
  auto cache = std::make_shared<Cache>();
  KernelEval k;
  k.block_sizes = {1};
  k.eval = [density, cache](const Eigen::VectorXd& x) {
    Eigen::MatrixXd w(1, 1);
    const double t = x[0];
    {
      std::lock_guard lock(cache->mutex);
      if (auto it = cache->values.find(t); it != cache->values.end()) {
        w(0, 0) = it->second;
        return w;
      }
    }
    w(0, 0) = kernel_1d(density, t);
    std::lock_guard lock(cache->mutex);
    if (cache->values.size() < (1u << 20)) cache->values.emplace(t, w(0, 0));
    return w;
  };
  return k;
}

KernelEval tabulated_kernel_1d(const Density1D& density, double lo, double hi, int points) {
  if (!(lo < hi) || points < 4) {
    throw Error(ErrorCode::kInvalidArgument, "kernel table needs lo < hi and at least 4 points");
  }
  std::vector<double> values(static_cast<std::size_t>(points));
  const double h = (hi - lo) / (points - 1);
  for (int i = 0; i < points; ++i) values[static_cast<std::size_t>(i)] = kernel_1d(density, lo + i * h);
  auto spline = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
      values.begin(), values.end(), lo, h);
  KernelEval k;
  k.block_sizes = {1};
  k.eval = [density, spline, lo, hi](const Eigen::VectorXd& x) {
    Eigen::MatrixXd w(1, 1);
    const double t = x[0];
    w(0, 0) = (t >= lo && t <= hi) ? std::max((*spline)(t), 0.0) : kernel_1d(density, t);
    return w;
  };
  return k;
}

KernelEval product_kernel(const std::vector<KernelEval>& blocks) {
  if (blocks.empty()) throw Error(ErrorCode::kInvalidArgument, "product of zero kernels");
  KernelEval k;
  for (const auto& b : blocks) {
    if (!b.eval || b.dim() < 1) throw Error(ErrorCode::kInvalidArgument, "empty kernel block");
    k.block_sizes.push_back(b.dim());
  }
  const int d = k.dim();
  k.eval = [blocks, d](const Eigen::VectorXd& x) {
    if (x.size() != d) throw Error(ErrorCode::kInvalidArgument, "point has the wrong dimension");
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, d);
    int offset = 0;
    for (const auto& b : blocks) {
      const int s = b.dim();
      w.block(offset, offset, s, s) = b(x.segment(offset, s));
      offset += s;
    }
    return w;
  };
  return k;
}

// --- product measures --------------------------------------------------------

Eigen::VectorXd ProductMeasure::mean() const {
  Eigen::VectorXd m(dim());
  for (int i = 0; i < dim(); ++i) m[i] = factors[static_cast<std::size_t>(i)].mean();
  return m;
}

Eigen::MatrixXd ProductMeasure::covariance() const {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dim(), dim());
  for (int i = 0; i < dim(); ++i) c(i, i) = factors[static_cast<std::size_t>(i)].variance();
  return c;
}

namespace {

// Nested integral over coordinates [level, d) with the earlier ones fixed in x.
// `box` > 0 restricts every coordinate to [-box, box].
double nested(const ProductMeasure& mu, const std::function<double(const Eigen::VectorXd&)>& f,
              Eigen::VectorXd& x, int level, double box, double tol, double abs_floor) {
  const Density1D& d = mu.factors[static_cast<std::size_t>(level)];
  const double a = box > 0.0 ? std::max(d.lo(), -box) : d.lo();
  const double b = box > 0.0 ? std::min(d.hi(), box) : d.hi();
  auto inner = [&](double t) {
    const double p = d.pdf(t);
    if (p == 0.0) return 0.0;
    x[level] = t;
    const double v = level + 1 == mu.dim() ? f(x)
                                           : nested(mu, f, x, level + 1, box, tol, abs_floor);
    return v * p;
  };
  return adaptive_gk(inner, segment_points(a, b, d.breakpoints(), box > 0.0 ? box : 1.0), tol,
                     abs_floor, nullptr);
}

// Inner integrals carry round-off that no outer refinement removes, so the
// nested rule stops at an absolute floor scaled by a rough integral of |f|.
double expect_in_box(const ProductMeasure& mu,
                     const std::function<double(const Eigen::VectorXd&)>& f, double box) {
  if (mu.dim() < 1) throw Error(ErrorCode::kInvalidArgument, "measure has no factors");
  Eigen::VectorXd x(mu.dim());
  if (mu.dim() == 1) return nested(mu, f, x, 0, box, kQuadTol, 0.0);
  auto magnitude = [&](const Eigen::VectorXd& y) { return std::abs(f(y)); };
  // One Kronrod pass per segment, no refinement: only the order of magnitude matters.
  const double scale = nested(mu, magnitude, x, 0, box, 1e-4, kInf);
  if (!std::isfinite(scale)) return scale;
  if (scale == 0.0) return 0.0;
  return nested(mu, f, x, 0, box, kNestedTol, kNestedTol * scale);
}

}  // namespace

double ProductMeasure::expect(const std::function<double(const Eigen::VectorXd&)>& f) const {
  return expect_in_box(*this, f, 0.0);
}

// --- test functions ----------------------------------------------------------

std::vector<TestFunction> polynomial_tests(int dim, int degree) {
  if (dim < 1 || dim > 2 || degree < 0) {
    throw Error(ErrorCode::kInvalidArgument, "polynomial tests exist for dim 1 or 2");
  }
  auto ipow = [](double x, int k) { return k <= 0 ? 1.0 : std::pow(x, k); };
  std::vector<TestFunction> out;
  for (int total = 0; total <= degree; ++total) {
    for (int i = total; i >= 0; --i) {
      const int j = total - i;
      if (dim == 1 && j > 0) continue;
      TestFunction t;
      if (dim == 1) {
        t.name = i == 0 ? "1" : (i == 1 ? "x" : "x^" + std::to_string(i));
      } else {
        auto part = [](const char* v, int k) -> std::string {
          if (k == 0) return "";
          return k == 1 ? std::string(v) : std::string(v) + "^" + std::to_string(k);
        };
        const std::string a = part("x1", i), b = part("x2", j);
        t.name = a.empty() && b.empty() ? "1" : (a.empty() ? b : (b.empty() ? a : a + "*" + b));
      }
      t.f = [=](const Eigen::VectorXd& x) {
        return ipow(x[0], i) * (dim == 2 ? ipow(x[1], j) : 1.0);
      };
      t.grad = [=](const Eigen::VectorXd& x) {
        Eigen::VectorXd g(dim);
        const double y = dim == 2 ? ipow(x[1], j) : 1.0;
        g[0] = i == 0 ? 0.0 : i * ipow(x[0], i - 1) * y;
        if (dim == 2) g[1] = j == 0 ? 0.0 : j * ipow(x[1], j - 1) * ipow(x[0], i);
        return g;
      };
      out.push_back(std::move(t));
    }
  }
  return out;
}

// --- diagnostics on a mesh ---------------------------------------------------

std::vector<Eigen::VectorXd> stein_residual(const MetricField& metric, const TriMesh& mesh,
                                            const DensityField& field,
                                            const std::vector<TestFunction>& tests) {
  if (metric.size() != field.element_count()) {
    throw Error(ErrorCode::kInvalidArgument, "metric does not match the element count");
  }
  std::vector<Eigen::VectorXd> out(tests.size(), Eigen::VectorXd::Zero(2));
  for (std::size_t m = 0; m < field.element_count(); ++m) {
    for (int e = 0; e < 3; ++e) {
      const double w = field.edge_weight[m][static_cast<std::size_t>(e)];
      if (w == 0.0) continue;
      const Eigen::VectorXd x = to_vec(edge_midpoint(mesh, m, e));
      const Eigen::VectorXd centered = x - to_vec(field.mean);
      for (std::size_t i = 0; i < tests.size(); ++i) {
        out[i] += w * (centered * tests[i].f(x) - metric[m] * tests[i].grad(x));
      }
    }
  }
  return out;
}

double stein_discrepancy_p(const MetricField& metric, const DensityField& field, double p) {
  if (!(p >= 2.0)) throw Error(ErrorCode::kInvalidArgument, "discrepancy order p must be >= 2");
  if (metric.size() != field.element_count()) {
    throw Error(ErrorCode::kInvalidArgument, "metric does not match the element count");
  }
  double total = 0.0;
  for (std::size_t m = 0; m < metric.size(); ++m) {
    total += std::pow((metric[m] - Mat2::Identity()).norm(), p) * field.element_mass[m];
  }
  const double s = std::pow(total, 1.0 / p);
  return std::isfinite(s) ? s : kInf;
}

namespace {

VarianceBounds finish_bounds(const Eigen::MatrixXd& cov, const Eigen::VectorXd& wgrad,
                             double upper, double variance) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(es.eigenvalues().minCoeff() > 1e-12 * top)) {
    throw Error(ErrorCode::kSingularCovariance, "covariance is singular; the lower bound is undefined");
  }
  VarianceBounds b;
  b.lower = wgrad.dot(cov.ldlt().solve(wgrad));
  b.upper = upper;
  b.variance = variance;
  return b;
}

}  // namespace

VarianceBounds variance_bounds(const MetricField& metric, const TriMesh& mesh,
                               const DensityField& field, const TestFunction& f) {
  if (metric.size() != field.element_count()) {
    throw Error(ErrorCode::kInvalidArgument, "metric does not match the element count");
  }
  Eigen::VectorXd wgrad = Eigen::VectorXd::Zero(2);
  double upper = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t m = 0; m < field.element_count(); ++m) {
    for (int e = 0; e < 3; ++e) {
      const double w = field.edge_weight[m][static_cast<std::size_t>(e)];
      if (w == 0.0) continue;
      const Eigen::VectorXd x = to_vec(edge_midpoint(mesh, m, e));
      const Eigen::VectorXd g = f.grad(x);
      const double v = f.f(x);
      wgrad += w * (metric[m] * g);
      upper += w * g.dot(metric[m] * g);
      m1 += w * v;
      m2 += w * v * v;
    }
  }
  return finish_bounds(Eigen::MatrixXd(field.covariance), wgrad, upper, m2 - m1 * m1);
}

double lipschitz_variance_bound(const MetricField& metric, const DensityField& field) {
  if (metric.size() != field.element_count()) {
    throw Error(ErrorCode::kInvalidArgument, "metric does not match the element count");
  }
  double total = 0.0;
  for (std::size_t m = 0; m < metric.size(); ++m) {
    const Eigen::SelfAdjointEigenSolver<Mat2> es(metric[m], Eigen::EigenvaluesOnly);
    total += es.eigenvalues()[1] * field.element_mass[m];
  }
  return total;
}

// --- diagnostics for kernels over product measures ---------------------------

namespace {

void check_dims(const KernelEval& kernel, const ProductMeasure& measure) {
  if (kernel.dim() != measure.dim()) {
    throw Error(ErrorCode::kInvalidArgument, "kernel and measure dimensions differ");
  }
}

}  // namespace

std::vector<Eigen::VectorXd> stein_residual(const KernelEval& kernel, const ProductMeasure& measure,
                                            const std::vector<TestFunction>& tests) {
  check_dims(kernel, measure);
  const Eigen::VectorXd mean = measure.mean();
  const int d = measure.dim();
  std::vector<Eigen::VectorXd> out;
  out.reserve(tests.size());
  for (const auto& t : tests) {
    Eigen::VectorXd r(d);
    for (int i = 0; i < d; ++i) {
      r[i] = measure.expect([&](const Eigen::VectorXd& x) {
        return (x[i] - mean[i]) * t.f(x) - (kernel(x) * t.grad(x))[i];
      });
    }
    out.push_back(std::move(r));
  }
  return out;
}

double stein_discrepancy_p(const KernelEval& kernel, const ProductMeasure& measure, double p) {
  if (!(p >= 2.0)) throw Error(ErrorCode::kInvalidArgument, "discrepancy order p must be >= 2");
  check_dims(kernel, measure);
  const int d = measure.dim();
  // Deviations below the kernel's own quadrature accuracy are round-off.
  auto integrand = [&](const Eigen::VectorXd& x) {
    const Eigen::MatrixXd w = kernel(x);
    const double r = (w - Eigen::MatrixXd::Identity(d, d)).norm();
    return r <= 1e-9 * (1.0 + w.norm()) ? 0.0 : std::pow(r, p);
  };
  // A divergent integral shows up as growth between two truncation boxes.
  const double near = expect_in_box(measure, integrand, 1e3);
  const double far = expect_in_box(measure, integrand, 1e6);
  if (!std::isfinite(far) || std::abs(far - near) > 1e-6 * std::max(std::abs(far), 1e-12)) {
    return kInf;
  }
  const double full = measure.expect(integrand);
  const double s = std::pow(std::max(full, 0.0), 1.0 / p);
  return std::isfinite(s) ? s : kInf;
}

VarianceBounds variance_bounds(const KernelEval& kernel, const ProductMeasure& measure,
                               const TestFunction& f) {
  check_dims(kernel, measure);
  const int d = measure.dim();
  Eigen::VectorXd wgrad(d);
  for (int i = 0; i < d; ++i) {
    wgrad[i] = measure.expect([&](const Eigen::VectorXd& x) { return (kernel(x) * f.grad(x))[i]; });
  }
  const double upper = measure.expect([&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd g = f.grad(x);
    return g.dot(kernel(x) * g);
  });
  const double m1 = measure.expect([&](const Eigen::VectorXd& x) { return f.f(x); });
  const double m2 = measure.expect([&](const Eigen::VectorXd& x) { return f.f(x) * f.f(x); });
  return finish_bounds(measure.covariance(), wgrad, upper, m2 - m1 * m1);
}

double lipschitz_variance_bound(const KernelEval& kernel, const ProductMeasure& measure) {
  check_dims(kernel, measure);
  return measure.expect([&](const Eigen::VectorXd& x) {
    const Eigen::MatrixXd w = kernel(x);
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(w, Eigen::EigenvaluesOnly)
        .eigenvalues()
        .maxCoeff();
  });
}

// --- Monte Carlo kernel of normalized sums -----------------------------------

BinSpec BinSpec::symmetric(int dims, double half_width, int bins_per_axis) {
  if ((dims != 1 && dims != 2) || !(half_width > 0.0) || bins_per_axis < 1) {
    throw Error(ErrorCode::kInvalidArgument, "bins need dims 1 or 2, a positive width and count");
  }
  BinSpec b;
  b.dims = dims;
  b.lo = {-half_width, -half_width};
  b.hi = {half_width, half_width};
  b.n = {bins_per_axis, dims == 2 ? bins_per_axis : 1};
  return b;
}

int BinSpec::index(const Eigen::VectorXd& x) const {
  int idx[2] = {0, 0};
  for (int a = 0; a < dims; ++a) {
    const double u = (x[a] - lo[a]) / (hi[a] - lo[a]);
    if (!(u >= 0.0) || !(u < 1.0)) return -1;
    idx[a] = std::min(static_cast<int>(u * n[a]), n[a] - 1);
  }
  return dims == 1 ? idx[0] : idx[1] * n[0] + idx[0];
}

Eigen::Vector2d BinSpec::center(int bin) const {
  const int ix = dims == 1 ? bin : bin % n[0];
  const int iy = dims == 1 ? 0 : bin / n[0];
  Eigen::Vector2d c;
  c[0] = lo[0] + (ix + 0.5) * (hi[0] - lo[0]) / n[0];
  c[1] = dims == 1 ? 0.0 : lo[1] + (iy + 0.5) * (hi[1] - lo[1]) / n[1];
  return c;
}

VectorSampler product_sampler(const std::vector<Density1D>& factors) {
  for (const auto& f : factors) {
    if (!f.sampler()) {
      throw Error(ErrorCode::kInvalidArgument, "density " + f.name() + " has no sampler");
    }
  }
  return [factors](std::mt19937_64& rng) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(factors.size()));
    for (std::size_t i = 0; i < factors.size(); ++i) x[static_cast<Eigen::Index>(i)] = factors[i].sampler()(rng);
    return x;
  };
}

BinnedKernel sum_kernel_mc(const KernelEval& kernel, const VectorSampler& base, int copies,
                           std::int64_t samples, const BinSpec& bins, std::uint64_t seed,
                           int threads) {
  if (copies < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one copy");
  if (bins.dims != 1 && bins.dims != 2) throw Error(ErrorCode::kInvalidArgument, "bins need dims 1 or 2");
  if (samples < bins.total()) {
    throw Error(ErrorCode::kInvalidArgument, "fewer samples than bins");
  }
  const int d = kernel.dim();
  if (d < bins.dims) throw Error(ErrorCode::kInvalidArgument, "kernel has fewer coordinates than the bins");
  const int nbins = bins.total();

  constexpr std::int64_t kBatch = 1 << 14;
  constexpr std::int64_t kRound = 64;
  const std::int64_t batches = (samples + kBatch - 1) / kBatch;
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(copies));

  struct Acc {
    std::vector<Eigen::MatrixXd> sum;
    std::vector<std::int64_t> count;
  };
  auto fresh = [&] {
    Acc a;
    a.sum.assign(static_cast<std::size_t>(nbins), Eigen::MatrixXd::Zero(d, d));
    a.count.assign(static_cast<std::size_t>(nbins), 0);
    return a;
  };
  Acc total = fresh();

  // Batches are independent streams; each round is merged in batch order so
  // the floating-point sums do not depend on the thread count.
  for (std::int64_t r0 = 0; r0 < batches; r0 += kRound) {
    const std::int64_t rn = std::min(kRound, batches - r0);
    std::vector<Acc> partial(static_cast<std::size_t>(rn));
    detail::parallel_for(rn, threads, [&](std::int64_t j) {
      const std::int64_t batch = r0 + j;
      Acc acc = fresh();
      std::mt19937_64 rng(counter_hash(seed, static_cast<std::uint64_t>(batch), 0));
      const std::int64_t n = std::min(kBatch, samples - batch * kBatch);
      Eigen::VectorXd sum(d);
      Eigen::MatrixXd wsum(d, d);
      for (std::int64_t s = 0; s < n; ++s) {
        sum.setZero();
        wsum.setZero();
        for (int i = 0; i < copies; ++i) {
          const Eigen::VectorXd x = base(rng);
          sum += x;
          wsum += kernel(x);
        }
        const int bin = bins.index(sum * inv_sqrt_n);
        if (bin < 0) continue;
        acc.sum[static_cast<std::size_t>(bin)] += wsum / copies;
        ++acc.count[static_cast<std::size_t>(bin)];
      }
      partial[static_cast<std::size_t>(j)] = std::move(acc);
    });
    for (const auto& p : partial) {
      for (int b = 0; b < nbins; ++b) {
        total.sum[static_cast<std::size_t>(b)] += p.sum[static_cast<std::size_t>(b)];
        total.count[static_cast<std::size_t>(b)] += p.count[static_cast<std::size_t>(b)];
      }
    }
  }

  BinnedKernel out;
  out.bins = bins;
  out.count = std::move(total.count);
  out.mean.resize(static_cast<std::size_t>(nbins));
  out.w_est.resize(static_cast<std::size_t>(nbins));
  for (int b = 0; b < nbins; ++b) {
    const auto i = static_cast<std::size_t>(b);
    if (out.count[i] == 0) {
      out.mean[i] = Eigen::MatrixXd::Constant(d, d, std::numeric_limits<double>::quiet_NaN());
      out.w_est[i] = std::numeric_limits<double>::quiet_NaN();
    } else {
      out.mean[i] = total.sum[i] / static_cast<double>(out.count[i]);
      out.w_est[i] = out.mean[i].trace() / d;
    }
  }
  return out;
}

}  // namespace poincare
