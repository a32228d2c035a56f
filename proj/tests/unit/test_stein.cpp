#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "poincare/error.hpp"
#include "poincare/stein.hpp"

using namespace poincare;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(Stein1D, GaussianIsItsVariance) {
  const Density1D d = Density1D::gaussian(2.0, 3.0);
  for (double x : {-4.0, 0.0, 2.0, 5.5, 9.0}) EXPECT_NEAR(kernel_1d(d, x), 3.0, 1e-8) << x;
  EXPECT_NEAR(d.mean(), 2.0, 1e-10);
  EXPECT_NEAR(d.variance(), 3.0, 1e-9);
}

TEST(Stein1D, LaplaceAndCauchyClosedForms) {
  const Density1D lap = Density1D::laplace(1.0);
  for (double x : {-1.0, 0.0, 2.0, 7.0}) EXPECT_NEAR(kernel_1d(lap, x), 1.0 + std::abs(x), 1e-8);
  // scale b: W = b (b + |x - loc|)
  const Density1D lap2 = Density1D::laplace(0.5, 1.0);
  EXPECT_NEAR(kernel_1d(lap2, 3.0), 0.5 * (0.5 + 2.0), 1e-8);

  for (double beta : {2.0, 3.5}) {
    const Density1D c = Density1D::cauchy(beta);
    for (double x : {-3.0, 0.0, 1.0, 10.0}) {
      EXPECT_NEAR(kernel_1d(c, x), (1 + x * x) / (2 * (beta - 1)), 1e-8 * (1 + x * x)) << beta;
    }
  }
  EXPECT_THROW(Density1D::cauchy(1.0), Error);
  try {
    Density1D::cauchy(1.4).variance();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDomain);
  }
}

// Uniform on (0, 1): W(x) = integral_x^1 (t - 1/2) dt = x (1 - x) / 2.
TEST(Stein1D, BoundedSupport) {
  const Density1D u = Density1D::from_log_pdf([](double) { return 0.0; }, 0.0, 1.0);
  for (double x : {0.01, 0.3, 0.5, 0.77}) EXPECT_NEAR(kernel_1d(u, x), x * (1 - x) / 2, 1e-10);
  try {
    kernel_1d(u, 1.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDomain);
  }
}

TEST(Stein1D, IntegralEqualsVariance) {
  for (const Density1D& d : {Density1D::gaussian(0.0, 2.0), Density1D::laplace(1.0),
                             Density1D::cauchy(3.0),
                             Density1D::from_log_pdf([](double x) { return -x * x * x * x; },
                                                     -std::numeric_limits<double>::infinity(),
                                                     std::numeric_limits<double>::infinity())}) {
    const double intw = d.expect([&](double x) { return kernel_1d(d, x); });
    EXPECT_NEAR(intw, d.variance(), 1e-6) << d.name();
  }
}

TEST(Stein1D, Tokens) {
  EXPECT_NEAR(kernel_1d(density_from_token("laplace"), 2.0), 3.0, 1e-8);
  EXPECT_NEAR(density_from_token("laplace", true).variance(), 1.0, 1e-9);
  EXPECT_NEAR(density_from_token("cauchy:3", true).variance(), 1.0, 1e-8);
  EXPECT_THROW(density_from_token("bogus"), Error);
  EXPECT_THROW(density_from_token("cauchy:abc"), Error);
}

TEST(SteinProduct, BlockDiagonalKernel) {
  const KernelEval k = product_kernel({kernel_eval_1d(Density1D::gaussian()),
                                       kernel_eval_1d(Density1D::laplace(1.0))});
  EXPECT_EQ(k.dim(), 2);
  const Eigen::MatrixXd w = k(vec({0.3, -2.0}));
  EXPECT_NEAR(w(0, 0), 1.0, 1e-8);
  EXPECT_NEAR(w(1, 1), 3.0, 1e-8);
  EXPECT_EQ(w(0, 1), 0.0);
}

TEST(SteinProduct, ResidualVanishesForTrueKernel) {
  const ProductMeasure mu{{Density1D::gaussian(), Density1D::laplace(1.0)}};
  const KernelEval k = product_kernel({kernel_eval_1d(mu.factors[0]), kernel_eval_1d(mu.factors[1])});
  for (const auto& r : stein_residual(k, mu, polynomial_tests(2, 2))) EXPECT_LT(r.norm(), 1e-7);

  // the identity is not a Stein kernel of the Laplace factor
  const KernelEval id{[](const Eigen::VectorXd&) { return Eigen::MatrixXd(Eigen::MatrixXd::Identity(2, 2)); },
                      {1, 1}};
  double worst = 0.0;
  for (const auto& r : stein_residual(id, mu, polynomial_tests(2, 3))) worst = std::max(worst, r.norm());
  EXPECT_GT(worst, 0.5);
}

TEST(SteinDiscrepancy, LaplaceAndCauchy) {
  const ProductMeasure lap{{Density1D::laplace(1.0)}};
  EXPECT_NEAR(stein_discrepancy_p(kernel_eval_1d(lap.factors[0]), lap, 2.0), std::sqrt(2.0), 1e-6);
  // E|x|^4 = 24 for the unit Laplace
  EXPECT_NEAR(stein_discrepancy_p(kernel_eval_1d(lap.factors[0]), lap, 4.0), std::pow(24.0, 0.25), 1e-6);
  const ProductMeasure cau{{Density1D::cauchy(2.0)}};
  EXPECT_TRUE(std::isinf(stein_discrepancy_p(kernel_eval_1d(cau.factors[0]), cau, 2.0)));
  EXPECT_THROW(stein_discrepancy_p(kernel_eval_1d(lap.factors[0]), lap, 1.5), Error);
  const ProductMeasure gau{{Density1D::gaussian(), Density1D::gaussian()}};
  const KernelEval kg = product_kernel({kernel_eval_1d(gau.factors[0]), kernel_eval_1d(gau.factors[1])});
  EXPECT_NEAR(stein_discrepancy_p(kg, gau, 2.0), 0.0, 1e-8);
}

TEST(SteinBounds, GaussianSquare) {
  const ProductMeasure mu{{Density1D::gaussian()}};
  const auto tests = polynomial_tests(1, 2);
  const TestFunction* sq = nullptr;
  for (const auto& t : tests) {
    if (std::abs(t.f(vec({2.0})) - 4.0) < 1e-12) sq = &t;
  }
  ASSERT_NE(sq, nullptr);
  const VarianceBounds b = variance_bounds(kernel_eval_1d(mu.factors[0]), mu, *sq);
  EXPECT_NEAR(b.lower, 0.0, 1e-8);
  EXPECT_NEAR(b.variance, 2.0, 1e-8);
  EXPECT_NEAR(b.upper, 4.0, 1e-8);
  EXPECT_NEAR(lipschitz_variance_bound(kernel_eval_1d(mu.factors[0]), mu), 1.0, 1e-8);
}

TEST(SteinMesh, ResidualOfConstantMetricOnGaussian) {
  const TriMesh mesh = build_rect_mesh({Vec2(-1.5, -1.5), Vec2(1.5, 1.5)}, 40, 40);
  const DensityField field = element_masses(mesh, DensitySpec::gaussian(Vec2::Zero(), 0.05));
  const MetricField w(mesh.element_count(), field.covariance);
  for (const auto& r : stein_residual(w, mesh, field, polynomial_tests(2, 2))) EXPECT_LT(r.norm(), 1e-3);
  const auto tests = polynomial_tests(2, 1);
  for (const auto& t : tests) {
    const VarianceBounds b = variance_bounds(w, mesh, field, t);
    // affine f: both bounds equal the variance
    EXPECT_NEAR(b.lower, b.variance, 1e-12 + 1e-9 * b.variance);
    EXPECT_NEAR(b.upper, b.variance, 1e-12 + 1e-9 * b.variance);
  }
  const MetricField zero(mesh.element_count(), Mat2::Zero());
  const DensityField flat = [&] {
    DensityField f = field;
    f.covariance = Mat2::Zero();
    return f;
  }();
  EXPECT_THROW(variance_bounds(zero, mesh, flat, tests.back()), Error);
}

TEST(SteinMC, SumKernelContractsAndIsReproducible) {
  const Density1D lap = density_from_token("laplace", true);
  const KernelEval k = tabulated_kernel_1d(lap, -20.0, 20.0, 8001);
  const VectorSampler base = product_sampler({lap});
  const BinSpec bins = BinSpec::symmetric(1, 2.0, 20);
  const std::int64_t n = 200000;

  auto l1 = [&](const BinnedKernel& b) {
    double s = 0.0, c = 0.0;
    for (int i = 0; i < bins.total(); ++i) {
      if (b.empty(i)) continue;
      s += static_cast<double>(b.count[i]) * std::abs(b.w_est[i] - 1.0);
      c += static_cast<double>(b.count[i]);
    }
    return s / c;
  };
  const BinnedKernel one = sum_kernel_mc(k, base, 1, n, bins, 1);
  const BinnedKernel twenty = sum_kernel_mc(k, base, 20, n, bins, 1);
  EXPECT_LT(l1(twenty), 0.5 * l1(one));

  const BinnedKernel again = sum_kernel_mc(k, base, 20, n, bins, 1, 3);
  ASSERT_EQ(again.count, twenty.count);
  for (int i = 0; i < bins.total(); ++i) {
    if (!twenty.empty(i)) EXPECT_EQ(again.w_est[i], twenty.w_est[i]);
  }

  const BinnedKernel other = sum_kernel_mc(k, base, 20, n, bins, 2);
  EXPECT_NE(other.count, twenty.count);
  double diff = 0.0, c = 0.0;
  for (int i = 0; i < bins.total(); ++i) {
    if (twenty.count[i] < 1000 || other.count[i] < 1000) continue;
    diff += std::abs(twenty.w_est[i] - other.w_est[i]);
    c += 1.0;
  }
  EXPECT_LT(diff / c, 0.02);

  EXPECT_THROW(sum_kernel_mc(k, base, 1, 10, bins, 1), Error);
}

TEST(SteinMC, EmptyBinsAreFlagged) {
  const Density1D g = Density1D::gaussian();
  const BinnedKernel b = sum_kernel_mc(kernel_eval_1d(g), product_sampler({g}), 1, 2000,
                                       BinSpec::symmetric(1, 40.0, 40), 3);
  EXPECT_TRUE(b.empty(0));
  EXPECT_TRUE(std::isnan(b.w_est[0]));
  EXPECT_FALSE(b.empty(20));
}
