#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "poincare/error.hpp"
#include "poincare/measures.hpp"

using namespace poincare;

TEST(Density, TrimodalAtFirstCentre) {
  const DensitySpec spec = DensitySpec::trimodal(0.025);
  const auto c = trimodal_centers();
  ASSERT_EQ(c.size(), 3u);
  const double want = 1.0 + std::exp(-(c[0] - c[1]).squaredNorm() / 0.025) +
                      std::exp(-(c[0] - c[2]).squaredNorm() / 0.025);
  EXPECT_NEAR(eval_density(spec, c[0]), want, 1e-14);
  // all three on the circle of radius 1/2, pairwise equidistant
  for (const auto& x : c) EXPECT_NEAR(x.norm(), 0.5, 1e-14);
  EXPECT_NEAR((c[0] - c[1]).norm(), (c[1] - c[2]).norm(), 1e-14);
}

TEST(Density, RingAndIndicator) {
  const DensitySpec ring = DensitySpec::ring(0.65, 0.0032);
  EXPECT_NEAR(eval_density(ring, Vec2(0.65, 0.0)), 1.0, 1e-15);
  EXPECT_NEAR(eval_density(ring, Vec2(0.0, 0.7)), std::exp(-0.0025 / 0.0032), 1e-14);

  const DensitySpec h = DensitySpec::uniform_region(h_shape_region());
  EXPECT_EQ(eval_density(h, Vec2(-0.5, 0.5)), 1.0);
  EXPECT_EQ(eval_density(h, Vec2(0.0, 0.5)), 0.0);
  const DensitySpec h4 = DensitySpec::uniform_region_epsilon(
      h_shape_region(), {rectangle({Vec2(-0.75, -0.75), Vec2(0.75, 0.75)})}, 1e-7);
  EXPECT_NEAR(eval_density(h4, Vec2(0.0, 0.5)), 1e-7, 1e-20);
  EXPECT_NEAR(eval_density(h4, Vec2(0.0, 0.0)), 1.0 + 1e-7, 1e-15);
}

TEST(Density, ValidateRejectsBadParameters) {
  EXPECT_THROW(DensitySpec::trimodal(-1.0).validate(), Error);
  EXPECT_THROW(DensitySpec::ring(0.0, 0.1).validate(), Error);
  EXPECT_THROW(DensitySpec::uniform_region_epsilon(h_shape_region(), {}, 0.0).validate(), Error);
}

TEST(Density, PotentialGradientMatchesFiniteDifference) {
  for (const DensitySpec& spec : {DensitySpec::trimodal(), DensitySpec::ring(),
                                  DensitySpec::gaussian(Vec2(0.2, -0.1), 0.3)}) {
    for (const Vec2& x : {Vec2(0.1, 0.2), Vec2(-0.3, 0.4), Vec2(0.5, -0.2)}) {
      const double h = 1e-6;
      auto v = [&](const Vec2& y) { return -std::log(eval_density(spec, y)); };
      const Vec2 fd((v(x + Vec2(h, 0)) - v(x - Vec2(h, 0))) / (2 * h),
                    (v(x + Vec2(0, h)) - v(x - Vec2(0, h))) / (2 * h));
      const Vec2 g = potential_gradient(spec, x);
      EXPECT_LT((g - fd).norm(), 1e-6 * (1.0 + g.norm())) << to_string(spec.kind);
    }
  }
}

TEST(Field, MassesNormalizedAndSymmetric) {
  const TriMesh mesh = build_rect_mesh({Vec2(-1.2, -1.2), Vec2(1.2, 1.2)}, 40, 40);
  const DensityField f = element_masses(mesh, DensitySpec::trimodal());
  double total = 0.0;
  for (std::size_t m = 0; m < f.element_count(); ++m) {
    total += f.element_mass[m];
    EXPECT_NEAR(f.edge_weight[m][0] + f.edge_weight[m][1] + f.edge_weight[m][2],
                f.element_mass[m], 1e-15);
  }
  EXPECT_NEAR(total, 1.0, 1e-13);
  EXPECT_NEAR(f.mean.x(), 0.0, 1e-10);
  EXPECT_NEAR(f.trace_cov, f.covariance.trace(), 1e-15);
}

// Mixture of three isotropic Gaussians with variance sigma2/2 per axis: the
// covariance is sigma2/2 I plus the covariance of the centres. The box
// truncation at 1.2 is below 1e-8 in mass.
TEST(Field, TrimodalTraceCovMatchesClosedForm) {
  const TriMesh mesh = build_rect_mesh({Vec2(-1.2, -1.2), Vec2(1.2, 1.2)}, 160, 160);
  const DensityField f = element_masses(mesh, DensitySpec::trimodal());
  const auto c = trimodal_centers();
  const Vec2 cbar = (c[0] + c[1] + c[2]) / 3.0;
  double spread = 0.0;
  for (const auto& x : c) spread += (x - cbar).squaredNorm() / 3.0;
  const double want = 0.025 + spread;
  EXPECT_NEAR(f.trace_cov / want, 1.0, 1e-4);
  EXPECT_LT((f.mean - cbar).norm(), 1e-6);
}

TEST(Field, GaussianCovariance) {
  const double s2 = 0.04;
  const TriMesh mesh = build_rect_mesh({Vec2(-1.5, -1.5), Vec2(1.5, 1.5)}, 80, 80);
  const DensityField f = element_masses(mesh, DensitySpec::gaussian(Vec2::Zero(), s2));
  EXPECT_NEAR(f.covariance(0, 0), s2, 1e-3 * s2);
  EXPECT_NEAR(f.covariance(1, 1), s2, 1e-3 * s2);
  EXPECT_NEAR(f.covariance(0, 1), 0.0, 1e-8);
  const auto [mean, cov] = moments_of_field(f, mesh);
  EXPECT_LT((cov - f.covariance).norm(), 1e-15);
}

TEST(Field, UniformSquareMoments) {
  const TriMesh mesh = build_rect_mesh({Vec2(0, 0), Vec2(1, 1)}, 16, 16);
  const DensityField f =
      element_masses(mesh, DensitySpec::uniform_region({rectangle({Vec2(0, 0), Vec2(1, 1)})}));
  // the midpoint rule is exact for quadratics
  EXPECT_NEAR(f.mean.x(), 0.5, 1e-14);
  EXPECT_NEAR(f.covariance(0, 0), 1.0 / 12.0, 1e-14);
  EXPECT_NEAR(f.covariance(0, 1), 0.0, 1e-14);
  EXPECT_NEAR(integrate(f, mesh, [](const Vec2& x, std::size_t) { return x.x() * x.y(); }), 0.25,
              1e-14);
}

TEST(Field, ZeroDensityThrows) {
  const TriMesh mesh = build_rect_mesh({Vec2(5, 5), Vec2(6, 6)}, 4, 4);
  try {
    element_masses(mesh, DensitySpec::uniform_region(h_shape_region()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateMeasure);
  }
}

TEST(Field, TabulatedMasses) {
  const TriMesh mesh = build_rect_mesh({Vec2(0, 0), Vec2(1, 1)}, 2, 2);
  std::stringstream ss("elem_id,mass\n0,1\n1,1\n2,1\n3,1\n4,2\n5,2\n6,2\n7,2\n");
  auto masses = load_masses_csv(ss, mesh.element_count());
  const DensityField f = field_from_masses(mesh, masses);
  EXPECT_NEAR(f.element_mass[0], 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(f.element_mass[7], 2.0 / 12.0, 1e-15);
  std::stringstream bad("0,1\n1,x\n");
  EXPECT_THROW(load_masses_csv(bad, 2), Error);
}
