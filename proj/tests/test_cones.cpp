#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "altphillips/cones.hpp"

using namespace altphillips;

namespace {

constexpr double kPi = std::numbers::pi;

// Meridian grid (tau, x_d) on [0, 1] x [0.5, 1.5], away from the vertex.
Grid meridian(std::size_t n) { return Grid::box(2, {0.0, 0.5, 0.0}, {1.0, 1.5, 0.0}, {n + 1, n + 1, 1}); }

double order(double coarse, double fine) { return std::log2(coarse / fine); }

}  // namespace

TEST(ConeOde, HalfSpaceProfileBalances) {
  for (int d : {2, 3, 5, 7})
    for (double s : {-0.8, -0.5, 0.0, 0.6})
      for (double th : {0.1, 0.7, 1.3}) {
        const double rhs = cone_ode_rhs(th, std::cos(th), -std::sin(th), d, s);
        EXPECT_NEAR(rhs, -std::cos(th), 1e-13) << d << " " << s << " " << th;
      }
}

TEST(ConeOde, AxisSeriesMatchesSmallAngleEvaluation) {
  for (int d : {3, 4, 7})
    for (double s : {-0.5, 0.0, 0.5})
      for (double g0 : {0.4, 1.0, 1.7}) {
        const double g2 = cone_axis_second_derivative(g0, d, s);
        const double th = 1e-4;
        const double direct = cone_ode_rhs(th, g0 + 0.5 * g2 * th * th, g2 * th, d, s);
        EXPECT_NEAR(direct, g2, 1e-6) << d << " " << s << " " << g0;
      }
}

TEST(ConeOde, RejectsNonPositiveProfileAndBadAngle) {
  EXPECT_THROW(cone_ode_rhs(1.0, 0.0, -1.0, 3, 0.0), DomainError);
  EXPECT_THROW(cone_ode_rhs(1.0, -0.1, -1.0, 3, 0.0), DomainError);
  EXPECT_THROW(cone_ode_rhs(0.0, 1.0, 0.0, 3, 0.0), DomainError);
  EXPECT_THROW(cone_axis_second_derivative(0.0, 3, 0.0), DomainError);
}

// The edge series must satisfy the ODE to O(tau^2) in the variable tau = theta0 - theta;
// flipping the sign of the quadratic coefficient leaves an O(1) defect.
TEST(ConeShoot, EdgeSeriesSolvesOdeToSecondOrder) {
  const int d = 4;
  const double s = -0.5, th0 = 1.1;
  const double C = std::cos(th0) / std::sin(th0);
  const double a = (d - 2) * C / (2.0 * (1.0 + s));
  const double b = ((d - 2) * (1.0 + C * C) + 2.0 * a * (d - 2) * C - (d - 1) - 0.5 * s) / (3.0 * (2.0 + s));
  auto defect = [&](double aa, double tau) {
    const double g = tau + aa * tau * tau + b * tau * tau * tau;
    const double dg = -(1.0 + 2.0 * aa * tau + 3.0 * b * tau * tau);
    const double ddg = 2.0 * aa + 6.0 * b * tau;
    return std::abs(ddg - cone_ode_rhs(th0 - tau, g, dg, d, s));
  };
  const double e1 = defect(a, 1e-2), e2 = defect(a, 5e-3);
  EXPECT_GT(std::log2(e1 / e2), 1.8);
  EXPECT_LT(e2, 1e-3);
  EXPECT_GT(defect(-a, 5e-3), 0.5);
}

TEST(ConeShoot, HalfSpaceIsRecovered) {
  for (int d : {3, 4, 7})
    for (double gamma : {-1.0, -0.5, 0.0, 0.5}) {
      const auto c = shoot_from_edge(0.5 * kPi, d, make_exponents(gamma));
      ASSERT_TRUE(c.complete());
      EXPECT_LT(std::abs(c.axis_defect), 1e-8) << d << " " << gamma;
      // Toward the axis the backward shot amplifies rounding through the
      // irregular mode theta^(3-d); compare away from it.
      double err = 0.0;
      for (std::size_t k = 0; k < c.theta.size(); ++k)
        if (c.theta[k] >= 0.1) err = std::max(err, std::abs(c.g[k] - std::cos(c.theta[k])));
      EXPECT_LT(err, 1e-8) << d << " " << gamma;
    }
}

TEST(ConeShoot, EdgeConditionsHoldByConstruction) {
  const auto c = shoot_from_edge(kPi / 3.0, 3, exponents_from_s(-0.5));
  EXPECT_TRUE(c.complete() || c.collapsed);
  EXPECT_DOUBLE_EQ(c.theta.back(), kPi / 3.0);
  EXPECT_NEAR(c.g.back(), 0.0, 1e-10);
  EXPECT_NEAR(c.dg.back(), -1.0, 1e-10);
  // The first integrated sample sits on the edge series.
  const std::size_t k = c.theta.size() - 2;
  const double tau = kPi / 3.0 - c.theta[k];
  EXPECT_NEAR(c.g[k] / tau, 1.0, 1e-5);
  EXPECT_NEAR(c.dg[k], -1.0, 1e-5);
  for (std::size_t j = 0; j + 1 < c.g.size(); ++j) EXPECT_GT(c.g[j], 0.0);
}

TEST(ConeShoot, AxisDefectConvergesAtFourthOrder) {
  const auto p = exponents_from_s(-0.5);
  std::vector<double> defects;
  for (int n : {400, 800, 1600}) {
    ShootConfig cfg;
    cfg.steps = n;
    const auto c = shoot_from_edge(kPi / 3.0, 3, p, cfg);
    ASSERT_TRUE(c.complete());
    defects.push_back(c.axis_defect);
  }
  const double ratio = (defects[0] - defects[1]) / (defects[1] - defects[2]);
  EXPECT_GT(ratio, 12.0);
  EXPECT_LT(ratio, 20.0);
}

TEST(ConeShoot, ReportsCollapse) {
  const auto c = shoot_from_edge(2.5, 3, make_exponents(0.0));
  EXPECT_TRUE(c.collapsed);
  EXPECT_GT(c.collapse_theta, 0.0);
  EXPECT_LT(c.collapse_theta, 2.5);
  EXPECT_FALSE(c.complete());
}

TEST(ConeShoot, RejectsBadArguments) {
  const auto p = make_exponents(0.0);
  EXPECT_THROW(shoot_from_edge(0.0, 3, p), DomainError);
  EXPECT_THROW(shoot_from_edge(kPi, 3, p), DomainError);
  EXPECT_THROW(shoot_from_edge(1.0, 1, p), DomainError);
  ShootConfig few;
  few.steps = 4;
  EXPECT_THROW(shoot_from_edge(1.0, 3, p, few), DomainError);
}

TEST(ConeShoot, LipschitzSanity) {
  const auto h = half_space_profile(3, make_exponents(0.0));
  double mx = 0.0;
  for (std::size_t k = 0; k < h.g.size(); ++k) mx = std::max(mx, std::hypot(h.g[k], h.dg[k]));
  EXPECT_NEAR(mx, 1.0, 1e-12);
  EXPECT_NEAR(std::hypot(h.g.back(), h.dg.back()), 1.0, 0.0);

  const auto c = shoot_from_edge(1.2, 4, make_exponents(-0.5));
  double m2 = 0.0;
  for (std::size_t k = 0; k < c.g.size(); ++k) m2 = std::max(m2, std::hypot(c.g[k], c.dg[k]));
  EXPECT_GE(m2, 1.0);
}

TEST(ConeSearch, AlwaysFindsHalfSpace) {
  ConeSearchConfig cfg;
  cfg.scan_points = 64;
  for (int d : {3, 4, 6, 7})
    for (double gamma : {-1.0, -0.3, 0.0, 0.5}) {
      const auto r = find_axisymmetric_cone(d, make_exponents(gamma), cfg);
      bool found = false;
      for (const auto& c : r.roots) {
        found = found || std::abs(c.theta0 - 0.5 * kPi) < 1e-6;
        EXPECT_LT(std::abs(c.axis_defect), cfg.tolerance);
      }
      EXPECT_TRUE(found) << d << " " << gamma;
    }
}

TEST(ConeSearch, RejectsPlanarCase) {
  try {
    find_axisymmetric_cone(2, make_exponents(0.0));
    FAIL() << "d = 2 accepted";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("logarithmic cutoff"), std::string::npos);
  }
}

TEST(ConeSearch, ScanIsIndependentOfThreadCount) {
  ConeSearchConfig cfg;
  cfg.scan_points = 48;
  const auto p = make_exponents(0.5);
  setenv("ALTPHILLIPS_THREADS", "1", 1);
  const auto a = find_axisymmetric_cone(3, p, cfg);
  setenv("ALTPHILLIPS_THREADS", "3", 1);
  const auto b = find_axisymmetric_cone(3, p, cfg);
  unsetenv("ALTPHILLIPS_THREADS");
  ASSERT_EQ(a.scan_defect.size(), b.scan_defect.size());
  for (std::size_t k = 0; k < a.scan_defect.size(); ++k) {
    if (std::isnan(a.scan_defect[k])) {
      EXPECT_TRUE(std::isnan(b.scan_defect[k]));
    } else {
      EXPECT_EQ(a.scan_defect[k], b.scan_defect[k]);
    }
  }
  ASSERT_EQ(a.roots.size(), b.roots.size());
  for (std::size_t k = 0; k < a.roots.size(); ++k) EXPECT_EQ(a.roots[k].theta0, b.roots[k].theta0);
}

TEST(ConeField, HalfSpaceIsExactOnNodes) {
  const auto h = half_space_profile(3, make_exponents(-0.5));
  const auto w2 = cone_to_field(h, Grid::box(2, {0.125, -1.0, 0.0}, {1.125, 1.0, 0.0}, {9, 17, 1}));
  for (std::size_t i = 0; i < w2.size(); ++i) EXPECT_EQ(w2[i], std::max(w2.grid().point(i)[1], 0.0));
  const auto w3 = cone_to_field(h, Grid::box(3, {0.1, -1.0, -1.0}, {1.0, 1.0, 1.0}, {5, 9, 9}), 0.05);
  for (std::size_t i = 0; i < w3.size(); ++i) EXPECT_EQ(w3[i], std::max(w3.grid().point(i)[2], 0.0));
}

TEST(ConeField, RejectsVertexAndMismatchedDimension) {
  const auto h = half_space_profile(4, make_exponents(0.0));
  EXPECT_THROW(cone_to_field(h, Grid::box(2, {0.0, 0.0, 0.0}, {1.0, 1.0, 0.0}, {5, 5, 1})), DomainError);
  EXPECT_THROW(cone_to_field(h, Grid::box(2, {-1.0, 0.5, 0.0}, {1.0, 1.0, 0.0}, {5, 5, 1})), DomainError);
  EXPECT_THROW(cone_to_field(h, Grid::box(3, {0.5, 0.5, 0.5}, {1.0, 1.0, 1.0}, {3, 3, 3})), ShapeError);
}

TEST(ConeField, ShotProfileResidualIsSecondOrder) {
  for (int d : {3, 5})
    for (double s : {-0.5, 0.4}) {
      const auto c = shoot_from_edge(kPi / 3.0, d, exponents_from_s(s));
      ASSERT_TRUE(c.complete());
      const double r1 = cone_field_residual(cone_to_field(c, meridian(32)), d, s, 0.25);
      const double r2 = cone_field_residual(cone_to_field(c, meridian(64)), d, s, 0.25);
      const double r3 = cone_field_residual(cone_to_field(c, meridian(128)), d, s, 0.25);
      EXPECT_GT(order(r1, r2), 1.8) << d << " " << s;
      EXPECT_GT(order(r2, r3), 1.8) << d << " " << s;
    }
}

TEST(ConeField, CartesianLiftResidualIsSecondOrder) {
  const double s = -0.5;
  const auto c = shoot_from_edge(1.2, 3, exponents_from_s(s));
  ASSERT_TRUE(c.complete());
  auto box = [](std::size_t n) { return Grid::box(3, {-0.5, -0.5, 0.5}, {0.5, 0.5, 1.5}, {n + 1, n + 1, n + 1}); };
  const double r1 = cone_field_residual(cone_to_field(c, box(16)), 3, s, 0.125);
  const double r2 = cone_field_residual(cone_to_field(c, box(32)), 3, s, 0.125);
  EXPECT_GT(order(r1, r2), 1.8);
}

TEST(ConeField, FreeBoundaryIsTheEdgeRay) {
  const double th0 = 1.0;
  const auto c = shoot_from_edge(th0, 3, make_exponents(-0.5));
  for (std::size_t n : {32, 64}) {
    const auto w = cone_to_field(c, meridian(n));
    const auto fb = extract_free_boundary(w);
    ASSERT_TRUE(fb.has_interface());
    const double h = 1.0 / static_cast<double>(n);
    for (const auto& curve : fb.curves)
      for (const auto& pt : curve.points)
        EXPECT_LT(std::abs(pt.x[0] * std::cos(th0) - pt.x[1] * std::sin(th0)), 0.5 * h);
  }
}

TEST(ConeField, HomogeneousUnderNodeAlignedScaling) {
  const auto c = shoot_from_edge(1.0, 4, make_exponents(0.3));
  // lo / h is an integer, so x and 2x are both nodes.
  const Grid g = Grid::box(2, {0.25, 0.25, 0.0}, {2.25, 2.25, 0.0}, {33, 33, 1});
  const auto w = cone_to_field(c, g);
  for (std::size_t i = 0; i < 17; ++i)
    for (std::size_t j = 0; j < 17; ++j) {
      // node (i, j) maps to (2i + 4, 2j + 4) under x -> 2x
      const std::size_t a = i * 33 + j, b = (2 * i + 4) * 33 + (2 * j + 4);
      if (2 * i + 4 >= 33 || 2 * j + 4 >= 33) continue;
      EXPECT_EQ(w[b], 2.0 * w[a]);
    }
}
