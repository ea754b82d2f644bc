#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "altphillips/spectrum.hpp"

using namespace altphillips;

namespace {

constexpr double kPi = std::numbers::pi;

// Second axisymmetric eigenvalue of the half-space section: cos^2 - (s+1)/(s+d)
// is an eigenfunction of the weighted operator with eigenvalue 2(s + d).
double half_space_second(double d, double s) { return 2.0 * (s + d); }

double beta_fn(double a, double b) { return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)); }

}  // namespace

TEST(Thresholds, ReferenceValues) {
  EXPECT_DOUBLE_EQ(stability_threshold(3, 0.0), -0.25);
  EXPECT_DOUBLE_EQ(hardy_constant(3, 0.0), 0.25);
  const double s7 = 2.0 * std::sqrt(5.0) - 5.0;
  EXPECT_NEAR(stability_threshold(7, s7), -5.0, 1e-12);
  // Same boundary as the exponent window: its upper end squared is d - 2.
  const auto tw = theta_window(7, s7);
  EXPECT_NEAR(stability_threshold(7, s7), -tw.hi * tw.hi, 1e-12);
  EXPECT_FALSE(tw.feasible);
  EXPECT_DOUBLE_EQ(jacobi_threshold(3), 0.0);
  EXPECT_DOUBLE_EQ(jacobi_threshold(7), -4.0);
}

TEST(Thresholds, ThresholdIsMinusHardyConstant) {
  for (int d = 2; d <= 9; ++d)
    for (double s = -0.99; s < 3.0; s += 0.137) EXPECT_NEAR(stability_threshold(d, s) + hardy_constant(d, s), 0.0, 1e-12);
}

TEST(HalfSpaceSection, ZeroEigenvalueWithConstantEigenfunction) {
  for (int d : {3, 4, 5, 7})
    for (double s : {-0.99, -0.9, -0.5, 0.0, 0.9}) {
      const auto p = exponents_from_s(s);
      const auto r = lambda_s(section_from_profile(half_space_profile(d, p), 400), p);
      EXPECT_NEAR(r.lambda, 0.0, 1e-6) << d << " " << s;
      EXPECT_TRUE(r.stable);
      EXPECT_DOUBLE_EQ(r.threshold, stability_threshold(d, s));
      for (double v : r.eigenfunction) EXPECT_NEAR(v, 1.0, 1e-6);
    }
}

TEST(HalfSpaceSection, SecondEigenvalueMatchesPolynomialEigenfunction) {
  for (int d : {3, 5})
    for (double s : {-0.9, -0.5, 0.0, 0.5}) {
      const auto sec = section_from_profile(half_space_profile(d, exponents_from_s(s)), 400);
      const double lam = section_eigenpair(sec, 1).value;
      EXPECT_NEAR(lam / half_space_second(d, s), 1.0, 1e-4) << d << " " << s;
    }
}

TEST(HalfSpaceSection, RefinementErrorIsSecondOrder) {
  for (double s : {-0.9, -0.5, 0.5}) {
    const double exact = half_space_second(3, s);
    double prev = 0.0;
    for (std::size_t n : {100, 200, 400}) {
      const auto sec = section_from_profile(half_space_profile(3, exponents_from_s(s)), n);
      const double err = std::abs(section_eigenpair(sec, 1).value - exact);
      if (prev > 0.0) {
        EXPECT_GT(prev / err, 3.5) << "s = " << s << " n = " << n;
        EXPECT_LT(prev / err, 4.5) << "s = " << s << " n = " << n;
      }
      prev = err;
    }
  }
}

TEST(UnitWeightSection, SphereNeumannEigenvalues) {
  // Axisymmetric spherical harmonics: l (l + d - 2).
  const auto s3 = unit_weight_section(3, kPi, 400);
  EXPECT_NEAR(section_eigenpair(s3, 0).value, 0.0, 1e-9);
  EXPECT_NEAR(section_eigenpair(s3, 1).value / 2.0, 1.0, 5e-3);
  EXPECT_NEAR(section_eigenpair(s3, 2).value / 6.0, 1.0, 5e-3);
  const auto s5 = unit_weight_section(5, kPi, 400);
  EXPECT_NEAR(section_eigenpair(s5, 1).value / 4.0, 1.0, 5e-3);
  // Hemisphere with a Neumann equator keeps only even l.
  const auto h3 = unit_weight_section(3, 0.5 * kPi, 400);
  EXPECT_NEAR(section_eigenpair(h3, 1).value / 6.0, 1.0, 5e-3);
}

TEST(UnitWeightSection, FirstHarmonicIsCosine) {
  const auto e = section_eigenpair(unit_weight_section(3, kPi, 400), 1);
  const auto sec = unit_weight_section(3, kPi, 400);
  for (std::size_t i = 0; i < sec.size(); i += 20) EXPECT_NEAR(e.vector[i], std::cos(sec.theta[i]), 1e-3);
}

TEST(Rayleigh, TrialQuotientsBoundTheEigenvalue) {
  const auto p = make_exponents(0.5);
  const auto roots = find_axisymmetric_cone(3, p).roots;
  ASSERT_FALSE(roots.empty());
  std::vector<SphericalSection> sections{section_from_profile(roots.back(), 400),
                                         section_from_profile(half_space_profile(4, exponents_from_s(-0.5)), 200),
                                         unit_weight_section(3, kPi, 200)};
  for (const auto& sec : sections) {
    const double lam = section_eigenpair(sec, 0).value;
    for (int trial = 0; trial < 4; ++trial) {
      std::vector<double> phi(sec.size());
      for (std::size_t i = 0; i < sec.size(); ++i) {
        const double t = sec.theta[i];
        phi[i] = trial == 0 ? 1.0 : trial == 1 ? std::cos(t) + 2.0 : trial == 2 ? 1.0 + t * t : std::exp(-t) + 0.1 * std::sin(7 * t);
      }
      EXPECT_GE(rayleigh_quotient(sec, phi), lam - 1e-9 * std::max(1.0, std::abs(lam)));
    }
  }
}

TEST(Rayleigh, RejectsWrongTrialLength) {
  const auto sec = unit_weight_section(3, kPi, 20);
  EXPECT_THROW(rayleigh_quotient(sec, std::vector<double>(5, 1.0)), ShapeError);
}

TEST(SectionA2, ClosedFormVanishesOnHalfSpace) {
  const auto c = half_space_profile(5, exponents_from_s(-0.5));
  for (double t = 0.0; t < 0.5 * kPi; t += 0.05) EXPECT_NEAR(cone_a2_on_sphere(c, t), 0.0, 1e-24);
}

TEST(SectionA2, GridRouteConvergesToClosedFormAtSecondOrder) {
  const auto c = shoot_from_edge(1.3, 3, make_exponents(-1.0));
  const std::vector<double> th{0.5, 0.8, 1.0};
  double prev = 0.0;
  for (std::size_t n : {101, 201, 401}) {
    const auto a = section_a2_grid(c, th, n);
    double err = 0.0;
    for (std::size_t j = 0; j < th.size(); ++j) {
      ASSERT_TRUE(std::isfinite(a[j]));
      err = std::max(err, std::abs(a[j] / cone_a2_on_sphere(c, th[j]) - 1.0));
    }
    if (prev > 0.0) {
      EXPECT_GT(prev / err, 3.0) << "n = " << n;
    }
    prev = err;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(SectionA2, GridRouteIsZeroOnHalfSpace) {
  const auto c = half_space_profile(4, exponents_from_s(-0.5));
  const auto a = section_a2_grid(c, {0.2, 0.7, 1.2}, 101);
  for (double v : a) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(SectionFromProfile, EdgeCurvatureIsLatitudeValue) {
  const auto p = make_exponents(0.5);
  const auto roots = find_axisymmetric_cone(3, p).roots;
  ASSERT_FALSE(roots.empty());
  const auto sec = section_from_profile(roots.back(), 400);
  const double cot = std::cos(sec.theta0) / std::sin(sec.theta0);
  EXPECT_DOUBLE_EQ(sec.a2.back(), cot * cot);
  EXPECT_EQ(sec.base.back(), 0.0);
}

TEST(SectionFromProfile, RejectsCollapsedShot) {
  ConeProfile c = shoot_from_edge(1.0, 4, make_exponents(-1.0));
  c.collapsed = true;
  EXPECT_THROW(section_from_profile(c), DomainError);
}

TEST(Hardy, FiniteIntervalMinimumIsConstantPlusDirichletGap) {
  // With t = log r and g = e^(-a t/2) v the quotient becomes
  // int v'^2 + (a/2)^2 v^2 over int v^2, minimised by a sine on [log r_min, log r_max].
  for (auto [d, s] : std::vector<std::pair<double, double>>{{3, 0.0}, {5, -0.5}, {7, 2 * std::sqrt(5.0) - 5}}) {
    const auto h = hardy_constant_numeric(d, s, 1e-3, 1e3, 4000);
    const double L = std::log(1e6);
    EXPECT_NEAR(h.value / (hardy_constant(d, s) + kPi * kPi / (L * L)), 1.0, 1e-5);
  }
}

TEST(Hardy, ApproachesFromAboveUnderWidening) {
  for (auto [d, s] : std::vector<std::pair<double, double>>{{3, 0.0}, {5, -0.5}, {7, 2 * std::sqrt(5.0) - 5}}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double e : {3.0, 6.0, 12.0}) {
      const auto h = hardy_constant_numeric(d, s, std::pow(10.0, -e), std::pow(10.0, e), 8000);
      EXPECT_GT(h.value, h.exact);
      EXPECT_LT(h.value, prev);
      prev = h.value;
    }
    EXPECT_NEAR(prev / hardy_constant(d, s), 1.0, 2e-2) << d << " " << s;
  }
}

TEST(Hardy, RejectsBadRange) {
  EXPECT_THROW(hardy_constant_numeric(3, 0.0, 0.0, 1.0), DomainError);
  EXPECT_THROW(hardy_constant_numeric(3, 0.0, 2.0, 1.0), DomainError);
}

TEST(Hardy, RadialFactorOfFlatQuadraticFormReproducesOneDimensionalQuotient) {
  // On w = x_2 (A^2 = 0) a radial f = g(r) gives Q = M0 int r^(s+1) g'^2 with
  // M0 = int cos^s over the half circle. For the finite-interval Hardy
  // minimiser g, Q / (M0 int r^(s-1) g^2) is the 1D Hardy minimum.
  const double r1 = 0.1, r2 = 1.0, L = std::log(r2 / r1);
  for (double s : {-0.5, 0.5}) {
    const auto p = exponents_from_s(s);
    const double a = s;  // d + s - 2 with d = 2
    auto g = [&](double r) {
      return r <= r1 || r >= r2 ? 0.0 : std::pow(r, -0.5 * a) * std::sin(kPi * std::log(r / r1) / L);
    };
    const Grid grid = Grid::box(2, {-1.05, 0.0, 0.0}, {1.05, 1.05, 0.0}, {513, 257, 1});
    const auto w = ScalarField::sample(grid, [](const Vec3& x) { return std::max(x[1], 0.0); });
    const auto f = ScalarField::sample(grid, [&](const Vec3& x) { return g(std::hypot(x[0], x[1])); });
    const double q = quadratic_form_Q(w, p, f);
    const double m0 = beta_fn(0.5, 0.5 * (s + 1.0));
    const UnitRule rule = gauss_legendre_unit(6);
    double den = 0.0;
    const int panels = 400;
    for (int k = 0; k < panels; ++k)
      for (int j = 0; j < rule.n; ++j) {
        const double t = std::log(r1) + L * (k + rule.x[j]) / panels;
        const double r = std::exp(t);
        den += rule.w[j] * L / panels * r * std::pow(r, s - 1.0) * g(r) * g(r);
      }
    const double oned = hardy_constant_numeric(2, s, r1, r2, 2000).value;
    EXPECT_NEAR(q / (m0 * den) / oned, 1.0, 2e-2) << "s = " << s;
  }
}

TEST(Jacobi, GeodesicCurvatureOfLatitude) {
  for (double t : {0.3, 1.0, 1.4, 2.0, 2.8})
    EXPECT_NEAR(latitude_geodesic_curvature(t), std::cos(t) / std::sin(t), 1e-6 * (1.0 + std::abs(std::cos(t) / std::sin(t))));
}

TEST(Jacobi, DiscretisedEigenvalueMatchesClosedForm) {
  for (int d : {3, 4, 6, 8})
    for (double t : {0.3, 1.0, kPi / 3, 2.5}) {
      const auto r = jacobi_lambda_latitude(d, t);
      EXPECT_NEAR(r.lambda / jacobi_lambda_closed_form(d, t), 1.0, 1e-2) << d << " " << t;
      for (double v : r.eigenfunction) EXPECT_NEAR(v, 1.0, 1e-6);
    }
}

TEST(Jacobi, EquatorIsStableAndSixtyDegreesInFourDimensionsIsNot) {
  const auto eq = jacobi_lambda_latitude(5, 0.5 * kPi);
  EXPECT_NEAR(eq.lambda, 0.0, 1e-9);
  EXPECT_TRUE(eq.stable);
  const auto r = jacobi_lambda_latitude(4, kPi / 3);
  EXPECT_NEAR(r.lambda, -2.0 / 3.0, 1e-6);
  EXPECT_DOUBLE_EQ(r.threshold, -0.25);
  EXPECT_FALSE(r.stable);
}

TEST(Jacobi, RejectsBadArguments) {
  EXPECT_THROW(jacobi_lambda_latitude(2, 1.0), DomainError);
  EXPECT_THROW(jacobi_lambda_latitude(3, 0.0), DomainError);
  EXPECT_THROW(jacobi_lambda_latitude(3, kPi), DomainError);
}

TEST(Concentration, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(measure_concentration_1d(0.0, 0.5), 0.5);
  EXPECT_NEAR(measure_concentration_1d(-0.99, 0.5), std::pow(0.5, 0.01), 1e-14);
  EXPECT_NEAR(measure_concentration_1d(-0.99, 0.5), 0.9931, 1e-4);
  double prev = 0.0;
  for (double s : {-0.5, -0.9, -0.99, -0.999}) {
    const double v = measure_concentration_1d(s, 0.5);
    EXPECT_GT(v, prev);
    EXPECT_LT(v, 1.0);
    prev = v;
  }
  EXPECT_THROW(measure_concentration_1d(-1.0, 0.5), DomainError);
  EXPECT_THROW(measure_concentration_1d(0.0, 0.0), DomainError);
}

TEST(Sweep, HalfSpaceFamilyTracksJacobiTarget) {
  std::vector<double> gammas;
  for (double s : {-0.5, -0.9, -0.99, -0.999}) gammas.push_back(exponents_from_s(s).gamma);
  const auto rows = asymptotic_sweep(4, gammas, 0.5, 200);
  ASSERT_EQ(rows.size(), 4u);
  double prev_thr = -1e300;
  for (const auto& row : rows) {
    EXPECT_NEAR(row.lambda - row.jacobi_target, 0.0, 1e-6);
    EXPECT_TRUE(row.stable);
    EXPECT_GT(row.threshold, prev_thr);  // (d + s - 2)^2 shrinks as s decreases
    prev_thr = row.threshold;
    // Linear rate: the gap over (1 + s) tends to (d - 3) / 2.
    const double gap = row.threshold - row.jacobi_threshold;
    EXPECT_NEAR(-gap / (1.0 + row.s), 0.5 * (4 - 3) + 0.25 * (1.0 + row.s), 1e-9);
    EXPECT_NEAR(row.concentration, std::pow(0.5, 1.0 + row.s), 1e-14);
  }
}

TEST(Sweep, SkipsIncompleteProfilesWithNote) {
  const double ga = exponents_from_s(-0.5).gamma;
  auto bad = shoot_from_edge(1.0, 4, make_exponents(ga));
  bad.collapsed = true;
  const auto rows = asymptotic_sweep(4, {ga}, 0.5, 100, {bad});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].note.empty());
  EXPECT_TRUE(std::isnan(rows[0].lambda));
}

TEST(Classification, FourDimensionsGammaMinusOneHasOnlyTheHalfSpace) {
  const auto r = classify_cones(4, make_exponents(-1.0));
  EXPECT_TRUE(r.all_candidates_unstable());
  for (const auto& c : r.cones) {
    if (c.half_space) {
      EXPECT_TRUE(c.report.stable);
    }
  }
}

TEST(Classification, PositiveGammaCandidatesAreFlaggedUnstable) {
  const auto r = classify_cones(3, make_exponents(0.5));
  ASSERT_GE(r.non_half_space(), 1u);
  EXPECT_TRUE(r.all_candidates_unstable());
  for (const auto& c : r.cones) {
    if (!c.half_space) {
      EXPECT_LT(c.report.lambda, c.report.threshold);
    }
  }
}
