#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "altphillips/cones.hpp"
#include "altphillips/error.hpp"
#include "altphillips/exponents.hpp"
#include "altphillips/fields.hpp"
#include "altphillips/parallel.hpp"
#include "altphillips/quadrature.hpp"
#include "altphillips/stability.hpp"

namespace altphillips {

// ---------------------------------------------------------------------------
// Weighted Sturm-Liouville data on [0, theta_end]:
//   quotient = int (scale phi'^2 - a2 phi^2) mu / int phi^2 mu,
//   mu = base^edge_power * smooth.
// base carries the degenerate factor (g for a cone section) and is linear per
// element; smooth and smooth*a2 are linear per element as well.

struct SphericalSection {
  int d = 3;
  double theta0 = 0.5 * std::numbers::pi;
  double edge_power = 0.0;
  double stiffness_scale = 1.0;
  std::vector<double> theta, base, smooth, a2;

  std::size_t size() const { return theta.size(); }

  // rho = g^s (g^2 + g'^2) for a cone section; mu / sin^(d-2) in general.
  double rho(std::size_t i) const {
    const double m = std::pow(std::sin(theta[i]), d - 2);
    const double b = edge_power == 0.0 ? 1.0 : std::pow(base[i], edge_power);
    return m > 0.0 ? b * smooth[i] / m : std::numeric_limits<double>::quiet_NaN();
  }
};

struct SpectrumReport {
  double lambda = 0.0;
  double threshold = 0.0;
  bool stable = false;
  double tolerance = 0.0;
  std::vector<double> theta, eigenfunction;
};

inline double stability_threshold(double d, double s) {
  const double a = 0.5 * (d + s - 2.0);
  return -a * a;
}

inline double hardy_constant(double d, double s) { return -stability_threshold(d, s); }

inline double jacobi_threshold(double d) {
  const double a = 0.5 * (d - 3.0);
  return -a * a;
}

// A^2 of w = r g(theta) on the unit sphere of R^d: the meridian part
// (g + g'')^2 g^2 / (g^2 + g'^2)^2 plus d - 2 rotational principal curvatures
// (g + g' cot theta) / r, divided by |grad w|^2.
inline double cone_a2_on_sphere(const ConeProfile& c, double th) {
  const double g = c.value(th), dg = c.slope(th), ddg = c.second_slope(th);
  const double q = g * g + dg * dg;
  const double m = g + ddg;
  const double rot = th > 0.0 ? g + dg * std::cos(th) / std::sin(th) : g + ddg;
  return m * m * g * g / (q * q) + (c.d - 2) * rot * rot / q;
}

namespace detail {

inline std::vector<double> uniform_nodes(double a, double b, std::size_t elements) {
  if (elements < 2) throw SizeError("spectrum: need at least 2 elements");
  std::vector<double> t(elements + 1);
  for (std::size_t k = 0; k <= elements; ++k)
    t[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(elements);
  t.back() = b;
  return t;
}

// m_j = int_0^1 (a + (b - a) u)^s u^j du, j = 0..3, for a, b >= 0 not both 0.
inline std::array<double, 4> linear_power_moments(double a, double b, double s) {
  std::array<double, 4> m{};
  if (s == 0.0 || a == b) {
    const double c = s == 0.0 ? 1.0 : std::pow(a, s);
    for (int j = 0; j < 4; ++j) m[j] = c / (j + 1);
    return m;
  }
  if (b == 0.0) {
    for (int j = 0; j < 4; ++j) m[j] = std::pow(a, s) * std::beta(j + 1.0, s + 1.0);
    return m;
  }
  if (a == 0.0) {
    for (int j = 0; j < 4; ++j) m[j] = std::pow(b, s) / (s + j + 1.0);
    return m;
  }
  // Smooth on [0, 1]: the singular point u = a / (a - b) lies outside.
  static const UnitRule r = gauss_legendre_unit(6);
  for (int half = 0; half < 2; ++half)
    for (int q = 0; q < r.n; ++q) {
      const double u = 0.5 * (half + r.x[q]);
      const double f = 0.5 * r.w[q] * std::pow(a + (b - a) * u, s);
      double uj = 1.0;
      for (int j = 0; j < 4; ++j, uj *= u) m[j] += f * uj;
    }
  return m;
}

// Symmetric tridiagonal matrix: diag[i], off[i] couples i and i + 1.
struct Tridiag {
  std::vector<double> diag, off;
};

struct SectionPencil {
  Tridiag A, M;  // A = stiffness - potential
};

inline SectionPencil assemble(const SphericalSection& sec) {
  const std::size_t n = sec.size();
  if (n < 3 || sec.base.size() != n || sec.smooth.size() != n || sec.a2.size() != n)
    throw ShapeError("spectrum: section samples have inconsistent sizes");
  SectionPencil P;
  P.A.diag.assign(n, 0.0);
  P.A.off.assign(n - 1, 0.0);
  P.M = P.A;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double h = sec.theta[k + 1] - sec.theta[k];
    if (!(h > 0.0)) throw DomainError("spectrum: section nodes must increase");
    const auto m = linear_power_moments(sec.base[k], sec.base[k + 1], sec.edge_power);
    auto mass = [&](double s0, double s1, double out[3]) {
      const double d1 = s1 - s0;
      out[0] = h * (s0 * m[0] + (d1 - 2 * s0) * m[1] + (s0 - 2 * d1) * m[2] + d1 * m[3]);
      out[1] = h * (s0 * m[1] + (d1 - s0) * m[2] - d1 * m[3]);
      out[2] = h * (s0 * m[2] + d1 * m[3]);
    };
    double mm[3], pp[3];
    mass(sec.smooth[k], sec.smooth[k + 1], mm);
    mass(sec.smooth[k] * sec.a2[k], sec.smooth[k + 1] * sec.a2[k + 1], pp);
    const double w0 = sec.smooth[k] * (m[0] - m[1]) + sec.smooth[k + 1] * m[1];
    const double kk = sec.stiffness_scale * w0 / h;
    P.M.diag[k] += mm[0];
    P.M.off[k] += mm[1];
    P.M.diag[k + 1] += mm[2];
    P.A.diag[k] += kk - pp[0];
    P.A.off[k] += -kk - pp[1];
    P.A.diag[k + 1] += kk - pp[2];
  }
  return P;
}

// Number of eigenvalues of (A, M) below sigma: negative pivots of A - sigma M.
inline std::size_t count_below(const SectionPencil& P, double sigma) {
  const std::size_t n = P.A.diag.size();
  std::size_t neg = 0;
  double piv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double a = P.A.diag[i] - sigma * P.M.diag[i];
    if (i > 0) {
      const double b = P.A.off[i - 1] - sigma * P.M.off[i - 1];
      a -= b * b / piv;
    }
    if (a == 0.0) a = -std::numeric_limits<double>::epsilon() * (std::abs(P.A.diag[i]) + 1.0);
    if (a < 0.0) ++neg;
    piv = a;
  }
  return neg;
}

inline double quadratic(const Tridiag& T, const std::vector<double>& v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    acc += T.diag[i] * v[i] * v[i];
    if (i + 1 < v.size()) acc += 2.0 * T.off[i] * v[i] * v[i + 1];
  }
  return acc;
}

inline Eigen::SparseMatrix<double> to_sparse(const Tridiag& A, const Tridiag& M, double sigma) {
  const auto n = static_cast<Eigen::Index>(A.diag.size());
  std::vector<Eigen::Triplet<double>> t;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    t.emplace_back(i, i, A.diag[u] - sigma * M.diag[u]);
    if (i + 1 < n) {
      const double b = A.off[u] - sigma * M.off[u];
      t.emplace_back(i, i + 1, b);
      t.emplace_back(i + 1, i, b);
    }
  }
  Eigen::SparseMatrix<double> S(n, n);
  S.setFromTriplets(t.begin(), t.end());
  return S;
}

inline std::vector<double> tridiag_apply(const Tridiag& T, const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] += T.diag[i] * v[i];
    if (i + 1 < v.size()) {
      out[i] += T.off[i] * v[i + 1];
      out[i + 1] += T.off[i] * v[i];
    }
  }
  return out;
}

}  // namespace detail

struct EigenPair {
  double value = 0.0;
  double tolerance = 0.0;
  std::vector<double> vector;  // max-norm 1, positive at the first node
};

// k-th eigenpair (k = 0 lowest) of the discretized quotient: the eigenvalue
// by inertia bisection, the vector by shifted inverse iteration.
inline EigenPair section_eigenpair(const SphericalSection& sec, std::size_t k = 0) {
  const auto P = detail::assemble(sec);
  const std::size_t n = sec.size();
  if (k >= n) throw DomainError("section_eigenpair: index beyond the discrete spectrum");
  double a2max = 0.0;
  for (double v : sec.a2) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("section_eigenpair: A^2 samples must be finite and >= 0");
    a2max = std::max(a2max, v);
  }
  double lo = -a2max - 1.0;
  double hi = 1.0;
  while (detail::count_below(P, hi) < k + 1) {
    hi = 2.0 * hi + 1.0;
    if (hi > 1e300) throw NumericalError("section_eigenpair: no upper bracket");
  }
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (detail::count_below(P, mid) >= k + 1)
      hi = mid;
    else
      lo = mid;
    if (hi - lo <= 1e-14 * std::max(1.0, std::abs(hi))) break;
  }
  EigenPair out;
  out.value = 0.5 * (lo + hi);
  out.tolerance = std::max(hi - lo, 1e-12 * std::max(1.0, std::abs(out.value)));

  const double sigma = out.value - 1e-9 * std::max(1.0, std::abs(out.value));
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(detail::to_sparse(P.A, P.M, sigma));
  if (lu.info() != Eigen::Success) throw NumericalError("section_eigenpair: shifted factorisation failed");
  std::vector<double> v(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) v[i] += 1e-3 * static_cast<double>(i % 7);
  for (int it = 0; it < 8; ++it) {
    const auto rhs = detail::tridiag_apply(P.M, v);
    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) b[static_cast<Eigen::Index>(i)] = rhs[i];
    const Eigen::VectorXd x = lu.solve(b);
    double big = 0.0;
    for (std::size_t i = 0; i < n; ++i) big = std::max(big, std::abs(x[static_cast<Eigen::Index>(i)]));
    if (!(big > 0.0) || !std::isfinite(big)) throw NumericalError("section_eigenpair: inverse iteration diverged");
    for (std::size_t i = 0; i < n; ++i) v[i] = x[static_cast<Eigen::Index>(i)] / big;
  }
  if (v.front() < 0.0)
    for (double& x : v) x = -x;
  out.vector = std::move(v);
  return out;
}

// Discrete quotient of nodal trial values.
inline double rayleigh_quotient(const SphericalSection& sec, const std::vector<double>& phi) {
  if (phi.size() != sec.size()) throw ShapeError("rayleigh_quotient: trial length differs from the section");
  const auto P = detail::assemble(sec);
  return detail::quadratic(P.A, phi) / detail::quadratic(P.M, phi);
}

// Section of a certified cone on a uniform theta grid; A^2 from the closed
// angular formula (see section_a2_grid for the lifted-field route).
inline SphericalSection section_from_profile(const ConeProfile& c, std::size_t elements = 800) {
  if (!c.exact_half_space && !c.complete())
    throw DomainError("section_from_profile: profile is not a complete cone");
  if (c.d < 3) throw DomainError("section_from_profile: dimension must be at least 3");
  SphericalSection sec;
  sec.d = c.d;
  sec.theta0 = c.theta0;
  sec.edge_power = c.pack.s;
  sec.theta = detail::uniform_nodes(0.0, c.theta0, elements);
  const std::size_t n = sec.theta.size();
  sec.base.resize(n);
  sec.smooth.resize(n);
  sec.a2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double th = sec.theta[i];
    const double g = i + 1 == n ? 0.0 : c.value(th);
    const double dg = i + 1 == n ? -1.0 : c.slope(th);
    if (i + 1 < n && !(g > 0.0)) throw DomainError("section_from_profile: g must be positive inside the cone");
    sec.base[i] = g;
    sec.smooth[i] = (g * g + dg * dg) * std::pow(std::sin(th), c.d - 2);
    sec.a2[i] = i + 1 == n ? (c.d - 2) * std::pow(std::cos(th) / std::sin(th), 2) : cone_a2_on_sphere(c, th);
  }
  return sec;
}

// rho = 1 and A^2 = 0 on [0, theta_end]: the axisymmetric Neumann Laplacian.
inline SphericalSection unit_weight_section(int d, double theta_end, std::size_t elements = 800) {
  SphericalSection sec;
  sec.d = d;
  sec.theta0 = theta_end;
  sec.theta = detail::uniform_nodes(0.0, theta_end, elements);
  const std::size_t n = sec.theta.size();
  sec.base.assign(n, 1.0);
  sec.a2.assign(n, 0.0);
  sec.smooth.resize(n);
  for (std::size_t i = 0; i < n; ++i) sec.smooth[i] = std::pow(std::abs(std::sin(sec.theta[i])), d - 2);
  return sec;
}

inline SpectrumReport lambda_s(const SphericalSection& sec, const ExponentPack& p) {
  const auto e = section_eigenpair(sec, 0);
  SpectrumReport r;
  r.lambda = e.value;
  r.tolerance = e.tolerance;
  r.threshold = stability_threshold(sec.d, p.s);
  r.stable = r.lambda >= r.threshold - r.tolerance;
  r.theta = sec.theta;
  r.eigenfunction = e.vector;
  return r;
}

// A^2 of the lifted cone at the unit-sphere points of `theta`: meridian field
// on [0, 1.25] x [-1.25, 1.25] with `nodes` per axis, meridian A^2 from the
// grid plus the rotational part (d - 2) (w_tau / tau)^2 / |grad w|^2
// (w_tau_tau on the axis), bilinear in the containing cell. NaN where a
// corner is masked.
inline std::vector<double> section_a2_grid(const ConeProfile& c, const std::vector<double>& theta,
                                           std::size_t nodes = 201) {
  // An even node count along x_d keeps the vertex off the grid.
  const Grid g = Grid::box(2, {0.0, -1.25, 0.0}, {1.25, 1.25, 0.0}, {nodes, 2 * nodes, 1});
  const ScalarField w = cone_to_field(c, g, 0.25 * g.max_spacing());
  const auto D = detail::phase_derivatives(w);
  const CurvatureField cf = curvature_from(w, D, 0.0);
  std::vector<double> a2(w.size(), 0.0);
  std::vector<char> ok(w.size(), 0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!cf.valid[i]) continue;
    const double tau = g.point(i)[0];
    const double q = detail::norm_sq(D.grad[i], 2);
    const double k = tau > 0.0 ? D.grad[i][0] / tau : D.hess[i][0][0];
    a2[i] = cf.a2[i] + (c.d - 2) * k * k / q;
    ok[i] = 1;
  }
  std::vector<double> out(theta.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double x = std::sin(theta[j]), y = std::cos(theta[j]);
    const double fx = (x - g.origin[0]) / g.spacing[0], fy = (y - g.origin[1]) / g.spacing[1];
    const auto ix = std::min(static_cast<std::size_t>(std::max(fx, 0.0)), g.nodes[0] - 2);
    const auto iy = std::min(static_cast<std::size_t>(std::max(fy, 0.0)), g.nodes[1] - 2);
    const double tx = fx - static_cast<double>(ix), ty = fy - static_cast<double>(iy);
    double v = 0.0;
    bool good = true;
    for (int cx = 0; cx < 2; ++cx)
      for (int cy = 0; cy < 2; ++cy) {
        const std::size_t i = g.flatten({ix + cx, iy + cy, 0});
        good = good && ok[i];
        v += (cx ? tx : 1 - tx) * (cy ? ty : 1 - ty) * a2[i];
      }
    if (good) out[j] = v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Radial Hardy quotient  int r^(s+d-1) g'^2 / int r^(s+d-3) g^2  over P1
// functions of t = log r vanishing at both ends. Element integrals of e^(a t)
// are exact, and rows are scaled by e^(-a t_i / 2) so entries stay O(1).

struct HardyResult {
  double value = 0.0;
  double exact = 0.0;
  double r_min = 0.0, r_max = 0.0;
  std::size_t nodes = 0;
};

inline HardyResult hardy_constant_numeric(double d, double s, double r_min = 1e-3, double r_max = 1e3,
                                          std::size_t nodes = 4000) {
  if (!(r_min > 0.0) || !(r_max > r_min)) throw DomainError("hardy_constant_numeric: need 0 < r_min < r_max");
  if (nodes < 4) throw SizeError("hardy_constant_numeric: need at least 4 nodes");
  const double a = d + s - 2.0;
  const double t0 = std::log(r_min), t1 = std::log(r_max);
  const double h = (t1 - t0) / static_cast<double>(nodes - 1);
  // e^(a u) moments on [0, h] against 1, u, u^2, expressed relative to the
  // scaling of the two end nodes: e^(-a h / 2) * int_0^h e^(a u) u^j du.
  auto moment = [&](int j) {
    static const UnitRule r = gauss_legendre_unit(6);
    double acc = 0.0;
    for (int q = 0; q < r.n; ++q) {
      const double u = h * r.x[q];
      acc += h * r.w[q] * std::exp(a * (u - 0.5 * h)) * std::pow(u, j);
    }
    return acc;
  };
  const double m0 = moment(0), m1 = moment(1), m2 = moment(2);
  const double c = std::exp(0.5 * a * h);
  // Interior unknowns 1..nodes-2; element k spans nodes k, k+1.
  const std::size_t n = nodes - 2;
  detail::SectionPencil P;
  P.A.diag.assign(n, 0.0);
  P.A.off.assign(n - 1, 0.0);
  P.M = P.A;
  for (std::size_t k = 0; k + 1 < nodes; ++k) {
    // Local entries with scaling e^(-a (t_i + t_j) / 2) relative to e^(a t_k):
    // (0,0): e^(-a h/2) factor inverted, (1,1): e^(+a h/2) folded, (0,1): none.
    const double k00 = c * m0 / (h * h), k11 = m0 / (c * h * h), k01 = -m0 / (h * h);
    const double q00 = c * (m0 - 2 * m1 / h + m2 / (h * h));
    const double q11 = m2 / (c * h * h);
    const double q01 = (m1 / h - m2 / (h * h));
    const bool left = k >= 1, right = k + 1 <= nodes - 2;
    if (left) {
      P.A.diag[k - 1] += k00;
      P.M.diag[k - 1] += q00;
    }
    if (right) {
      P.A.diag[k] += k11;
      P.M.diag[k] += q11;
    }
    if (left && right) {
      P.A.off[k - 1] += k01;
      P.M.off[k - 1] += q01;
    }
  }
  double lo = 0.0, hi = 1.0;
  while (detail::count_below(P, hi) < 1) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (detail::count_below(P, mid) >= 1 ? hi : lo) = mid;
  }
  HardyResult out;
  out.value = 0.5 * (lo + hi);
  out.exact = hardy_constant(d, s);
  out.r_min = r_min;
  out.r_max = r_max;
  out.nodes = nodes;
  return out;
}

// ---------------------------------------------------------------------------
// Jacobi operator of a latitude sphere M = {theta = theta0} in S^(d-1).

// Geodesic curvature of the latitude circle in S^2, by central differences of
// the embedded curve projected onto the sphere's tangent plane.
inline double latitude_geodesic_curvature(double theta0, double step = 1e-3) {
  const double R = std::sin(theta0), z = std::cos(theta0);
  auto p = [&](double phi) { return std::array<double, 3>{R * std::cos(phi), R * std::sin(phi), z}; };
  const auto a = p(-step), b = p(0.0), c = p(step);
  const double ds = R * step;
  std::array<double, 3> k{};
  double kn = 0.0;
  for (int i = 0; i < 3; ++i) {
    k[i] = (a[i] - 2 * b[i] + c[i]) / (ds * ds);
    kn += k[i] * b[i];
  }
  double kg2 = 0.0;
  for (int i = 0; i < 3; ++i) kg2 += std::pow(k[i] - kn * b[i], 2);
  // Sign: positive when the curve bends toward the pole theta = 0.
  return theta0 < 0.5 * std::numbers::pi ? std::sqrt(kg2) : -std::sqrt(kg2);
}

// Lowest eigenvalue of -Delta_M - |A_M|^2 over axisymmetric functions on M,
// a round S^(d-2) of radius sin(theta0) parametrised by its polar angle.
inline SpectrumReport jacobi_lambda_latitude(int d, double theta0, std::size_t elements = 400) {
  if (d < 3) throw DomainError("jacobi_lambda_latitude: dimension must be at least 3");
  if (!(theta0 > 0.0 && theta0 < std::numbers::pi)) throw DomainError("jacobi_lambda_latitude: theta0 must lie in (0, pi)");
  const double kg = latitude_geodesic_curvature(theta0);
  const double R = std::sin(theta0);
  SphericalSection sec;
  sec.d = d - 1;
  sec.theta0 = std::numbers::pi;
  sec.stiffness_scale = 1.0 / (R * R);
  sec.theta = detail::uniform_nodes(0.0, std::numbers::pi, elements);
  const std::size_t n = sec.theta.size();
  sec.base.assign(n, 1.0);
  sec.a2.assign(n, (d - 2) * kg * kg);
  sec.smooth.resize(n);
  for (std::size_t i = 0; i < n; ++i) sec.smooth[i] = std::pow(std::abs(std::sin(sec.theta[i])), d - 3);
  const auto e = section_eigenpair(sec, 0);
  SpectrumReport r;
  r.lambda = e.value;
  r.tolerance = e.tolerance;
  r.threshold = jacobi_threshold(d);
  r.stable = r.lambda >= r.threshold - r.tolerance;
  r.theta = sec.theta;
  r.eigenfunction = e.vector;
  return r;
}

inline double jacobi_lambda_closed_form(int d, double theta0) {
  const double c = std::cos(theta0) / std::sin(theta0);
  return -(d - 2) * c * c;
}

// ---------------------------------------------------------------------------
// s -> -1 limit.

// (1 + s) int_0^delta t^s dt: the share of the normalised density of w = t_+
// that sits in the slab {0 < x_d < delta}.
inline double measure_concentration_1d(double s, double delta) {
  if (!(s > -1.0)) throw DomainError("measure_concentration_1d: s must exceed -1");
  if (!(delta > 0.0)) throw DomainError("measure_concentration_1d: delta must be positive");
  return (1.0 + s) * power_moment(0.0, delta, s);
}

struct SweepRow {
  double gamma = 0.0, s = 0.0;
  double lambda = 0.0, threshold = 0.0;
  bool stable = false;
  double concentration = 0.0;
  double jacobi_target = 0.0, jacobi_threshold = 0.0;
  std::string note;
};

// Half-space family when `family` is empty; otherwise one profile per gamma
// (same order), skipped with a note when it is not a complete cone.
inline std::vector<SweepRow> asymptotic_sweep(int d, const std::vector<double>& gammas, double delta = 0.5,
                                              std::size_t elements = 400,
                                              const std::vector<ConeProfile>& family = {}) {
  if (!family.empty() && family.size() != gammas.size())
    throw ShapeError("asymptotic_sweep: one profile per gamma is required");
  std::vector<SweepRow> rows(gammas.size());
  const double target = jacobi_lambda_latitude(d, family.empty() ? 0.5 * std::numbers::pi : family.front().theta0).lambda;
  parallel_for(gammas.size(), [&](std::size_t k) {
    SweepRow& row = rows[k];
    const auto p = make_exponents(gammas[k]);
    row.gamma = gammas[k];
    row.s = p.s;
    row.threshold = stability_threshold(d, p.s);
    row.concentration = measure_concentration_1d(p.s, delta);
    row.jacobi_target = target;
    row.jacobi_threshold = jacobi_threshold(d);
    const ConeProfile c = family.empty() ? half_space_profile(d, p) : family[k];
    if (!c.exact_half_space && !c.complete()) {
      row.note = "profile is not a complete cone; skipped";
      row.lambda = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    const auto r = lambda_s(section_from_profile(c, elements), p);
    row.lambda = r.lambda;
    row.stable = r.stable;
  });
  return rows;
}

// ---------------------------------------------------------------------------
// Classification of every cone found by shooting.

struct ConeVerdict {
  double theta0 = 0.0;
  bool half_space = false;
  SpectrumReport report;
};

struct RigidityReport {
  int d = 3;
  ExponentPack pack{};
  ThetaWindow window{};
  std::vector<ConeVerdict> cones;

  std::size_t non_half_space() const {
    std::size_t n = 0;
    for (const auto& c : cones) n += !c.half_space;
    return n;
  }
  bool all_candidates_unstable() const {
    for (const auto& c : cones)
      if (!c.half_space && c.report.stable) return false;
    return true;
  }
};

inline RigidityReport classify_cones(int d, const ExponentPack& p, const ConeSearchConfig& cfg = {},
                                     std::size_t elements = 800) {
  RigidityReport out;
  out.d = d;
  out.pack = p;
  out.window = theta_window(d, p.s);
  const auto found = find_axisymmetric_cone(d, p, cfg);
  for (const auto& c : found.roots) {
    ConeVerdict v;
    v.theta0 = c.theta0;
    v.half_space = std::abs(c.theta0 - 0.5 * std::numbers::pi) < 1e-6;
    v.report = lambda_s(section_from_profile(v.half_space ? half_space_profile(d, p) : c, elements), p);
    out.cones.push_back(std::move(v));
  }
  return out;
}

}  // namespace altphillips
