#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "altphillips/error.hpp"
#include "altphillips/exponents.hpp"
#include "altphillips/fields.hpp"
#include "altphillips/parallel.hpp"

namespace altphillips {

// Angular reduction for w = r g(theta), theta measured from the +x_d axis:
// g'' + (d-2) cot(theta) g' + (d-1) g = (s/2)(1 - g^2 - g'^2)/g.
inline double cone_ode_rhs(double theta, double g, double dg, int d, double s) {
  if (!(g > 0.0)) throw DomainError("cone_ode_rhs: g must be positive (past the free boundary)");
  if (!(theta > 0.0 && theta < std::numbers::pi)) throw DomainError("cone_ode_rhs: theta must lie in (0, pi)");
  return 0.5 * s * (1.0 - g * g - dg * dg) / g - (d - 2) * std::cos(theta) / std::sin(theta) * dg - (d - 1) * g;
}

// Limit of g'' at the axis for a profile with g'(0) = 0.
inline double cone_axis_second_derivative(double g0, int d, double s) {
  if (!(g0 > 0.0)) throw DomainError("cone_axis_second_derivative: g(0) must be positive");
  return (0.5 * s * (1.0 - g0 * g0) / g0 - (d - 1) * g0) / (d - 1);
}

namespace detail {

// Quintic Hermite interpolation (order 0) or its first/second derivative
// from samples of f, f', f'' at increasing abscissae in [x.front(), x.back()].
inline double quintic_hermite(const std::vector<double>& xs, const std::vector<double>& f,
                              const std::vector<double>& df, const std::vector<double>& ddf, double x,
                              int order = 0) {
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t k = static_cast<std::size_t>(it - xs.begin());
  k = k == 0 ? 0 : std::min(k - 1, xs.size() - 2);
  const double h = xs[k + 1] - xs[k];
  const double t = (x - xs[k]) / h;
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  double b[6];
  if (order == 0) {
    b[0] = 1 - 10 * t3 + 15 * t4 - 6 * t5;
    b[1] = t - 6 * t3 + 8 * t4 - 3 * t5;
    b[2] = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
    b[3] = 10 * t3 - 15 * t4 + 6 * t5;
    b[4] = -4 * t3 + 7 * t4 - 3 * t5;
    b[5] = 0.5 * (t3 - 2 * t4 + t5);
  } else if (order == 1) {
    b[0] = -30 * t2 + 60 * t3 - 30 * t4;
    b[1] = 1 - 18 * t2 + 32 * t3 - 15 * t4;
    b[2] = 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4);
    b[3] = 30 * t2 - 60 * t3 + 30 * t4;
    b[4] = -12 * t2 + 28 * t3 - 15 * t4;
    b[5] = 0.5 * (3 * t2 - 8 * t3 + 5 * t4);
  } else {
    b[0] = -60 * t + 180 * t2 - 120 * t3;
    b[1] = -36 * t + 96 * t2 - 60 * t3;
    b[2] = 0.5 * (2 - 18 * t + 36 * t2 - 20 * t3);
    b[3] = 60 * t - 180 * t2 + 120 * t3;
    b[4] = -24 * t + 84 * t2 - 60 * t3;
    b[5] = 0.5 * (6 * t - 24 * t2 + 20 * t3);
  }
  const double v = b[0] * f[k] + b[1] * h * df[k] + b[2] * h * h * ddf[k] + b[3] * f[k + 1] +
                   b[4] * h * df[k + 1] + b[5] * h * h * ddf[k + 1];
  return order == 0 ? v : order == 1 ? v / h : v / (h * h);
}

}  // namespace detail

struct ConeProfile {
  int d = 3;
  ExponentPack pack{};
  double theta0 = 0.5 * std::numbers::pi;
  // Samples in increasing theta, ending at theta0 (g = 0, g' = -1).
  std::vector<double> theta, g, dg, ddg;
  // Coefficient c of the irregular axis mode g' ~ c theta^(2-d):
  // sin^(d-2)(theta_m) (g'(theta_m) - g''(0) theta_m). Zero for a smooth cone.
  double axis_defect = 0.0;
  bool collapsed = false;    // g reached 0 before the axis
  double collapse_theta = 0.0;
  bool exact_half_space = false;
  std::string diagnostic;

  bool complete() const { return !collapsed && diagnostic.empty(); }

  // Quintic Hermite interpolation of g on [theta.front(), theta0]; Taylor
  // extension below the first sample; 0 beyond theta0.
  double value(double th) const {
    if (exact_half_space) return th < theta0 ? std::cos(th) : 0.0;
    if (th >= theta0) return 0.0;
    if (th <= theta.front()) {
      const double e = th - theta.front();
      return g.front() + dg.front() * e + 0.5 * ddg.front() * e * e;
    }
    return detail::quintic_hermite(theta, g, dg, ddg, th);
  }

  // g' and g'' with the same interpolant and extensions.
  double slope(double th) const {
    if (exact_half_space) return th < theta0 ? -std::sin(th) : 0.0;
    if (th >= theta0) return 0.0;
    if (th <= theta.front()) return dg.front() + ddg.front() * (th - theta.front());
    return detail::quintic_hermite(theta, g, dg, ddg, th, 1);
  }

  double second_slope(double th) const {
    if (exact_half_space) return th < theta0 ? -std::cos(th) : 0.0;
    if (th >= theta0) return 0.0;
    if (th <= theta.front()) return ddg.front();
    return detail::quintic_hermite(theta, g, dg, ddg, th, 2);
  }
};

inline ConeProfile half_space_profile(int d, const ExponentPack& p, std::size_t samples = 257) {
  ConeProfile c;
  c.d = d;
  c.pack = p;
  c.theta0 = 0.5 * std::numbers::pi;
  c.exact_half_space = true;
  for (std::size_t k = 0; k < samples; ++k) {
    const double th = c.theta0 * static_cast<double>(k) / static_cast<double>(samples - 1);
    c.theta.push_back(th);
    c.g.push_back(k + 1 == samples ? 0.0 : std::cos(th));
    c.dg.push_back(k + 1 == samples ? -1.0 : -std::sin(th));
    c.ddg.push_back(-c.g.back());
  }
  return c;
}

struct ShootConfig {
  int steps = 4000;              // total RK4 steps, split over three graded segments
  double edge_offset = 1e-6;     // first step leaves the edge at tau = edge_offset * theta0
  double axis_theta = 1e-3;      // integration stops here
};

// Integrates from the free boundary toward the axis. The edge start is the
// series g(theta0 - tau) = tau + a tau^2 + b tau^3 with
//   a = k C / (2(1+s)),  b = (k(1+C^2) + 2akC - (d-1) - s/2) / (3(2+s)),
// k = d-2, C = cot(theta0). The cubic term matters for s < 0, where the
// free mode tau^(1-s) would otherwise absorb the O(tau^2) slope error.
inline ConeProfile shoot_from_edge(double theta0, int d, const ExponentPack& p, const ShootConfig& cfg = {}) {
  if (!(theta0 > 0.0 && theta0 < std::numbers::pi)) throw DomainError("shoot_from_edge: theta0 must lie in (0, pi)");
  if (d < 2) throw DomainError("shoot_from_edge: dimension must be at least 2");
  if (!(p.s > -1.0)) throw DomainError("shoot_from_edge: s must exceed -1");
  if (cfg.steps < 8) throw DomainError("shoot_from_edge: need at least 8 steps");
  const double s = p.s;
  const double tm = cfg.axis_theta;
  if (!(theta0 > 4.0 * tm)) throw DomainError("shoot_from_edge: theta0 too close to the axis");

  ConeProfile c;
  c.d = d;
  c.pack = p;
  c.theta0 = theta0;
  const double C = std::cos(theta0) / std::sin(theta0), k = d - 2;
  const double a = k * C / (2.0 * (1.0 + s));
  const double b = (k * (1.0 + C * C) + 2.0 * a * k * C - (d - 1) - 0.5 * s) / (3.0 * (2.0 + s));

  // Mesh in decreasing theta: log-graded edge layer, uniform middle, log-graded axis layer.
  const int n_edge = cfg.steps / 4, n_axis = cfg.steps / 4, n_mid = cfg.steps - n_edge - n_axis;
  const double tau1 = cfg.edge_offset * theta0;
  const double tauA = std::min(0.05 * theta0, 0.25 * (theta0 - tm));
  const double thB = std::max(std::min(0.05, 0.5 * (theta0 - tauA)), 2.0 * tm);
  std::vector<double> mesh;
  mesh.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  for (int k = 0; k <= n_edge; ++k)
    mesh.push_back(theta0 - tau1 * std::pow(tauA / tau1, static_cast<double>(k) / n_edge));
  for (int k = 1; k <= n_mid; ++k)
    mesh.push_back(theta0 - tauA - (theta0 - tauA - thB) * static_cast<double>(k) / n_mid);
  for (int k = 1; k <= n_axis; ++k) mesh.push_back(thB * std::pow(tm / thB, static_cast<double>(k) / n_axis));

  std::vector<double> th{theta0}, gv{0.0}, dgv{-1.0}, ddgv{2.0 * a};
  double y0 = tau1 + a * tau1 * tau1 + b * tau1 * tau1 * tau1;
  double y1 = -(1.0 + 2.0 * a * tau1 + 3.0 * b * tau1 * tau1);
  th.push_back(mesh[0]);
  gv.push_back(y0);
  dgv.push_back(y1);
  ddgv.push_back(cone_ode_rhs(mesh[0], y0, y1, d, s));

  auto f = [&](double t, double u, double v, double& du, double& dv) {
    du = v;
    dv = cone_ode_rhs(t, u, v, d, s);
  };
  for (std::size_t k = 0; k + 1 < mesh.size(); ++k) {
    const double t = mesh[k], h = mesh[k + 1] - mesh[k];
    double k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v;
    try {
      f(t, y0, y1, k1u, k1v);
      f(t + 0.5 * h, y0 + 0.5 * h * k1u, y1 + 0.5 * h * k1v, k2u, k2v);
      f(t + 0.5 * h, y0 + 0.5 * h * k2u, y1 + 0.5 * h * k2v, k3u, k3v);
      f(t + h, y0 + h * k3u, y1 + h * k3v, k4u, k4v);
    } catch (const DomainError&) {
      c.collapsed = true;
      c.collapse_theta = t;
      break;
    }
    y0 += h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
    y1 += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    if (!(y0 > 0.0)) {
      c.collapsed = true;
      c.collapse_theta = mesh[k + 1];
      break;
    }
    if (!std::isfinite(y0) || !std::isfinite(y1) || std::abs(y0) > 1e12) {
      c.diagnostic = "blow-up near theta = " + std::to_string(mesh[k + 1]);
      break;
    }
    th.push_back(mesh[k + 1]);
    gv.push_back(y0);
    dgv.push_back(y1);
    ddgv.push_back(cone_ode_rhs(mesh[k + 1], y0, y1, d, s));
  }
  // Store in increasing theta.
  std::reverse(th.begin(), th.end());
  std::reverse(gv.begin(), gv.end());
  std::reverse(dgv.begin(), dgv.end());
  std::reverse(ddgv.begin(), ddgv.end());
  c.theta = std::move(th);
  c.g = std::move(gv);
  c.dg = std::move(dgv);
  c.ddg = std::move(ddgv);
  if (c.complete()) {
    const double g0 = c.g.front();
    const double tm0 = c.theta.front();
    c.axis_defect = std::pow(std::sin(tm0), d - 2) * (c.dg.front() - cone_axis_second_derivative(g0, d, s) * tm0);
  }
  return c;
}

struct ConeSearchConfig {
  int scan_points = 256;
  double tolerance = 1e-7;  // |axis defect| accepted as a root
  ShootConfig shoot{};
};

struct ConeSearchResult {
  std::vector<ConeProfile> roots;
  std::vector<double> scan_theta;
  std::vector<double> scan_defect;      // NaN where the shot collapsed
};

// Scans theta0 over (0, pi), bisects every sign change of the axis defect
// between two completed shots, and always tests theta0 = pi/2.
inline ConeSearchResult find_axisymmetric_cone(int d, const ExponentPack& p, const ConeSearchConfig& cfg = {}) {
  if (d == 2) throw DomainError("use the logarithmic cutoff argument; no cone search in d=2");
  if (d < 3) throw DomainError("find_axisymmetric_cone: dimension must be at least 3");
  const int n = std::max(cfg.scan_points, 8);
  const double lo = 8.0 * cfg.shoot.axis_theta, hi = std::numbers::pi - 8.0 * cfg.shoot.axis_theta;
  ConeSearchResult out;
  out.scan_theta.resize(static_cast<std::size_t>(n));
  out.scan_defect.assign(static_cast<std::size_t>(n), std::nan(""));
  for (int k = 0; k < n; ++k) out.scan_theta[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / (n - 1);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
    const auto c = shoot_from_edge(out.scan_theta[k], d, p, cfg.shoot);
    if (c.complete()) out.scan_defect[k] = c.axis_defect;
  });

  auto add_root = [&](const ConeProfile& c) {
    for (const auto& r : out.roots)
      if (std::abs(r.theta0 - c.theta0) < 1e-6) return;
    out.roots.push_back(c);
  };
  const auto half = shoot_from_edge(0.5 * std::numbers::pi, d, p, cfg.shoot);
  if (half.complete() && std::abs(half.axis_defect) < cfg.tolerance) add_root(half);

  for (int k = 0; k + 1 < n; ++k) {
    double a = out.scan_theta[static_cast<std::size_t>(k)], b = out.scan_theta[static_cast<std::size_t>(k + 1)];
    double fa = out.scan_defect[static_cast<std::size_t>(k)], fb = out.scan_defect[static_cast<std::size_t>(k + 1)];
    if (std::isnan(fa) || std::isnan(fb) || (fa > 0) == (fb > 0)) continue;
    ConeProfile mid;
    bool ok = true;
    for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
      const double m = 0.5 * (a + b);
      mid = shoot_from_edge(m, d, p, cfg.shoot);
      if (!mid.complete()) {
        ok = false;  // a collapsed sample inside the bracket: not a clean crossing
        break;
      }
      if ((mid.axis_defect > 0) == (fa > 0)) {
        a = m;
        fa = mid.axis_defect;
      } else {
        b = m;
        fb = mid.axis_defect;
      }
    }
    if (!ok) continue;
    mid = shoot_from_edge(0.5 * (a + b), d, p, cfg.shoot);
    // A sign change through a pole (defect blowing up) is not a root.
    if (mid.complete() && std::abs(mid.axis_defect) < cfg.tolerance) add_root(mid);
  }
  std::sort(out.roots.begin(), out.roots.end(),
            [](const ConeProfile& x, const ConeProfile& y) { return x.theta0 < y.theta0; });
  return out;
}

// ---------------------------------------------------------------------------

// Lifts w = |x| g(theta) to a grid. In 2D the axes are (tau, x_d) with
// tau >= 0 the distance to the axis (meridian plane); in 3D the axes are
// Cartesian and the profile dimension must be 3.
inline ScalarField cone_to_field(const ConeProfile& c, const Grid& g, double origin_margin = 0.0) {
  if (g.dim != 2 && g.dim != 3) throw ShapeError("cone_to_field: grid must be 2D (meridian) or 3D");
  if (g.dim == 3 && c.d != 3) throw ShapeError("cone_to_field: a 3D grid needs a d = 3 profile");
  if (g.dim == 2 && g.origin[0] < 0.0) throw DomainError("cone_to_field: meridian grid needs tau >= 0");
  const double margin = origin_margin > 0.0 ? origin_margin : g.max_spacing();
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec3 x = g.point(i);
    double tau, xd;
    if (g.dim == 2) {
      tau = x[0];
      xd = x[1];
    } else {
      tau = std::hypot(x[0], x[1]);
      xd = x[2];
    }
    const double r = std::hypot(tau, xd);
    if (r < margin) throw DomainError("cone_to_field: grid touches the cone vertex");
    if (c.exact_half_space) {
      v[i] = std::max(xd, 0.0);
      continue;
    }
    v[i] = r * c.value(std::atan2(tau, xd));
  }
  return ScalarField(g, v);
}

// max |Delta w - (s/2)(1 - |grad w|^2)/w| over nodes with w >= exclusion
// (|grad w| = 1 makes w a distance to the free boundary), whose stencil is
// positive, and at distance >= exclusion from the box faces and the axis.
// The 2D meridian operator is d_tau^2 + d_d^2 + (d-2)/tau d_tau.
inline double cone_field_residual(const ScalarField& w, int d, double s, double exclusion) {
  const Grid& g = w.grid();
  double worst = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] >= exclusion) || !(w[i] > 0.0)) continue;
    const Vec3 x = g.point(i);
    const auto m = g.unflatten(i);
    bool ok = true;
    double lap = 0.0, gsq = 0.0;
    for (int k = 0; k < g.dim && ok; ++k) {
      if (x[k] - g.origin[k] < exclusion || g.upper(k) - x[k] < exclusion || m[k] == 0 || m[k] + 1 == g.nodes[k]) {
        ok = false;
        break;
      }
      const std::size_t st = g.stride(k);
      if (!(w[i - st] > 0.0) || !(w[i + st] > 0.0)) {
        ok = false;
        break;
      }
      const double h = g.spacing[k];
      lap += (w[i + st] - 2.0 * w[i] + w[i - st]) / (h * h);
      const double dk = (w[i + st] - w[i - st]) / (2.0 * h);
      gsq += dk * dk;
      if (g.dim == 2 && k == 0) lap += (d - 2) * dk / x[0];
    }
    if (!ok) continue;
    if (g.dim == 2 && x[0] < exclusion) continue;
    if (g.dim == 3 && std::hypot(x[0], x[1]) < exclusion) continue;
    worst = std::max(worst, std::abs(lap - 0.5 * s * (1.0 - gsq) / w[i]));
  }
  return worst;
}

}  // namespace altphillips
