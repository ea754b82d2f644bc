#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "altphillips/cones.hpp"
#include "altphillips/error.hpp"
#include "altphillips/exponents.hpp"
#include "altphillips/fields.hpp"
#include "altphillips/minimize.hpp"
#include "altphillips/parallel.hpp"
#include "altphillips/quadrature.hpp"

namespace altphillips {

namespace detail {

// Nodes where w can be differenced: the positive phase plus zero nodes with
// a positive axis neighbour (free-boundary nodes when the grid is aligned).
inline std::vector<char> phase_nodes(const ScalarField& w) {
  const Grid& g = w.grid();
  std::vector<char> ok(w.size(), 0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) {
      ok[i] = 1;
      continue;
    }
    const auto m = g.unflatten(i);
    for (int k = 0; k < g.dim && !ok[i]; ++k) {
      const std::size_t st = g.stride(k);
      if (m[k] > 0 && w[i - st] > 0.0) ok[i] = 1;
      if (m[k] + 1 < g.nodes[k] && w[i + st] > 0.0) ok[i] = 1;
    }
  }
  return ok;
}

// d/dx_k using only usable nodes: central when both neighbours are usable,
// else the second-order one-sided rule. out_ok marks nodes with a stencil.
inline void masked_derivative(const Grid& g, const std::vector<double>& v, const std::vector<char>& ok, int k,
                              std::vector<double>& out, std::vector<char>& out_ok) {
  const std::size_t st = g.stride(k);
  const std::size_t n = g.nodes[k];
  const double ih = 1.0 / g.spacing[k];
  out.assign(v.size(), 0.0);
  out_ok.assign(v.size(), 0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!ok[i]) continue;
    const std::size_t m = (i / st) % n;
    const bool lo1 = m >= 1 && ok[i - st];
    const bool hi1 = m + 1 < n && ok[i + st];
    const bool lo2 = lo1 && m >= 2 && ok[i - 2 * st];
    const bool hi2 = hi1 && m + 2 < n && ok[i + 2 * st];
    if (lo1 && hi1)
      out[i] = 0.5 * (v[i + st] - v[i - st]) * ih;
    else if (hi2)
      out[i] = 0.5 * (-3.0 * v[i] + 4.0 * v[i + st] - v[i + 2 * st]) * ih;
    else if (lo2)
      out[i] = 0.5 * (3.0 * v[i] - 4.0 * v[i - st] + v[i - 2 * st]) * ih;
    else
      continue;
    out_ok[i] = 1;
  }
}

inline void masked_second_derivative(const Grid& g, const std::vector<double>& v, const std::vector<char>& ok,
                                     int k, std::vector<double>& out, std::vector<char>& out_ok) {
  const std::size_t st = g.stride(k);
  const std::size_t n = g.nodes[k];
  const double ih2 = 1.0 / (g.spacing[k] * g.spacing[k]);
  out.assign(v.size(), 0.0);
  out_ok.assign(v.size(), 0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!ok[i]) continue;
    const std::size_t m = (i / st) % n;
    auto run = [&](long dir) {
      for (long j = 1; j <= 3; ++j) {
        const long mm = static_cast<long>(m) + dir * j;
        if (mm < 0 || mm >= static_cast<long>(n)) return false;
        if (!ok[static_cast<std::size_t>(static_cast<long>(i) + dir * j * static_cast<long>(st))]) return false;
      }
      return true;
    };
    const bool lo1 = m >= 1 && ok[i - st];
    const bool hi1 = m + 1 < n && ok[i + st];
    if (lo1 && hi1)
      out[i] = (v[i + st] - 2.0 * v[i] + v[i - st]) * ih2;
    else if (run(1))
      out[i] = (2.0 * v[i] - 5.0 * v[i + st] + 4.0 * v[i + 2 * st] - v[i + 3 * st]) * ih2;
    else if (run(-1))
      out[i] = (2.0 * v[i] - 5.0 * v[i - st] + 4.0 * v[i - 2 * st] - v[i - 3 * st]) * ih2;
    else
      continue;
    out_ok[i] = 1;
  }
}

struct PhaseDerivatives {
  std::vector<Vec3> grad;
  std::vector<Mat3> hess;
  std::vector<char> grad_ok, hess_ok;
};

// Gradient and Hessian of w restricted to its phase. Mixed partials
// differentiate the gradient and are symmetrised.
inline PhaseDerivatives phase_derivatives(const ScalarField& w) {
  const Grid& g = w.grid();
  require_stencil_size(g);
  const std::size_t n = w.size();
  const auto ok = phase_nodes(w);
  PhaseDerivatives D;
  D.grad.assign(n, Vec3{0.0, 0.0, 0.0});
  D.hess.assign(n, Mat3{});
  D.grad_ok = ok;
  D.hess_ok = ok;
  std::vector<std::vector<double>> first(g.dim);
  std::vector<std::vector<char>> first_ok(g.dim);
  std::vector<double> tmp;
  std::vector<char> tmp_ok;
  for (int k = 0; k < g.dim; ++k) {
    masked_derivative(g, w.values(), ok, k, first[k], first_ok[k]);
    for (std::size_t i = 0; i < n; ++i) {
      D.grad[i][k] = first[k][i];
      D.grad_ok[i] = D.grad_ok[i] && first_ok[k][i];
    }
  }
  for (int k = 0; k < g.dim; ++k) {
    masked_second_derivative(g, w.values(), ok, k, tmp, tmp_ok);
    for (std::size_t i = 0; i < n; ++i) {
      D.hess[i][k][k] = tmp[i];
      D.hess_ok[i] = D.hess_ok[i] && tmp_ok[i];
    }
  }
  for (int k = 0; k < g.dim; ++k) {
    for (int l = k + 1; l < g.dim; ++l) {
      std::vector<double> a, b;
      std::vector<char> a_ok, b_ok;
      masked_derivative(g, first[l], first_ok[l], k, a, a_ok);
      masked_derivative(g, first[k], first_ok[k], l, b, b_ok);
      for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        if (a_ok[i] && b_ok[i])
          v = 0.5 * (a[i] + b[i]);
        else if (a_ok[i])
          v = a[i];
        else if (b_ok[i])
          v = b[i];
        else
          D.hess_ok[i] = 0;
        D.hess[i][k][l] = v;
        D.hess[i][l][k] = v;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) D.hess_ok[i] = D.hess_ok[i] && D.grad_ok[i];
  return D;
}

inline double norm_sq(const Vec3& v, int dim) {
  double a = 0.0;
  for (int k = 0; k < dim; ++k) a += v[k] * v[k];
  return a;
}

// (|H|^2 |g|^2 - |H g|^2) / |g|^4 via the Lagrange identity, so the value is
// non-negative in floating point as well.
inline double a2_value(const Mat3& H, const Vec3& gr, int dim) {
  const double g2 = norm_sq(gr, dim);
  double num = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = j + 1; k < dim; ++k) {
        const double c = H[i][j] * gr[k] - H[i][k] * gr[j];
        num += c * c;
      }
  return num / (g2 * g2);
}

// Axis with the largest mean |dw| over the cell; ties go to the last axis.
inline int steep_axis(const double* wc, const Grid& g) {
  const int nc = 1 << g.dim;
  int best = g.dim - 1;
  double best_v = -1.0;
  for (int k = g.dim - 1; k >= 0; --k) {
    double acc = 0.0;
    for (int c = 0; c < nc; ++c)
      if (!((c >> k) & 1)) acc += std::abs(wc[c | (1 << k)] - wc[c]);
    acc /= g.spacing[k];
    if (acc > best_v) {
      best_v = acc;
      best = k;
    }
  }
  return best;
}

// Integral of w_+^s G for nodal G, multilinear per cell, exact along the
// steepest axis of w.
inline double weighted_integral(const ScalarField& w, const std::vector<double>& G, double s) {
  const CellLayout L(w.grid());
  return parallel_sum(L.origins.size(), [&](std::size_t n) {
    const std::size_t o = L.origins[n];
    double wc[8], gc[8];
    bool any_w = false, any_g = false;
    for (int c = 0; c < L.ncorner; ++c) {
      wc[c] = w[o + L.offsets[c]];
      gc[c] = G[o + L.offsets[c]];
      any_w = any_w || wc[c] > 0.0;
      any_g = any_g || gc[c] != 0.0;
    }
    if (!any_w || !any_g) return 0.0;
    return cell_power_integral(wc, gc, L.g.dim, L.g.spacing, steep_axis(wc, L.g), s);
  });
}

// Corners of cells that carry weight (some corner has w > 0).
inline std::vector<char> weighted_corners(const ScalarField& w) {
  const CellLayout L(w.grid());
  std::vector<char> mark(w.size(), 0);
  for (std::size_t o : L.origins) {
    bool any = false;
    for (int c = 0; c < L.ncorner; ++c) any = any || w[o + L.offsets[c]] > 0.0;
    if (any)
      for (int c = 0; c < L.ncorner; ++c) mark[o + L.offsets[c]] = 1;
  }
  return mark;
}

inline double default_floor(const Grid& g, double floor) { return floor > 0.0 ? floor : 10.0 * g.max_spacing(); }

inline void require_same_grid(const ScalarField& a, const ScalarField& b, const char* who) {
  if (a.grid() != b.grid()) throw ShapeError(std::string(who) + ": fields live on different grids");
}

inline std::string node_text(const Grid& g, std::size_t i) {
  const Vec3 x = g.point(i);
  std::string s = "(";
  for (int k = 0; k < g.dim; ++k) s += (k ? ", " : "") + std::to_string(x[k]);
  return s + ")";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Curvature quantity A^2 = |D^2 w|^2/|Dw|^2 - |D^2 w Dw|^2/|Dw|^4.

struct CurvatureField {
  Grid grid;
  std::vector<double> a2;
  std::vector<char> valid;
  double floor = 0.0;
  std::size_t masked = 0;  // phase nodes below the gradient floor or without a stencil
};

inline CurvatureField curvature_from(const ScalarField& w, const detail::PhaseDerivatives& D, double floor) {
  const Grid& g = w.grid();
  CurvatureField cf;
  cf.grid = g;
  cf.floor = detail::default_floor(g, floor);
  cf.a2.assign(w.size(), 0.0);
  cf.valid.assign(w.size(), 0);
  const auto phase = detail::phase_nodes(w);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!D.hess_ok[i] || detail::norm_sq(D.grad[i], g.dim) <= cf.floor * cf.floor) {
      if (phase[i]) ++cf.masked;
      continue;
    }
    cf.valid[i] = 1;
    cf.a2[i] = detail::a2_value(D.hess[i], D.grad[i], g.dim);
  }
  return cf;
}

inline CurvatureField curvature_A2(const ScalarField& w, double floor = 0.0) {
  detail::check_nonnegative(w, "curvature_A2");
  return curvature_from(w, detail::phase_derivatives(w), floor);
}

// ---------------------------------------------------------------------------
// Stability form Q(f) = int w^s |Dw|^2 (|Df|^2 - A^2 f^2).

inline double quadratic_form_Q(const ScalarField& w, const ExponentPack& p, const ScalarField& f,
                               double floor = 0.0) {
  detail::check_nonnegative(w, "quadratic_form_Q");
  detail::require_same_grid(w, f, "quadratic_form_Q");
  const Grid& g = w.grid();
  const auto D = detail::phase_derivatives(w);
  const auto A = curvature_from(w, D, floor);
  const auto df = gradient(f);
  const auto used = detail::weighted_corners(w);
  std::vector<double> G(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double f2 = f[i] * f[i];
    const double df2 = detail::norm_sq(df[i], g.dim);
    if ((f2 == 0.0 && df2 == 0.0) || !used[i]) continue;
    if (!D.grad_ok[i])
      throw DomainError("quadratic_form_Q: test function reaches node " + detail::node_text(g, i) +
                        " where w has no one-sided stencil");
    if (f2 != 0.0 && !A.valid[i])
      throw DomainError("quadratic_form_Q: test function is nonzero at node " + detail::node_text(g, i) +
                        " where the curvature term is undefined");
    G[i] = detail::norm_sq(D.grad[i], g.dim) * (df2 - A.a2[i] * f2);
  }
  return detail::weighted_integral(w, G, p.s);
}

// ---------------------------------------------------------------------------
// Inner variations. The energy of w composed with Phi_t = Id + t xi is
// evaluated by the change of variables, without re-sampling w:
//   E(t) = int w^s (|J^{-T} Dw|^2 + 1) det J,  J = I + t D(xi).

// xi = f Dw/|Dw|; NaN marks nodes where f != 0 but the direction is undefined.
inline std::vector<Vec3> normal_variation(const ScalarField& w, const ScalarField& f, double floor = 0.0) {
  detail::check_nonnegative(w, "normal_variation");
  detail::require_same_grid(w, f, "normal_variation");
  const Grid& g = w.grid();
  const double fl = detail::default_floor(g, floor);
  const auto D = detail::phase_derivatives(w);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Vec3> xi(w.size(), Vec3{0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (f[i] == 0.0) continue;
    const double gn = std::sqrt(detail::norm_sq(D.grad[i], g.dim));
    if (!D.grad_ok[i] || gn <= fl) {
      xi[i] = {nan, nan, nan};
      continue;
    }
    for (int k = 0; k < g.dim; ++k) xi[i][k] = f[i] * D.grad[i][k] / gn;
  }
  return xi;
}

namespace detail {

class Pushforward {
public:
  Pushforward(const ScalarField& w, double s, const std::vector<Vec3>& xi)
      : w_(w), s_(s), L_(w.grid()), B_(w.size(), Mat3{}), moving_(L_.origins.size(), 0) {
    const Grid& g = w.grid();
    if (xi.size() != w.size()) throw ShapeError("pushforward_energy: vector field size does not match the grid");
    require_stencil_size(g);
    std::vector<char> ok(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) ok[i] = std::isfinite(xi[i][0]) && std::isfinite(xi[i][1]) && std::isfinite(xi[i][2]);
    std::vector<char> have(w.size(), 1);
    std::vector<double> comp(w.size()), d;
    std::vector<char> d_ok;
    for (int a = 0; a < g.dim; ++a) {
      for (std::size_t i = 0; i < w.size(); ++i) comp[i] = ok[i] ? xi[i][a] : 0.0;
      for (int b = 0; b < g.dim; ++b) {
        masked_derivative(g, comp, ok, b, d, d_ok);
        for (std::size_t i = 0; i < w.size(); ++i) {
          B_[i][a][b] = d_ok[i] ? d[i] : 0.0;
          have[i] = have[i] && d_ok[i];
        }
      }
    }
    for (std::size_t n = 0; n < L_.origins.size(); ++n) {
      const std::size_t o = L_.origins[n];
      bool any_w = false, moves = false;
      for (int c = 0; c < L_.ncorner; ++c) any_w = any_w || w[o + L_.offsets[c]] > 0.0;
      if (!any_w) continue;
      for (int c = 0; c < L_.ncorner; ++c) {
        const std::size_t i = o + L_.offsets[c];
        if (!have[i])
          throw DomainError("pushforward_energy: vector field is undefined near node " + node_text(g, i));
        for (int a = 0; a < g.dim; ++a)
          for (int b = 0; b < g.dim; ++b) moves = moves || B_[i][a][b] != 0.0;
      }
      moving_[n] = moves ? 1 : 0;
    }
  }

  double total(double t) const {
    return parallel_sum(L_.origins.size(), [&](std::size_t n) { return cell(n, t); });
  }

  // (E(dt) - 2E(0) + E(-dt)) / 2dt^2 and (E(dt) - E(-dt)) / 2dt, summed
  // cell by cell so that motionless cells cancel exactly.
  double second_difference(double dt) const {
    return parallel_sum(L_.origins.size(), [&](std::size_t n) {
      if (!moving_[n]) return 0.0;
      return (cell(n, dt) - 2.0 * cell(n, 0.0) + cell(n, -dt)) / (2.0 * dt * dt);
    });
  }

  double first_difference(double dt) const {
    return parallel_sum(L_.origins.size(), [&](std::size_t n) {
      if (!moving_[n]) return 0.0;
      return (cell(n, dt) - cell(n, -dt)) / (2.0 * dt);
    });
  }

private:
  // Cell gradient tensor from edge quotients (diagonal as in the minimiser's
  // energy) contracted with the nodal metric J^{-1} J^{-T}, weighted by det J.
  double cell(std::size_t n, double t) const {
    const Grid& g = L_.g;
    const int dim = g.dim;
    const std::size_t o = L_.origins[n];
    double wc[8], hc[8];
    bool any = false;
    for (int c = 0; c < L_.ncorner; ++c) {
      wc[c] = w_[o + L_.offsets[c]];
      any = any || wc[c] > 0.0;
    }
    if (!any) return 0.0;
    const double share = 1.0 / static_cast<double>(L_.ncorner / 2);
    double q[3] = {0.0, 0.0, 0.0}, qq[3] = {0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k) {
      for (int c = 0; c < L_.ncorner; ++c) {
        if ((c >> k) & 1) continue;
        const double dq = (wc[c | (1 << k)] - wc[c]) / g.spacing[k];
        q[k] += share * dq;
        qq[k] += share * dq * dq;
      }
    }
    for (int c = 0; c < L_.ncorner; ++c) {
      const Mat3& B = B_[o + L_.offsets[c]];
      Eigen::Matrix3d J = Eigen::Matrix3d::Identity();
      for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) J(a, b) += t * B[a][b];
      const double det = J.determinant();
      if (!(det > 1e-12)) throw DomainError("pushforward_energy: step too large, the deformation is not invertible");
      const Eigen::Matrix3d Ji = J.inverse();
      const Eigen::Matrix3d M = Ji * Ji.transpose();
      double acc = 1.0;
      for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l) acc += (k == l ? qq[k] : q[k] * q[l]) * M(k, l);
      hc[c] = det * acc;
    }
    return cell_power_integral(wc, hc, dim, g.spacing, steep_axis(wc, g), s_);
  }

  const ScalarField& w_;
  double s_;
  CellLayout L_;
  std::vector<Mat3> B_;
  std::vector<char> moving_;
};

}  // namespace detail

inline double pushforward_energy(const ScalarField& w, const ExponentPack& p, const std::vector<Vec3>& xi, double t) {
  detail::check_nonnegative(w, "pushforward_energy");
  return detail::Pushforward(w, p.s, xi).total(t);
}

// Second-order Taylor coefficient of t -> E(Phi_t) for xi = f Dw/|Dw|.
inline double second_variation_fd(const ScalarField& w, const ExponentPack& p, const ScalarField& f,
                                  double dt = 1e-3, double floor = 0.0) {
  if (!(dt > 0.0)) throw DomainError("second_variation_fd: time step must be positive");
  detail::check_nonnegative(w, "second_variation_fd");
  return detail::Pushforward(w, p.s, normal_variation(w, f, floor)).second_difference(dt);
}

inline double first_variation_fd(const ScalarField& w, const ExponentPack& p, const ScalarField& f,
                                 double dt = 1e-3, double floor = 0.0) {
  if (!(dt > 0.0)) throw DomainError("first_variation_fd: time step must be positive");
  detail::check_nonnegative(w, "first_variation_fd");
  return detail::Pushforward(w, p.s, normal_variation(w, f, floor)).first_difference(dt);
}

// ---------------------------------------------------------------------------
// Radial solutions w(|x|) vanishing inside the ball of radius r0:
// w'' + (d-1) w'/r = (s/2)(1 - w'^2)/w, w(r0) = 0, w'(r0) = 1.

struct RadialProfile {
  int d = 2;
  ExponentPack pack{};
  double r0 = 1.0;
  std::vector<double> r, w, dw, ddw;

  double value(double x) const {
    if (x <= r0) return 0.0;
    if (x > r.back()) throw DomainError("RadialProfile: radius beyond the integrated range");
    return detail::quintic_hermite(r, w, dw, ddw, x);
  }
};

inline double radial_rhs(double r, double w, double dw, int d, double s) {
  return 0.5 * s * (1.0 - dw * dw) / w - (d - 1) * dw / r;
}

inline RadialProfile radial_solution(int d, const ExponentPack& p, double r0, double r_max, int steps = 4000) {
  if (d < 2) throw DomainError("radial_solution: dimension must be at least 2");
  if (!(r0 > 0.0 && r_max > r0)) throw DomainError("radial_solution: need 0 < r0 < r_max");
  if (steps < 8) throw DomainError("radial_solution: too few steps");
  const double s = p.s;
  const double k = d - 1;
  const double a = -k / (2.0 * r0 * (1.0 + s));
  const double b = (k / (r0 * r0) - 2.0 * a * k / r0) / (3.0 * (2.0 + s));
  RadialProfile rp;
  rp.d = d;
  rp.pack = p;
  rp.r0 = r0;
  rp.r.push_back(r0);
  rp.w.push_back(0.0);
  rp.dw.push_back(1.0);
  rp.ddw.push_back(2.0 * a);
  const double rho0 = 1e-6 * r0;
  double x = r0 + rho0;
  double y = rho0 + a * rho0 * rho0 + b * rho0 * rho0 * rho0;
  double dy = 1.0 + 2.0 * a * rho0 + 3.0 * b * rho0 * rho0;
  auto push = [&]() {
    if (!(y > 0.0) || !std::isfinite(dy)) {
      std::ostringstream msg;
      msg << "radial_solution: profile vanishes again at r = " << x << "; reduce r_max";
      throw DomainError(msg.str());
    }
    rp.r.push_back(x);
    rp.w.push_back(y);
    rp.dw.push_back(dy);
    rp.ddw.push_back(radial_rhs(x, y, dy, d, s));
  };
  push();
  auto rk4 = [&](double h) {
    auto f = [&](double xx, double yy, double vv) { return radial_rhs(xx, yy, vv, d, s); };
    const double k1y = dy, k1v = f(x, y, dy);
    const double k2y = dy + 0.5 * h * k1v, k2v = f(x + 0.5 * h, y + 0.5 * h * k1y, dy + 0.5 * h * k1v);
    const double k3y = dy + 0.5 * h * k2v, k3v = f(x + 0.5 * h, y + 0.5 * h * k2y, dy + 0.5 * h * k2v);
    const double k4y = dy + h * k3v, k4v = f(x + h, y + h * k3y, dy + h * k3v);
    y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
    dy += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    x += h;
    push();
  };
  // Geometric steps through the boundary layer, then uniform.
  const double rho_b = std::min(0.05 * r0, 0.25 * (r_max - r0));
  const int n_log = steps / 4;
  const double ratio = std::pow(rho_b / rho0, 1.0 / n_log);
  for (int i = 0; i < n_log; ++i) rk4((r0 + rho0 * std::pow(ratio, i + 1)) - x);
  const int n_uni = steps - n_log;
  const double h = (r_max - x) / n_uni;
  for (int i = 0; i < n_uni; ++i) rk4(i + 1 == n_uni ? r_max - x : h);
  return rp;
}

// Samples w(|x|) on a Cartesian grid whose dimension equals the profile's.
inline ScalarField radial_field(const RadialProfile& rp, const Grid& g) {
  if (g.dim != rp.d) throw ShapeError("radial_field: grid dimension must match the profile dimension");
  return ScalarField::sample(g, [&](const Vec3& x) {
    return rp.value(std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
  });
}

// ---------------------------------------------------------------------------
// Level-set decomposition A^2 = |A|^2 + |D_T |Dw||^2 / |Dw|^2 in 2D.

struct SZReport {
  double max_abs = 0.0;
  double max_rel = 0.0;
  std::size_t samples = 0;
};

inline SZReport sternberg_zumbrun_check(const ScalarField& w, std::vector<double> levels = {}, double floor = 0.0) {
  const Grid& g = w.grid();
  if (g.dim != 2) throw ShapeError("sternberg_zumbrun_check: needs a 2D field");
  detail::check_nonnegative(w, "sternberg_zumbrun_check");
  const auto D = detail::phase_derivatives(w);
  const auto A = curvature_from(w, D, floor);
  std::vector<double> gn(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) gn[i] = std::sqrt(detail::norm_sq(D.grad[i], 2));
  if (levels.empty()) {
    const double top = *std::max_element(w.values().begin(), w.values().end());
    for (int k = 1; k <= 7; ++k) levels.push_back(top * k / 8.0);
  }
  // Interpolation is trusted only when every node of the containing cell is valid.
  auto cell_valid = [&](const Vec3& x) {
    std::array<std::size_t, 3> base{0, 0, 0};
    for (int k = 0; k < 2; ++k) {
      const double u = (x[k] - g.origin[k]) / g.spacing[k];
      if (u < 0.0 || u > static_cast<double>(g.nodes[k] - 1)) return false;
      base[k] = std::min(static_cast<std::size_t>(std::floor(u)), g.nodes[k] - 2);
    }
    for (int c = 0; c < 4; ++c) {
      auto m = base;
      m[0] += c & 1;
      m[1] += (c >> 1) & 1;
      if (!A.valid[g.flatten(m)]) return false;
    }
    return true;
  };
  SZReport rep;
  const double window = detail::default_arc_window(g);
  for (double lev : levels) {
    ExtractOptions opt;
    opt.level = lev;
    opt.arc_window = window;
    const auto geo = extract_level_set(w, opt);
    for (const auto& pl : geo.curves) {
      const auto st = detail::arc_stencil(pl, window);
      for (std::size_t i = 0; i < pl.points.size(); ++i) {
        if (st.lo[i] == i && st.hi[i] == i) continue;
        // Ends of open curves: the clamped window shortens the chords.
        if (!pl.closed && (-st.arc_lo[i] < window || st.arc_hi[i] < window)) continue;
        const auto& pa = pl.points[st.lo[i]].x;
        const auto& pb = pl.points[i].x;
        const auto& pc = pl.points[st.hi[i]].x;
        if (!cell_valid(pa) || !cell_valid(pb) || !cell_valid(pc)) continue;
        const double lhs = interpolate(g, A.a2, pb);
        const double grad_here = interpolate(g, gn, pb);
        const double dT = (interpolate(g, gn, pc) - interpolate(g, gn, pa)) / (st.arc_hi[i] - st.arc_lo[i]);
        const double kappa = pl.points[i].curvature;
        const double rhs = kappa * kappa + dT * dT / (grad_here * grad_here);
        const double err = std::abs(lhs - rhs);
        const double scale = std::max(std::abs(lhs), std::abs(rhs));
        rep.max_abs = std::max(rep.max_abs, err);
        if (scale > 0.0) rep.max_rel = std::max(rep.max_rel, err / scale);
        ++rep.samples;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Axially symmetric fields on a meridian grid: axis 0 is tau = |x'| >= 0,
// axis 1 is x_d; the measure is tau^(d-2) dtau dx_d.

namespace detail {

inline void require_meridian(const Grid& g, int d, const char* who) {
  if (g.dim != 2) throw ShapeError(std::string(who) + ": expects a 2D meridian grid (tau, x_d)");
  if (d < 2) throw DomainError(std::string(who) + ": dimension must be at least 2");
  if (g.origin[0] < 0.0) throw DomainError(std::string(who) + ": meridian grid must have tau >= 0");
}

// Smooth step: 0 below 1/2, 1 above 1.
inline double axis_cutoff(double x) {
  if (x <= 0.5) return 0.0;
  if (x >= 1.0) return 1.0;
  const double t = 2.0 * x - 1.0;
  return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

}  // namespace detail

struct AxialTerms {
  double gradient = 0.0;   // int w^s w_tau^2 |D eta|^2
  double potential = 0.0;  // int w^s w_tau^2 eta^2 / tau^2
  double form = 0.0;       // gradient - (d-2) potential
  bool cutoff_applied = false;
  double cutoff_radius = 0.0;
};

// In d >= 3, eta is multiplied by an inner cutoff of radius 2 h_tau when it
// does not vanish near the axis.
inline AxialTerms axial_terms(const ScalarField& w, const ExponentPack& p, int d, const ScalarField& eta) {
  const Grid& g = w.grid();
  detail::require_meridian(g, d, "axial_form");
  detail::require_same_grid(w, eta, "axial_form");
  detail::check_nonnegative(w, "axial_form");
  AxialTerms out;
  std::vector<double> ev = eta.values();
  if (d >= 3) {
    const double eps = 2.0 * g.spacing[0];
    for (std::size_t i = 0; i < ev.size(); ++i)
      if (ev[i] != 0.0 && g.point(i)[0] < eps) out.cutoff_applied = true;
    if (out.cutoff_applied) {
      out.cutoff_radius = eps;
      for (std::size_t i = 0; i < ev.size(); ++i) ev[i] *= detail::axis_cutoff(g.point(i)[0] / eps);
    }
  }
  const ScalarField e(g, ev);
  const auto de = gradient(e);
  const auto D = detail::phase_derivatives(w);
  const auto used = detail::weighted_corners(w);
  std::vector<double> G1(w.size(), 0.0), G2(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double de2 = detail::norm_sq(de[i], 2);
    if ((ev[i] == 0.0 && de2 == 0.0) || !used[i]) continue;
    if (!D.grad_ok[i])
      throw DomainError("axial_form: test function reaches node " + detail::node_text(g, i) +
                        " where w has no one-sided stencil");
    const double tau = g.point(i)[0];
    const double wt2 = D.grad[i][0] * D.grad[i][0];
    const double meas = d == 2 ? 1.0 : std::pow(tau, d - 2);
    G1[i] = wt2 * de2 * meas;
    if (ev[i] != 0.0) {
      if (!(tau > 0.0)) throw DomainError("axial_form: test function is nonzero on the axis");
      G2[i] = wt2 * ev[i] * ev[i] / (tau * tau) * meas;
    }
  }
  out.gradient = detail::weighted_integral(w, G1, p.s);
  out.potential = detail::weighted_integral(w, G2, p.s);
  out.form = out.gradient - (d - 2) * out.potential;
  return out;
}

inline double axial_form(const ScalarField& w, const ExponentPack& p, int d, const ScalarField& eta) {
  return axial_terms(w, p, d, eta).form;
}

struct CommutatorField {
  Grid grid;
  std::vector<double> residual;
  std::vector<char> valid;

  double max_abs() const {
    double m = 0.0;
    for (std::size_t i = 0; i < residual.size(); ++i)
      if (valid[i]) m = std::max(m, std::abs(residual[i]));
    return m;
  }
};

// Residual of  Dc + s Dw.Dc / w + (Lap w / w) c - (d-2) c / tau^2  for
// c = w_tau; it vanishes on solutions. Nodes need w, tau >= floor and a
// fully positive 5x5 neighbourhood inside the grid.
inline CommutatorField commutator_residual(const ScalarField& w, const ExponentPack& p, int d, double floor = 0.0) {
  const Grid& g = w.grid();
  detail::require_meridian(g, d, "commutator_residual");
  require_stencil_size(g);
  const double fl = detail::default_floor(g, floor);
  const auto& v = w.values();
  const auto wt = partial(g, v, 0);
  const auto wd = partial(g, v, 1);
  const auto wtt = second_partial(g, v, 0);
  const auto wdd = second_partial(g, v, 1);
  const auto ct = partial(g, wt, 0);
  const auto cd = partial(g, wt, 1);
  const auto ctt = second_partial(g, wt, 0);
  const auto cdd = second_partial(g, wt, 1);
  CommutatorField out;
  out.grid = g;
  out.residual.assign(w.size(), 0.0);
  out.valid.assign(w.size(), 0);
  const double s = p.s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto m = g.unflatten(i);
    const double tau = g.point(i)[0];
    if (v[i] < fl || tau < fl) continue;
    if (m[0] < 2 || m[1] < 2 || m[0] + 2 >= g.nodes[0] || m[1] + 2 >= g.nodes[1]) continue;
    bool pos = true;
    for (int a = -2; a <= 2 && pos; ++a)
      for (int b = -2; b <= 2 && pos; ++b)
        pos = v[g.flatten({m[0] + a, m[1] + b, 0})] > 0.0;
    if (!pos) continue;
    const double c = wt[i];
    const double lap_c = ctt[i] + cdd[i] + (d - 2) / tau * ct[i];
    const double lap_w = wtt[i] + wdd[i] + (d - 2) / tau * wt[i];
    out.residual[i] = lap_c + s * (wt[i] * ct[i] + wd[i] * cd[i]) / v[i] + lap_w / v[i] * c - (d - 2) * c / (tau * tau);
    out.valid[i] = 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Planar logarithmic cutoff. For w = r g(phi) and the radial cutoff
// f = 1 on B_1, log(R/r)/log R on B_R \ B_1, the form factorises:
//   Q = M0 int_1^R r^(s-1) dr / log^2 R - M1 int_0^R r^(s-1) f^2 dr,
//   M0 = int g^s (g^2 + g'^2),  M1 = int g^s (g + g'')^2 g^2 / (g^2 + g'^2).

struct AngularMasses {
  double m0 = 0.0;
  double m1 = 0.0;
};

inline AngularMasses log_cutoff_masses(const ConeProfile& c) {
  if (c.d != 2) throw DomainError("log_cutoff_test_2d: needs a planar (d = 2) profile");
  const double s = c.pack.s;
  const auto& th = c.theta;
  auto dens0 = [&](std::size_t k) { return c.g[k] * c.g[k] + c.dg[k] * c.dg[k]; };
  auto dens1 = [&](std::size_t k) {
    const double q = c.g[k] * c.g[k] + c.dg[k] * c.dg[k];
    const double t = c.g[k] + c.ddg[k];
    return t * t * c.g[k] * c.g[k] / q;
  };
  AngularMasses m;
  // Reflection-symmetric profile: integrate over (0, theta0) and double.
  if (th.front() > 0.0) {
    const double gs = std::pow(c.g.front(), s);
    m.m0 += th.front() * gs * dens0(0);
    m.m1 += th.front() * gs * dens1(0);
  }
  for (std::size_t k = 0; k + 1 < th.size(); ++k) {
    const double h = th[k + 1] - th[k];
    m.m0 += h * line_power_linear(c.g[k], c.g[k + 1], dens0(k), dens0(k + 1), s);
    m.m1 += h * line_power_linear(c.g[k], c.g[k + 1], dens1(k), dens1(k + 1), s);
  }
  m.m0 *= 2.0;
  m.m1 *= 2.0;
  return m;
}

namespace detail {

// int_0^L v^2 e^(-s v) dv
inline double exp_moment2(double s, double L) {
  const double x = s * L;
  if (std::abs(x) < 1.0) {
    double term = 1.0, acc = 0.0;
    for (int n = 0; n < 40; ++n) {
      acc += term / (n + 3);
      term *= -x / (n + 1);
    }
    return acc * L * L * L;
  }
  return (2.0 - std::exp(-x) * (x * x + 2.0 * x + 2.0)) / (s * s * s);
}

}  // namespace detail

inline double log_cutoff_test_2d(const ConeProfile& c, double R) {
  if (!(R >= 1.0)) throw DomainError("log_cutoff_test_2d: cutoff radius must be at least 1");
  const double s = c.pack.s;
  const AngularMasses m = log_cutoff_masses(c);
  double grad = 0.0;
  double inner = 0.0;  // int_0^R r^(s-1) f^2
  if (R > 1.0) {
    const double L = std::log(R);
    const double rs = std::abs(s) * L < 1e-8 ? L : std::expm1(s * L) / s;
    grad = m.m0 * rs / (L * L);
    inner = std::exp(s * L) / (L * L) * detail::exp_moment2(s, L);
  }
  if (m.m1 == 0.0) return grad;
  if (s <= 0.0) return -std::numeric_limits<double>::infinity();
  inner += 1.0 / s;
  return grad - m.m1 * inner;
}

// ---------------------------------------------------------------------------
// Exponent window: theta with d - 2 - theta^2 > 0 and d + s - 2 - 2 theta < 0.

struct ThetaWindow {
  bool feasible = false;
  double lo = 0.0;
  double hi = 0.0;
};

inline ThetaWindow theta_window(double d, double s) {
  ThetaWindow tw;
  if (!(d > 2.0)) return tw;
  const double hi = std::sqrt(d - 2.0);
  const double lo = std::max(0.5 * (d + s - 2.0), -hi);
  tw.lo = lo;
  tw.hi = hi;
  tw.feasible = hi - lo > 1e-12 * std::max(1.0, std::abs(hi));
  return tw;
}

// ---------------------------------------------------------------------------
// int w^s |D phi|^2 - int w^s (Lap w / w) phi^2, for s >= 0 only.

inline double positive_exponent_cross_form(const ScalarField& w, const ExponentPack& p, const ScalarField& phi) {
  if (p.s < 0.0)
    throw DomainError("positive_exponent_cross_form: refused for s < 0; the singular weight w^s prevents this form");
  detail::check_nonnegative(w, "positive_exponent_cross_form");
  detail::require_same_grid(w, phi, "positive_exponent_cross_form");
  const Grid& g = w.grid();
  const auto D = detail::phase_derivatives(w);
  const auto dp = gradient(phi);
  const auto used = detail::weighted_corners(w);
  std::vector<double> G(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double dp2 = detail::norm_sq(dp[i], g.dim);
    if ((phi[i] == 0.0 && dp2 == 0.0) || !used[i]) continue;
    G[i] = dp2;
    if (phi[i] == 0.0) continue;
    if (!(w[i] > 0.0) || !D.hess_ok[i])
      throw DomainError("positive_exponent_cross_form: test function is nonzero at node " + detail::node_text(g, i) +
                        " outside the interior of the positive phase");
    double lap = 0.0;
    for (int k = 0; k < g.dim; ++k) lap += D.hess[i][k][k];
    G[i] -= lap / w[i] * phi[i] * phi[i];
  }
  return detail::weighted_integral(w, G, p.s);
}

}  // namespace altphillips
