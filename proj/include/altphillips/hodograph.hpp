#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "altphillips/error.hpp"
#include "altphillips/fields.hpp"
#include "altphillips/quadrature.hpp"

namespace altphillips {

// F(p) = (|p|^2 + 1) / p_d on {p_d > 0}; convex there, with DF(e_d) = 0.
struct FluxFunction {
  static constexpr double eta = 0.25;  // radius of the admissible ball around e_d

  static double value(const Vec3& p, int dim) {
    double sq = 0.0;
    for (int k = 0; k < dim; ++k) sq += p[k] * p[k];
    return (sq + 1.0) / p[dim - 1];
  }

  static Vec3 gradient(const Vec3& p, int dim) {
    const int d = dim - 1;
    double sq = 0.0;
    for (int k = 0; k < dim; ++k) sq += p[k] * p[k];
    Vec3 g{0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k) g[k] = 2.0 * p[k] / p[d];
    g[d] -= (1.0 + sq) / (p[d] * p[d]);
    return g;
  }

  static Mat3 hessian(const Vec3& p, int dim) {
    const int d = dim - 1;
    const double pd = p[d];
    double sq = 0.0;
    for (int k = 0; k < dim; ++k) sq += p[k] * p[k];
    Mat3 H{};
    for (int i = 0; i < dim; ++i) {
      H[i][i] += 2.0 / pd;
      H[i][d] -= 2.0 * p[i] / (pd * pd);
      H[d][i] -= 2.0 * p[i] / (pd * pd);
    }
    H[d][d] += 2.0 * (1.0 + sq) / (pd * pd * pd);
    return H;
  }

  static double ball_distance(const Vec3& p, int dim) {
    double acc = 0.0;
    for (int k = 0; k < dim; ++k) {
      const double e = p[k] - (k == dim - 1 ? 1.0 : 0.0);
      acc += e * e;
    }
    return std::sqrt(acc);
  }

  static bool in_ball(const Vec3& p, int dim) { return ball_distance(p, dim) <= eta; }

  struct Bounds {
    double lambda = 0.0;
    double Lambda = 0.0;
  };

  // Extreme eigenvalues of D^2 F over the closed ball, sampled on a fine
  // (|p'|, p_d) mesh; rotations in p' do not change the spectrum.
  static Bounds ellipticity_bounds(int dim) {
    if (dim < 1 || dim > 3) throw DomainError("FluxFunction: dimension must be 1, 2 or 3");
    static const std::array<Bounds, 3> cache = [] {
      std::array<Bounds, 3> out{};
      for (int dm = 1; dm <= 3; ++dm) {
        double lo = 1e300, hi = -1e300;
        const int n = 400;
        for (int a = 0; a <= n; ++a) {
          const double pd = 1.0 - eta + 2.0 * eta * a / n;
          const double rmax = dm == 1 ? 0.0 : std::sqrt(std::max(0.0, eta * eta - (pd - 1.0) * (pd - 1.0)));
          for (int b = 0; b <= (dm == 1 ? 0 : n); ++b) {
            Vec3 p{0.0, 0.0, 0.0};
            p[0] = rmax * b / n;
            p[dm - 1] = pd;
            const Mat3 H = hessian(p, dm);
            Eigen::MatrixXd M(dm, dm);
            for (int i = 0; i < dm; ++i)
              for (int j = 0; j < dm; ++j) M(i, j) = H[i][j];
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
            lo = std::min(lo, es.eigenvalues().minCoeff());
            hi = std::max(hi, es.eigenvalues().maxCoeff());
          }
        }
        out[dm - 1] = {lo, hi};
      }
      return out;
    }();
    return cache[dim - 1];
  }
};

// ---------------------------------------------------------------------------
// Partial inversion in the last variable. The map is an involution, so the
// same identities send derivatives of h to those of w and back.

struct DerivativeSet {
  int dim = 2;
  Vec3 grad{0.0, 0.0, 0.0};
  Mat3 hess{};
};

inline DerivativeSet partial_inverse_derivatives(const DerivativeSet& h) {
  const int dim = h.dim;
  const int d = dim - 1;
  const double hd = h.grad[d];
  if (hd == 0.0 || !std::isfinite(hd)) throw NumericalError("derivative_dictionary: singular Jacobian (h_d = 0)");
  const double hd2 = hd * hd, hd3 = hd2 * hd;
  const double hdd = h.hess[d][d];
  DerivativeSet w;
  w.dim = dim;
  w.grad[d] = 1.0 / hd;
  for (int i = 0; i < d; ++i) w.grad[i] = -h.grad[i] / hd;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j)
      w.hess[i][j] = -h.hess[i][j] / hd + h.grad[j] * h.hess[i][d] / hd2 + h.hess[j][d] * h.grad[i] / hd2 -
                     hdd * h.grad[i] * h.grad[j] / hd3;
    w.hess[i][d] = w.hess[d][i] = -h.hess[i][d] / hd2 + hdd * h.grad[i] / hd3;
  }
  w.hess[d][d] = -hdd / hd3;
  return w;
}

inline DerivativeSet derivative_dictionary(const DerivativeSet& h) { return partial_inverse_derivatives(h); }
inline DerivativeSet inverse_dictionary(const DerivativeSet& w) { return partial_inverse_derivatives(w); }

// ---------------------------------------------------------------------------

struct HodographField {
  ScalarField h;
  double s = 0.0;
  Vec3 grad_lo{0.0, 0.0, 0.0};  // bounding box of the attained discrete gradients
  Vec3 grad_hi{0.0, 0.0, 0.0};
  double ball_deviation = 0.0;  // max |grad h - e_d| over element gradients

  bool admissible() const { return ball_deviation <= FluxFunction::eta; }
};

namespace detail {

// Element gradients of a 2D nodal field: four corner triangles per cell.
// Each triangle covers half the cell, so the cell is counted twice and
// every triangle carries weight 1/2.
struct TriangleMesh2D {
  Grid g;
  std::vector<double> wa, wb;  // lower/upper hat weights of x_d^s per row

  TriangleMesh2D(const Grid& grid, double s) : g(grid) {
    if (g.dim != 2) throw ShapeError("hodograph: only two-dimensional grids are supported");
    if (g.nodes[0] < 3 || g.nodes[1] < 3) throw SizeError("hodograph: need at least 3 nodes per axis");
    if (!(s > -1.0)) throw DomainError("hodograph: s must exceed -1");
    const WeightedHalfGrid wg(g, s);
    for (std::size_t j = 0; j + 1 < g.nodes[1]; ++j) {
      wa.push_back(wg.lower(j));
      wb.push_back(wg.upper(j));
    }
  }

  std::size_t idx(std::size_t i, std::size_t j) const { return i * g.nodes[1] + j; }

  struct Tri {
    double weight;
    std::size_t a0, a1;  // x1-difference (a1 - a0) / h1
    std::size_t b0, b1;  // x_d-difference (b1 - b0) / h2
  };

  template <class Fn>
  void for_each_triangle(Fn fn) const {
    for (std::size_t i = 0; i + 1 < g.nodes[0]; ++i) {
      for (std::size_t j = 0; j + 1 < g.nodes[1]; ++j) {
        const std::size_t n00 = idx(i, j), n10 = idx(i + 1, j), n01 = idx(i, j + 1), n11 = idx(i + 1, j + 1);
        const double lo = 0.5 * g.spacing[0] * wa[j];
        const double hi = 0.5 * g.spacing[0] * wb[j];
        fn(Tri{lo, n00, n10, n00, n01});
        fn(Tri{lo, n00, n10, n10, n11});
        fn(Tri{hi, n01, n11, n00, n01});
        fn(Tri{hi, n01, n11, n10, n11});
      }
    }
  }

  Vec3 tri_gradient(const Tri& t, const std::vector<double>& v) const {
    return {(v[t.a1] - v[t.a0]) / g.spacing[0], (v[t.b1] - v[t.b0]) / g.spacing[1], 0.0};
  }

  // Unweighted nodal area, so residual / area approximates div(x_d^s DF).
  double control_volume(std::size_t n) const {
    const std::size_t i = n / g.nodes[1], j = n % g.nodes[1];
    return trapezoid_weight(i, g.nodes[0], g.spacing[0]) * trapezoid_weight(j, g.nodes[1], g.spacing[1]);
  }
};

inline HodographField make_hodograph_field(const ScalarField& h, double s) {
  const TriangleMesh2D mesh(h.grid(), s);
  HodographField out{h, s, {1e300, 1e300, 0.0}, {-1e300, -1e300, 0.0}, 0.0};
  mesh.for_each_triangle([&](const TriangleMesh2D::Tri& t) {
    const Vec3 p = mesh.tri_gradient(t, h.values());
    if (!(p[1] > 0.0)) throw NumericalError("hodograph: h is not strictly increasing in x_d");
    for (int k = 0; k < 2; ++k) {
      out.grad_lo[k] = std::min(out.grad_lo[k], p[k]);
      out.grad_hi[k] = std::max(out.grad_hi[k], p[k]);
    }
    out.ball_deviation = std::max(out.ball_deviation, FluxFunction::ball_distance(p, 2));
  });
  return out;
}

}  // namespace detail

inline HodographField make_hodograph_field(const ScalarField& h, double s) {
  return detail::make_hodograph_field(h, s);
}

// Discrete energy sum over triangles of (1/2) * int_T x_d^s * F(grad h).
inline double hodograph_energy(const ScalarField& h, double s) {
  const detail::TriangleMesh2D mesh(h.grid(), s);
  double e = 0.0;
  mesh.for_each_triangle([&](const detail::TriangleMesh2D::Tri& t) {
    const Vec3 p = mesh.tri_gradient(t, h.values());
    if (!(p[1] > 0.0)) throw NumericalError("hodograph_energy: h is not strictly increasing in x_d");
    e += t.weight * FluxFunction::value(p, 2);
  });
  return e;
}

// Discrete <x_d^s DF(grad h), grad psi>.
inline double weighted_flux_pairing(const ScalarField& h, const ScalarField& psi, double s) {
  if (h.grid() != psi.grid()) throw ShapeError("weighted_flux_pairing: grid mismatch");
  const detail::TriangleMesh2D mesh(h.grid(), s);
  double acc = 0.0;
  mesh.for_each_triangle([&](const detail::TriangleMesh2D::Tri& t) {
    const Vec3 G = FluxFunction::gradient(mesh.tri_gradient(t, h.values()), 2);
    const Vec3 q = mesh.tri_gradient(t, psi.values());
    acc += t.weight * (G[0] * q[0] + G[1] * q[1]);
  });
  return acc;
}

struct QuasilinearResidual {
  ScalarField interior;              // discrete div(x_d^s DF(grad h)); 0 off the interior
  std::vector<double> bottom;        // same quantity on the x_d = 0 row (natural condition)
  std::vector<double> flux_trace;    // x_d^s DF(grad h).e_d extrapolated to x_d = 0, per column
  double max_interior = 0.0;
};

inline QuasilinearResidual quasilinear_residual(const HodographField& hf) {
  if (!hf.admissible()) throw DomainError("quasilinear_residual: gradient range leaves the ellipticity ball");
  const Grid& g = hf.h.grid();
  const detail::TriangleMesh2D mesh(g, hf.s);
  const auto& v = hf.h.values();
  std::vector<double> dE(v.size(), 0.0);
  mesh.for_each_triangle([&](const detail::TriangleMesh2D::Tri& t) {
    const Vec3 G = FluxFunction::gradient(mesh.tri_gradient(t, v), 2);
    const double c0 = t.weight * G[0] / g.spacing[0], c1 = t.weight * G[1] / g.spacing[1];
    dE[t.a1] += c0;
    dE[t.a0] -= c0;
    dE[t.b1] += c1;
    dE[t.b0] -= c1;
  });
  const std::size_t n0 = g.nodes[0], n1 = g.nodes[1];
  QuasilinearResidual r;
  std::vector<double> inner(v.size(), 0.0);
  r.bottom.assign(n0, 0.0);
  for (std::size_t i = 0; i < n0; ++i) {
    for (std::size_t j = 0; j < n1; ++j) {
      const std::size_t n = mesh.idx(i, j);
      const double div = -dE[n] / mesh.control_volume(n);
      if (j == 0) {
        r.bottom[i] = div;
      } else if (i > 0 && i + 1 < n0 && j + 1 < n1) {
        inner[n] = div;
        r.max_interior = std::max(r.max_interior, std::abs(div));
      }
    }
  }
  r.interior = ScalarField(g, inner);
  const auto grad = gradient(hf.h);
  r.flux_trace.assign(n0, 0.0);
  for (std::size_t i = 0; i < n0; ++i) {
    double q[2];
    for (int l = 1; l <= 2; ++l) {
      const std::size_t n = mesh.idx(i, static_cast<std::size_t>(l));
      const double y = g.coord(1, static_cast<std::size_t>(l));
      q[l - 1] = std::pow(y, hf.s) * FluxFunction::gradient(grad[n], 2)[1];
    }
    r.flux_trace[i] = 2.0 * q[0] - q[1];
  }
  return r;
}

// ---------------------------------------------------------------------------

struct NewtonConfig {
  int max_steps = 30;
  double tolerance = 1e-10;  // max-norm of the control-volume-normalised residual
  double armijo = 1e-4;
};

struct QuasilinearSolution {
  HodographField field;
  std::vector<double> residual_history;
  int newton_steps = 0;
  bool converged = false;
  double energy = 0.0;
  std::string message;
};

// Damped Newton for the minimiser of sum (1/2) W_T F(grad phi) with phi fixed
// to `data` on the lateral faces and the top; the x_d = 0 row is free, so the
// weighted Neumann condition is natural.
inline QuasilinearSolution solve_quasilinear(const Grid& g, const std::function<double(const Vec3&)>& data,
                                             double s, const NewtonConfig& cfg = {}) {
  const detail::TriangleMesh2D mesh(g, s);
  if (g.origin[1] != 0.0) throw DomainError("solve_quasilinear: grid must start at x_d = 0");
  const std::size_t n0 = g.nodes[0], n1 = g.nodes[1], N = g.size();
  std::vector<double> phi(N);
  std::vector<long> slot(N, -1);
  long nfree = 0;
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) {
      const std::size_t n = mesh.idx(i, j);
      phi[n] = data(g.point(n));
      if (i > 0 && i + 1 < n0 && j + 1 < n1) slot[n] = nfree++;
    }

  auto admissible = [&](const std::vector<double>& v) {
    bool ok = true;
    mesh.for_each_triangle([&](const detail::TriangleMesh2D::Tri& t) {
      if (!FluxFunction::in_ball(mesh.tri_gradient(t, v), 2)) ok = false;
    });
    return ok;
  };
  auto energy = [&](const std::vector<double>& v) {
    double e = 0.0;
    mesh.for_each_triangle([&](const detail::TriangleMesh2D::Tri& t) {
      e += t.weight * FluxFunction::value(mesh.tri_gradient(t, v), 2);
    });
    return e;
  };

  QuasilinearSolution out;
  if (!admissible(phi)) throw DomainError("solve_quasilinear: data gradients leave the ellipticity ball");

  double E = energy(phi);
  for (int step = 0;; ++step) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(nfree);
    std::vector<Eigen::Triplet<double>> trip;
    mesh.for_each_triangle([&](const detail::TriangleMesh2D::Tri& t) {
      const Vec3 p = mesh.tri_gradient(t, phi);
      const Vec3 G = FluxFunction::gradient(p, 2);
      const Mat3 H = FluxFunction::hessian(p, 2);
      // grad p = sum over (node, component, coefficient).
      const std::array<std::size_t, 4> nd{t.a0, t.a1, t.b0, t.b1};
      const std::array<int, 4> comp{0, 0, 1, 1};
      const std::array<double, 4> cf{-1.0 / g.spacing[0], 1.0 / g.spacing[0], -1.0 / g.spacing[1], 1.0 / g.spacing[1]};
      for (int a = 0; a < 4; ++a) {
        const long sa = slot[nd[a]];
        if (sa < 0) continue;
        grad[sa] += t.weight * G[comp[a]] * cf[a];
        for (int b = 0; b < 4; ++b) {
          const long sb = slot[nd[b]];
          if (sb < 0) continue;
          trip.emplace_back(sa, sb, t.weight * H[comp[a]][comp[b]] * cf[a] * cf[b]);
        }
      }
    });
    double res = 0.0;
    for (std::size_t n = 0; n < N; ++n)
      if (slot[n] >= 0) res = std::max(res, std::abs(grad[slot[n]]) / mesh.control_volume(n));
    out.residual_history.push_back(res);
    out.newton_steps = step;
    if (res <= cfg.tolerance) {
      out.converged = true;
      out.message = "converged";
      break;
    }
    if (step >= cfg.max_steps) {
      out.message = "Newton did not reach tolerance within max_steps";
      break;
    }
    Eigen::SparseMatrix<double> K(nfree, nfree);
    K.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(K);
    if (solver.info() != Eigen::Success) {
      out.message = "Newton matrix factorisation failed";
      break;
    }
    const Eigen::VectorXd delta = solver.solve(-grad);
    const double slope = grad.dot(delta);
    double alpha = 1.0;
    bool accepted = false;
    std::vector<double> trial = phi;
    while (alpha > 1e-12) {
      for (std::size_t n = 0; n < N; ++n)
        if (slot[n] >= 0) trial[n] = phi[n] + alpha * delta[slot[n]];
      if (admissible(trial)) {
        const double Et = energy(trial);
        // Near convergence the energy change drops below rounding; accept
        // full steps whose energy is unchanged to working precision.
        if (Et <= E + cfg.armijo * alpha * slope || (alpha == 1.0 && Et <= E + 1e-14 * std::abs(E))) {
          phi.swap(trial);
          E = Et;
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      out.message = "trust region collapsed: no admissible descent step";
      break;
    }
  }
  out.field = make_hodograph_field(ScalarField(g, phi), s);
  out.energy = E;
  return out;
}

// ---------------------------------------------------------------------------

// forward hodograph: for every column x' and level y, h(x', y) is the root of
// w(x', .) = y by linear interpolation between the bracketing nodes.
inline HodographField forward_hodograph(const ScalarField& w, double y_lo, double y_hi, std::size_t levels, double s) {
  const Grid& g = w.grid();
  if (g.dim != 2) throw ShapeError("forward_hodograph: only two-dimensional fields are supported");
  if (levels < 3) throw SizeError("forward_hodograph: need at least 3 levels");
  if (!(y_hi > y_lo) || y_lo < 0.0) throw DomainError("forward_hodograph: need 0 <= y_lo < y_hi");
  const std::size_t n0 = g.nodes[0], n1 = g.nodes[1];
  Grid out = g;
  out.origin[1] = y_lo;
  out.spacing[1] = (y_hi - y_lo) / static_cast<double>(levels - 1);
  out.nodes[1] = levels;
  std::vector<double> hv(out.size());
  for (std::size_t i = 0; i < n0; ++i) {
    const std::size_t base = i * n1;
    // Zeros may only occupy the bottom of a column; above them w must increase.
    std::size_t first = 0;
    while (first < n1 && w[base + first] == 0.0) ++first;
    for (std::size_t j = first; j + 1 < n1; ++j)
      if (!(w[base + j + 1] > w[base + j]))
        throw NumericalError("forward_hodograph: not graph-like here (column " + std::to_string(i) + ")");
    std::size_t j = first == 0 ? 0 : first - 1;
    for (std::size_t l = 0; l < levels; ++l) {
      const double y = l + 1 == levels ? y_hi : y_lo + out.spacing[1] * static_cast<double>(l);
      if (y < w[base] || y > w[base + n1 - 1])
        throw DomainError("forward_hodograph: level outside the range of column " + std::to_string(i));
      while (j + 2 < n1 && w[base + j + 1] < y) ++j;
      const double a = w[base + j], b = w[base + j + 1];
      const double x0 = g.coord(1, j), x1 = g.coord(1, j + 1);
      double x;
      if (y == a && (a > 0.0 || j + 1 == first))
        x = x0;
      else if (y == b)
        x = x1;
      else
        x = x0 + (y - a) / (b - a) * (x1 - x0);
      hv[i * levels + l] = x;
    }
  }
  return make_hodograph_field(ScalarField(out, hv), s);
}

// ---------------------------------------------------------------------------

// phi(x', x_d) = x_d^-s int_0^x_d t^s f(x', t) dt with f piecewise linear in t.
inline ScalarField weighted_ode_average(const ScalarField& f, double s) {
  const Grid& g = f.grid();
  const WeightedHalfGrid wg(g, s);
  const int d = g.dim - 1;
  if (g.origin[d] != 0.0) throw DomainError("weighted_ode_average: grid must start at x_d = 0");
  const std::size_t nc = g.nodes[d];
  std::vector<double> out(f.size());
  for (std::size_t start = 0; start < f.size(); start += nc) {
    out[start] = 0.0;  // phi ~ f(x', 0) x_d / (1 + s) near the bottom
    double acc = 0.0;
    for (std::size_t j = 1; j < nc; ++j) {
      acc += wg.lower(j - 1) * f[start + j - 1] + wg.upper(j - 1) * f[start + j];
      out[start + j] = acc / std::pow(g.coord(d, j), s);
    }
  }
  return ScalarField(g, out);
}

// ---------------------------------------------------------------------------

struct ProbeRow {
  int k = 0;
  double scale = 0.0;
  double gradient_seminorm = 0.0;  // sup |grad f(x) - grad f(y)| / |x - y|^alpha
  double second_difference = 0.0;  // sup |f(x+de) - 2 f(x) + f(x-de)| / d^(1+alpha)
};

struct ProbeTable {
  double alpha = 0.5;
  std::vector<ProbeRow> rows;
  double growth_slope = 0.0;  // least-squares slope of log2(gradient_seminorm) against k
  bool rough = false;         // growth_slope > 0.1
};

// Seminorms over nested windows {|x - x0|_inf <= R 2^-k}, pairs separated by
// half the window size along each axis.
inline ProbeTable regularity_probe(const ScalarField& f, const Vec3& x0, double alpha = 0.5, double R = 0.0) {
  const Grid& g = f.grid();
  require_stencil_size(g);
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("regularity_probe: alpha must lie in (0, 1]");
  if (R <= 0.0) {
    // Default: half the distance to the nearest lateral or top face, so the
    // windows never touch the corners where the bottom row meets the sides.
    R = g.upper(g.dim - 1) - x0[g.dim - 1];
    for (int k = 0; k + 1 < g.dim; ++k) R = std::min({R, x0[k] - g.origin[k], g.upper(k) - x0[k]});
    R *= 0.5;
    if (!(R > 0.0)) throw DomainError("regularity_probe: x0 must lie inside the lateral extent");
  }
  const auto grad = gradient(f);
  ProbeTable tab;
  tab.alpha = alpha;
  for (int k = 0;; ++k) {
    const double win = R * std::ldexp(1.0, -k);
    const double delta = 0.5 * win;
    std::array<long, 3> m{};
    bool ok = true;
    for (int a = 0; a < g.dim; ++a) {
      m[a] = std::lround(delta / g.spacing[a]);
      if (m[a] < 2) ok = false;
    }
    if (!ok) break;
    ProbeRow row;
    row.k = k;
    row.scale = delta;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const Vec3 x = g.point(i);
      bool inside = true;
      for (int a = 0; a < g.dim; ++a) inside = inside && std::abs(x[a] - x0[a]) <= win + 1e-12 * R;
      if (!inside) continue;
      const auto mi = g.unflatten(i);
      for (int a = 0; a < g.dim; ++a) {
        const long hi = static_cast<long>(mi[a]) + m[a];
        const long lo = static_cast<long>(mi[a]) - m[a];
        const double dist = static_cast<double>(m[a]) * g.spacing[a];
        if (hi < static_cast<long>(g.nodes[a]) && std::abs(x[a] + dist - x0[a]) <= win + 1e-12 * R) {
          const std::size_t j = i + static_cast<std::size_t>(m[a]) * g.stride(a);
          double diff = 0.0;
          for (int b = 0; b < g.dim; ++b) diff += (grad[i][b] - grad[j][b]) * (grad[i][b] - grad[j][b]);
          row.gradient_seminorm = std::max(row.gradient_seminorm, std::sqrt(diff) / std::pow(dist, alpha));
          if (lo >= 0 && std::abs(x[a] - dist - x0[a]) <= win + 1e-12 * R) {
            const std::size_t l = i - static_cast<std::size_t>(m[a]) * g.stride(a);
            row.second_difference = std::max(row.second_difference,
                                              std::abs(f[j] - 2.0 * f[i] + f[l]) / std::pow(dist, 1.0 + alpha));
          }
        }
      }
    }
    tab.rows.push_back(row);
  }
  // Slope only over rows with a measurable seminorm; an identically flat
  // table (affine field) has slope 0.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  double peak = 0.0;
  for (const auto& r : tab.rows) peak = std::max(peak, r.gradient_seminorm);
  for (const auto& r : tab.rows) {
    if (r.gradient_seminorm <= 1e-10 * std::max(1.0, peak)) continue;
    const double y = std::log2(r.gradient_seminorm);
    sx += r.k;
    sy += y;
    sxx += static_cast<double>(r.k) * r.k;
    sxy += r.k * y;
    ++cnt;
  }
  if (cnt >= 2) tab.growth_slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  tab.rough = tab.growth_slope > 0.1;
  return tab;
}

}  // namespace altphillips
