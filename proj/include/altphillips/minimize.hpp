#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "altphillips/error.hpp"
#include "altphillips/exponents.hpp"
#include "altphillips/fields.hpp"
#include "altphillips/parallel.hpp"
#include "altphillips/quadrature.hpp"

namespace altphillips {

struct EnergyBreakdown {
  double dirichlet = 0.0;
  double potential = 0.0;
  double total = 0.0;
};

struct DescentConfig {
  int max_iters = 2000;
  double step = 1.0;
  double armijo_factor = 0.5;
  double snap_tolerance = 0.0;  // 0 selects a quarter of the grid spacing
  double stop_tolerance = 1e-13;
};

struct MinimizeResult {
  ScalarField w;
  std::vector<double> energy_trace;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;        // max |Laplacian(w) - (s/2)(1 - |grad w|^2)/w| on {w > 2 snap}
  std::size_t interface_moves = 0;
  std::string message;
};

namespace detail {

// Cell enumeration shared by the energies: cell c is identified by its lowest
// corner; corners are addressed by bitmask (bit k = +1 along axis k).
struct CellLayout {
  Grid g;
  std::vector<std::size_t> origins;
  std::vector<std::size_t> offsets;  // flat offset of each corner
  int ncorner = 0;

  explicit CellLayout(const Grid& grid) : g(grid) {
    ncorner = 1 << g.dim;
    offsets.resize(ncorner);
    for (int c = 0; c < ncorner; ++c) {
      std::size_t off = 0;
      for (int k = 0; k < g.dim; ++k)
        if ((c >> k) & 1) off += g.stride(k);
      offsets[c] = off;
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto m = g.unflatten(i);
      bool ok = true;
      for (int k = 0; k < g.dim; ++k)
        if (m[k] + 1 >= g.nodes[k]) ok = false;
      if (ok) origins.push_back(i);
    }
  }
};

// Mean over the 2^(dim-1) parallel edges of the squared difference quotient,
// summed over axes. Penalises checkerboard modes, unlike a centre gradient.
inline double cell_grad_sq(const double* wc, const Grid& g) {
  const int nc = 1 << g.dim;
  const double share = 1.0 / static_cast<double>(nc / 2);
  double acc = 0.0;
  for (int k = 0; k < g.dim; ++k) {
    const double ih = 1.0 / g.spacing[k];
    for (int c = 0; c < nc; ++c) {
      if ((c >> k) & 1) continue;
      const double d = (wc[c | (1 << k)] - wc[c]) * ih;
      acc += share * d * d;
    }
  }
  return acc;
}

// Cell integral of w_+^s over columns along the last axis; optional partials.
inline double cell_weight_integral(const double* wc, const Grid& g, double s, double* dI) {
  const int dim = g.dim;
  const int ax = dim - 1;
  const int nc = 1 << dim;
  const double vol = g.cell_volume();
  if (dI)
    for (int c = 0; c < nc; ++c) dI[c] = 0.0;
  const UnitRule rule = gauss_legendre_unit(4);
  const int n1 = dim >= 2 ? rule.n : 1;
  const int n2 = dim >= 3 ? rule.n : 1;
  double total = 0.0;
  for (int q1 = 0; q1 < n1; ++q1) {
    for (int q2 = 0; q2 < n2; ++q2) {
      const double x1 = dim >= 2 ? rule.x[q1] : 0.0;
      const double x2 = dim >= 3 ? rule.x[q2] : 0.0;
      const double wt = (dim >= 2 ? rule.w[q1] : 1.0) * (dim >= 3 ? rule.w[q2] : 1.0);
      double ends[2] = {0.0, 0.0};
      double coef[8];
      for (int c = 0; c < nc; ++c) {
        double cf = 1.0;
        if (dim >= 2) cf *= (c & 1) ? x1 : 1.0 - x1;
        if (dim >= 3) cf *= (c & 2) ? x2 : 1.0 - x2;
        coef[c] = cf;
        ends[(c >> ax) & 1] += cf * wc[c];
      }
      const LinePower lp = line_power(ends[0], ends[1], s);
      total += wt * lp.value;
      if (dI)
        for (int c = 0; c < nc; ++c)
          dI[c] += vol * wt * coef[c] * (((c >> ax) & 1) ? lp.db : lp.da);
    }
  }
  return vol * total;
}

inline void check_nonnegative(const ScalarField& f, const char* who) {
  for (double v : f.values())
    if (v < 0.0 || std::isnan(v)) throw DomainError(std::string(who) + ": field must be non-negative");
}

}  // namespace detail

inline EnergyBreakdown energy_E(const ScalarField& w, const ExponentPack& p) {
  detail::check_nonnegative(w, "energy_E");
  const detail::CellLayout L(w.grid());
  EnergyBreakdown e;
  double wc[8];
  for (std::size_t o : L.origins) {
    bool any = false;
    for (int c = 0; c < L.ncorner; ++c) {
      wc[c] = w[o + L.offsets[c]];
      any = any || wc[c] > 0.0;
    }
    if (!any) continue;
    const double I = detail::cell_weight_integral(wc, L.g, p.s, nullptr);
    e.dirichlet += detail::cell_grad_sq(wc, L.g) * I;
    e.potential += I;
  }
  e.total = e.dirichlet + e.potential;
  return e;
}

inline EnergyBreakdown energy_J(const ScalarField& u, const ExponentPack& p) {
  detail::check_nonnegative(u, "energy_J");
  const detail::CellLayout L(u.grid());
  const double vol = L.g.cell_volume();
  const double scale = std::pow(p.beta, -p.s);
  EnergyBreakdown e;
  double uc[8], wc[8];
  for (std::size_t o : L.origins) {
    int npos = 0;
    double avg = 0.0;
    for (int c = 0; c < L.ncorner; ++c) {
      uc[c] = u[o + L.offsets[c]];
      npos += uc[c] > 0.0;
      avg += uc[c];
    }
    if (npos == 0) continue;
    if (npos == L.ncorner) {
      avg /= L.ncorner;
      e.dirichlet += detail::cell_grad_sq(uc, L.g) * vol;
      e.potential += std::pow(avg, p.gamma) * vol;
    } else {
      // Cut cell: |grad u|^2 = beta^-s w^s |grad w|^2 and u^gamma = beta^-s w^s.
      for (int c = 0; c < L.ncorner; ++c) wc[c] = u_to_w(uc[c], p);
      const double I = detail::cell_weight_integral(wc, L.g, p.s, nullptr);
      e.dirichlet += scale * detail::cell_grad_sq(wc, L.g) * I;
      e.potential += scale * I;
    }
  }
  e.total = e.dirichlet + e.potential;
  return e;
}

// Pointwise residual of Delta w = (s/2)(1 - |grad w|^2)/w on interior nodes
// whose 3-point stencils stay in {w > floor}.
inline double euler_lagrange_residual(const ScalarField& w, const ExponentPack& p, double floor) {
  const Grid& g = w.grid();
  const auto grad = gradient(w);
  double worst = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] > floor)) continue;
    const auto m = g.unflatten(i);
    bool ok = true;
    double lap = 0.0, gsq = 0.0;
    for (int k = 0; k < g.dim && ok; ++k) {
      if (m[k] == 0 || m[k] + 1 == g.nodes[k]) {
        ok = false;
        break;
      }
      const std::size_t st = g.stride(k);
      if (!(w[i - st] > floor) || !(w[i + st] > floor)) ok = false;
      lap += (w[i + st] - 2.0 * w[i] + w[i - st]) / (g.spacing[k] * g.spacing[k]);
      gsq += grad[i][k] * grad[i][k];
    }
    if (!ok) continue;
    worst = std::max(worst, std::abs(lap - 0.5 * p.s * (1.0 - gsq) / w[i]));
  }
  return worst;
}

namespace detail {

class Descent {
public:
  Descent(const ScalarField& start, const ExponentPack& p, const DescentConfig& cfg)
      : L_(start.grid()), p_(p), cfg_(cfg), w_(start.values()) {
    const Grid& g = L_.g;
    free_.assign(w_.size(), 0);
    for (std::size_t i = 0; i < w_.size(); ++i) {
      const auto m = g.unflatten(i);
      bool interior = true;
      for (int k = 0; k < g.dim; ++k)
        if (m[k] == 0 || m[k] + 1 == g.nodes[k]) interior = false;
      free_[i] = interior;
    }
    // Cells touching each node, for local energy updates.
    touching_.resize(w_.size());
    for (std::size_t ci = 0; ci < L_.origins.size(); ++ci)
      for (int c = 0; c < L_.ncorner; ++c) touching_[L_.origins[ci] + L_.offsets[c]].push_back(ci);
    snap_ = cfg.snap_tolerance > 0.0 ? cfg.snap_tolerance : 0.25 * g.max_spacing();
  }

  double snap() const { return snap_; }
  const std::vector<double>& values() const { return w_; }

  double cell_energy(std::size_t ci, const std::vector<double>& w) const {
    double wc[8];
    bool any = false;
    const std::size_t o = L_.origins[ci];
    for (int c = 0; c < L_.ncorner; ++c) {
      wc[c] = w[o + L_.offsets[c]];
      any = any || wc[c] > 0.0;
    }
    if (!any) return 0.0;
    const double I = cell_weight_integral(wc, L_.g, p_.s, nullptr);
    return (cell_grad_sq(wc, L_.g) + 1.0) * I;
  }

  double energy(const std::vector<double>& w) const {
    return parallel_sum(L_.origins.size(), [&](std::size_t ci) { return cell_energy(ci, w); });
  }

  // Energy change from setting node i to v.
  double local_delta(std::size_t i, double v) {
    double before = 0.0;
    for (std::size_t ci : touching_[i]) before += cell_energy(ci, w_);
    const double old = w_[i];
    w_[i] = v;
    double after = 0.0;
    for (std::size_t ci : touching_[i]) after += cell_energy(ci, w_);
    w_[i] = old;
    return after - before;
  }

  // One preconditioned projected step on the currently positive free nodes.
  // Returns false when no decrease could be found.
  bool step(double& E) {
    const Grid& g = L_.g;
    std::vector<long> slot(w_.size(), -1);
    std::vector<std::size_t> act;
    for (std::size_t i = 0; i < w_.size(); ++i)
      if (free_[i] && w_[i] > 0.0) {
        slot[i] = static_cast<long>(act.size());
        act.push_back(i);
      }
    if (act.empty()) return false;
    const std::size_t n = act.size();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<long>(n));
    std::vector<Eigen::Triplet<double>> trip;
    const int nc = L_.ncorner;
    const double share = 1.0 / static_cast<double>(nc / 2);
    double wc[8], dI[8];
    double diag_scale = 0.0;
    for (std::size_t ci = 0; ci < L_.origins.size(); ++ci) {
      const std::size_t o = L_.origins[ci];
      bool touches = false, any = false;
      for (int c = 0; c < nc; ++c) {
        wc[c] = w_[o + L_.offsets[c]];
        any = any || wc[c] > 0.0;
        touches = touches || slot[o + L_.offsets[c]] >= 0;
      }
      if (!any || !touches) continue;
      const double I = cell_weight_integral(wc, g, p_.s, dI);
      const double D = cell_grad_sq(wc, g);
      for (int c = 0; c < nc; ++c) {
        const long sc = slot[o + L_.offsets[c]];
        if (sc < 0) continue;
        double dD = 0.0;
        for (int k = 0; k < g.dim; ++k) {
          const double ih2 = 1.0 / (g.spacing[k] * g.spacing[k]);
          const double sign = ((c >> k) & 1) ? 1.0 : -1.0;
          dD += 2.0 * share * ih2 * sign * (wc[c | (1 << k)] - wc[c & ~(1 << k)]);
        }
        grad[sc] += (D + 1.0) * dI[c] + I * dD;
      }
      // Frozen-weight stiffness I * Hess(D) as preconditioner.
      for (int k = 0; k < g.dim; ++k) {
        const double coef = 2.0 * share * I / (g.spacing[k] * g.spacing[k]);
        diag_scale = std::max(diag_scale, coef);
        for (int c = 0; c < nc; ++c) {
          if ((c >> k) & 1) continue;
          const long a = slot[o + L_.offsets[c]];
          const long b = slot[o + L_.offsets[c | (1 << k)]];
          if (a >= 0) trip.emplace_back(a, a, coef);
          if (b >= 0) trip.emplace_back(b, b, coef);
          if (a >= 0 && b >= 0) {
            trip.emplace_back(a, b, -coef);
            trip.emplace_back(b, a, -coef);
          }
        }
      }
    }
    for (std::size_t k = 0; k < n; ++k)
      trip.emplace_back(static_cast<long>(k), static_cast<long>(k), 1e-12 * diag_scale);
    Eigen::SparseMatrix<double> M(static_cast<long>(n), static_cast<long>(n));
    M.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(M);
    Eigen::VectorXd dir;
    if (solver.info() == Eigen::Success) dir = -solver.solve(grad);
    if (solver.info() != Eigen::Success || !dir.allFinite() || dir.dot(grad) >= 0.0) dir = -grad;

    double alpha = cfg_.step;
    std::vector<double> trial = w_;
    for (int tries = 0; tries < 60; ++tries) {
      double pred = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = act[k];
        trial[i] = std::max(w_[i] + alpha * dir[static_cast<long>(k)], 0.0);
        pred += grad[static_cast<long>(k)] * (trial[i] - w_[i]);
      }
      const double Et = energy(trial);
      if (Et <= E + 1e-4 * pred && Et < E) {
        w_.swap(trial);
        E = Et;
        return true;
      }
      alpha *= cfg_.armijo_factor;
    }
    return false;
  }

  // Interface moves: truncate interface-adjacent positive nodes and activate
  // zero nodes next to positive ones whenever the energy drops.
  std::size_t interface_pass(double& E) {
    const Grid& g = L_.g;
    std::size_t moves = 0;
    auto has_neighbor = [&](std::size_t i, bool want_positive) {
      const auto m = g.unflatten(i);
      for (int k = 0; k < g.dim; ++k) {
        const std::size_t st = g.stride(k);
        if (m[k] > 0 && (w_[i - st] > 0.0) == want_positive) return true;
        if (m[k] + 1 < g.nodes[k] && (w_[i + st] > 0.0) == want_positive) return true;
      }
      return false;
    };
    for (std::size_t i = 0; i < w_.size(); ++i) {
      if (!free_[i]) continue;
      if (w_[i] > 0.0 && has_neighbor(i, false)) {
        const double dE = local_delta(i, 0.0);
        const bool small = w_[i] < snap_;
        if (dE < 0.0 || (small && dE <= 0.0)) {
          w_[i] = 0.0;
          E += dE;
          ++moves;
        }
      } else if (w_[i] == 0.0 && has_neighbor(i, true)) {
        // Candidates: linear extrapolation from the positive side, or half a neighbour.
        const auto m = g.unflatten(i);
        double best_v = 0.0, best_dE = 0.0;
        for (int k = 0; k < g.dim; ++k) {
          const std::size_t st = g.stride(k);
          for (int dir = -1; dir <= 1; dir += 2) {
            const bool ok1 = dir > 0 ? m[k] + 1 < g.nodes[k] : m[k] > 0;
            if (!ok1) continue;
            const std::size_t n1 = dir > 0 ? i + st : i - st;
            if (!(w_[n1] > 0.0)) continue;
            std::vector<double> cands{0.5 * w_[n1]};
            const bool ok2 = dir > 0 ? m[k] + 2 < g.nodes[k] : m[k] > 1;
            if (ok2) {
              const std::size_t n2 = dir > 0 ? i + 2 * st : i - 2 * st;
              const double ex = 2.0 * w_[n1] - w_[n2];
              if (ex > 0.0) cands.push_back(ex);
            }
            for (double v : cands) {
              const double dE = local_delta(i, v);
              if (dE < best_dE) {
                best_dE = dE;
                best_v = v;
              }
            }
          }
        }
        if (best_v > 0.0) {
          w_[i] = best_v;
          E += best_dE;
          ++moves;
        }
      }
    }
    return moves;
  }

  // Shift the whole interface by one node layer (peel or grow), relax, and
  // keep the result only if the relaxed energy is lower. Needed for s < 0,
  // where w^s blocks positive values from decaying continuously to 0.
  bool layer_move(double& E, int relax_steps) {
    // Modes: 0/1 peel/grow only where the one-sided slope violates |grad w| = 1,
    // 2/3 peel/grow the whole interface layer.
    const Grid& g = L_.g;
    for (int mode = 0; mode < 4; ++mode) {
      const bool grow = mode % 2 == 1;
      const bool selective = mode < 2;
      std::vector<double> trial = w_;
      bool any = false;
      for (std::size_t i = 0; i < w_.size(); ++i) {
        if (!free_[i]) continue;
        const auto m = g.unflatten(i);
        double nsum = 0.0, slope = 0.0;
        int npos = 0, nzero = 0;
        for (int k = 0; k < g.dim; ++k) {
          const std::size_t st = g.stride(k);
          for (int dir = -1; dir <= 1; dir += 2) {
            if (dir < 0 ? m[k] == 0 : m[k] + 1 == g.nodes[k]) continue;
            const double v = w_[dir < 0 ? i - st : i + st];
            if (v > 0.0) {
              nsum += v;
              ++npos;
              slope = std::max(slope, (v - w_[i]) / g.spacing[k]);
            } else {
              ++nzero;
            }
          }
        }
        if (!grow && w_[i] > 0.0 && nzero > 0 && (!selective || slope < 1.0)) {
          trial[i] = 0.0;
          any = true;
        } else if (grow && w_[i] == 0.0 && npos > 0 && (!selective || slope > 1.0)) {
          trial[i] = selective ? std::max(slope - 1.0, 0.5) * nsum / npos / std::max(slope, 1.0)
                               : 0.5 * nsum / npos;
          any = true;
        }
      }
      if (!any) continue;
      const std::vector<double> saved = w_;
      w_.swap(trial);
      double Et = energy(w_);
      for (int k = 0; k < relax_steps; ++k) {
        const double before = Et;
        if (!step(Et)) break;
        interface_pass(Et);
        if (before - Et < cfg_.stop_tolerance * std::abs(before)) break;
      }
      if (Et < E - 1e-14 * std::abs(E)) {
        E = Et;
        return true;
      }
      w_ = saved;
    }
    return false;
  }

private:
  CellLayout L_;
  ExponentPack p_;
  DescentConfig cfg_;
  std::vector<double> w_;
  std::vector<char> free_;
  std::vector<std::vector<std::size_t>> touching_;
  double snap_ = 0.0;
};

}  // namespace detail

// Projected descent on the w-form energy. Face values of `boundary` are held
// fixed; interior values start from `initial`.
inline MinimizeResult minimize_projected(const ScalarField& initial, const ScalarField& boundary,
                                         const ExponentPack& p, const DescentConfig& cfg = {}) {
  if (initial.grid() != boundary.grid()) throw ShapeError("minimize_projected: grid mismatch");
  detail::check_nonnegative(initial, "minimize_projected");
  detail::check_nonnegative(boundary, "minimize_projected");
  if (cfg.max_iters < 1 || !(cfg.step > 0.0) || !(cfg.armijo_factor > 0.0 && cfg.armijo_factor < 1.0))
    throw DomainError("minimize_projected: invalid descent configuration");
  const Grid& g = initial.grid();
  std::vector<double> start = initial.values();
  for (std::size_t i = 0; i < start.size(); ++i) {
    const auto m = g.unflatten(i);
    for (int k = 0; k < g.dim; ++k)
      if (m[k] == 0 || m[k] + 1 == g.nodes[k]) start[i] = boundary[i];
  }
  detail::Descent run(ScalarField(g, start), p, cfg);
  MinimizeResult res;
  double E = run.energy(run.values());
  res.energy_trace.push_back(E);
  int quiet = 0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    res.iterations = it;
    const double before = E;
    const bool moved = run.step(E);
    const std::size_t moves = run.interface_pass(E);
    res.interface_moves += moves;
    res.energy_trace.push_back(E);
    const double rel = (before - E) / std::max(std::abs(before), 1e-300);
    if ((!moved || rel < cfg.stop_tolerance) && moves == 0) {
      if (++quiet >= 2 || !moved) {
        if (run.layer_move(E, 50)) {
          ++res.interface_moves;
          res.energy_trace.back() = E;
          quiet = 0;
          continue;
        }
        res.converged = true;
        break;
      }
    } else {
      quiet = 0;
    }
  }
  res.w = ScalarField(g, run.values());
  res.residual = euler_lagrange_residual(res.w, p, 2.0 * run.snap());
  res.message = res.converged ? "converged" : "max_iters reached before stationarity";
  return res;
}

inline MinimizeResult minimize_projected(const ScalarField& initial, const ExponentPack& p,
                                         const DescentConfig& cfg = {}) {
  return minimize_projected(initial, initial, p, cfg);
}

}  // namespace altphillips
