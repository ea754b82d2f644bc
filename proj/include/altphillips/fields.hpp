#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <sstream>
#include <utility>
#include <vector>

#include "altphillips/error.hpp"
#include "altphillips/quadrature.hpp"

namespace altphillips {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

// Uniform rectangular grid with up to three axes. Flat index is
// lexicographic with the last axis (x_d) fastest, so columns are contiguous.
struct Grid {
  int dim = 1;
  Vec3 origin{0.0, 0.0, 0.0};
  Vec3 spacing{1.0, 1.0, 1.0};
  std::array<std::size_t, 3> nodes{1, 1, 1};

  static Grid box(int dim, const Vec3& lo, const Vec3& hi, const std::array<std::size_t, 3>& n) {
    Grid g;
    g.dim = dim;
    for (int k = 0; k < 3; ++k) {
      if (k < dim) {
        if (n[k] < 2) throw SizeError("Grid::box: need at least 2 nodes per axis");
        g.origin[k] = lo[k];
        g.nodes[k] = n[k];
        g.spacing[k] = (hi[k] - lo[k]) / static_cast<double>(n[k] - 1);
      } else {
        g.origin[k] = 0.0;
        g.nodes[k] = 1;
        g.spacing[k] = 1.0;
      }
    }
    g.validate();
    return g;
  }

  void validate() const {
    if (dim < 1 || dim > 3) throw DomainError("Grid: dim must be 1, 2 or 3");
    for (int k = 0; k < dim; ++k) {
      if (!(spacing[k] > 0.0)) throw DomainError("Grid: spacing must be positive");
      if (nodes[k] < 1) throw SizeError("Grid: empty axis");
    }
  }

  std::size_t size() const { return nodes[0] * nodes[1] * nodes[2]; }

  std::size_t stride(int axis) const {
    std::size_t st = 1;
    for (int k = dim - 1; k > axis; --k) st *= nodes[k];
    return st;
  }

  std::size_t count(int axis) const { return axis < dim ? nodes[axis] : 1; }

  double coord(int axis, std::size_t i) const {
    return origin[axis] + spacing[axis] * static_cast<double>(i);
  }

  double upper(int axis) const { return coord(axis, nodes[axis] - 1); }

  std::array<std::size_t, 3> unflatten(std::size_t idx) const {
    std::array<std::size_t, 3> m{0, 0, 0};
    for (int k = dim - 1; k >= 0; --k) {
      m[k] = idx % nodes[k];
      idx /= nodes[k];
    }
    return m;
  }

  std::size_t flatten(const std::array<std::size_t, 3>& m) const {
    std::size_t idx = 0;
    for (int k = 0; k < dim; ++k) idx = idx * nodes[k] + m[k];
    return idx;
  }

  Vec3 point(std::size_t idx) const {
    const auto m = unflatten(idx);
    Vec3 x{0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k) x[k] = coord(k, m[k]);
    return x;
  }

  double cell_volume() const {
    double v = 1.0;
    for (int k = 0; k < dim; ++k) v *= spacing[k];
    return v;
  }

  double max_spacing() const {
    double h = 0.0;
    for (int k = 0; k < dim; ++k) h = std::max(h, spacing[k]);
    return h;
  }

  bool operator==(const Grid& o) const {
    if (dim != o.dim) return false;
    for (int k = 0; k < dim; ++k)
      if (nodes[k] != o.nodes[k] || origin[k] != o.origin[k] || spacing[k] != o.spacing[k])
        return false;
    return true;
  }
  bool operator!=(const Grid& o) const { return !(*this == o); }
};

class ScalarField {
public:
  ScalarField() = default;

  ScalarField(Grid grid, std::vector<double> values)
      : grid_(grid), values_(std::move(values)) {
    grid_.validate();
    if (values_.size() != grid_.size()) {
      std::ostringstream msg;
      msg << "ScalarField: " << values_.size() << " values for " << grid_.size() << " nodes";
      throw ShapeError(msg.str());
    }
    mask_.resize(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) mask_[i] = values_[i] > 0.0;
  }

  template <class F>
  static ScalarField sample(const Grid& grid, F&& f) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.point(i));
    return ScalarField(grid, std::move(v));
  }

  const Grid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }
  bool positive(std::size_t i) const { return mask_[i] != 0; }
  const std::vector<char>& positivity_mask() const { return mask_; }

private:
  Grid grid_;
  std::vector<double> values_;
  std::vector<char> mask_;
};

inline void require_stencil_size(const Grid& g) {
  for (int k = 0; k < g.dim; ++k)
    if (g.nodes[k] < 3) throw SizeError("stencils need at least 3 nodes per axis");
}

// First derivative along one axis: central inside, one-sided second order on faces.
inline std::vector<double> partial(const Grid& g, const std::vector<double>& v, int axis) {
  require_stencil_size(g);
  const std::size_t n = g.nodes[axis];
  const std::size_t st = g.stride(axis);
  const double inv2h = 1.0 / (2.0 * g.spacing[axis]);
  std::vector<double> out(v.size());
  for (std::size_t idx = 0; idx < v.size(); ++idx) {
    const std::size_t i = (idx / st) % n;
    if (i == 0)
      out[idx] = (-3.0 * v[idx] + 4.0 * v[idx + st] - v[idx + 2 * st]) * inv2h;
    else if (i == n - 1)
      out[idx] = (3.0 * v[idx] - 4.0 * v[idx - st] + v[idx - 2 * st]) * inv2h;
    else
      out[idx] = (v[idx + st] - v[idx - st]) * inv2h;
  }
  return out;
}

inline std::vector<double> second_partial(const Grid& g, const std::vector<double>& v, int axis) {
  require_stencil_size(g);
  const std::size_t n = g.nodes[axis];
  const std::size_t st = g.stride(axis);
  const double ih2 = 1.0 / (g.spacing[axis] * g.spacing[axis]);
  std::vector<double> out(v.size());
  for (std::size_t idx = 0; idx < v.size(); ++idx) {
    const std::size_t i = (idx / st) % n;
    if (i == 0) {
      out[idx] = n >= 4 ? (2.0 * v[idx] - 5.0 * v[idx + st] + 4.0 * v[idx + 2 * st] - v[idx + 3 * st]) * ih2
                        : (v[idx] - 2.0 * v[idx + st] + v[idx + 2 * st]) * ih2;
    } else if (i == n - 1) {
      out[idx] = n >= 4 ? (2.0 * v[idx] - 5.0 * v[idx - st] + 4.0 * v[idx - 2 * st] - v[idx - 3 * st]) * ih2
                        : (v[idx] - 2.0 * v[idx - st] + v[idx - 2 * st]) * ih2;
    } else {
      out[idx] = (v[idx + st] - 2.0 * v[idx] + v[idx - st]) * ih2;
    }
  }
  return out;
}

inline std::vector<Vec3> gradient(const ScalarField& f) {
  const Grid& g = f.grid();
  std::vector<Vec3> out(f.size(), Vec3{0.0, 0.0, 0.0});
  for (int a = 0; a < g.dim; ++a) {
    const auto d = partial(g, f.values(), a);
    for (std::size_t i = 0; i < d.size(); ++i) out[i][a] = d[i];
  }
  return out;
}

inline std::vector<Mat3> hessian(const ScalarField& f) {
  const Grid& g = f.grid();
  Mat3 zero{};
  std::vector<Mat3> out(f.size(), zero);
  std::vector<std::vector<double>> first(g.dim);
  for (int a = 0; a < g.dim; ++a) first[a] = partial(g, f.values(), a);
  for (int a = 0; a < g.dim; ++a) {
    const auto daa = second_partial(g, f.values(), a);
    for (std::size_t i = 0; i < daa.size(); ++i) out[i][a][a] = daa[i];
    for (int b = a + 1; b < g.dim; ++b) {
      const auto dab = partial(g, first[b], a);
      for (std::size_t i = 0; i < dab.size(); ++i) {
        out[i][a][b] = dab[i];
        out[i][b][a] = dab[i];
      }
    }
  }
  return out;
}

// Multilinear interpolation; points outside the box are clamped to it.
inline double interpolate(const Grid& g, const std::vector<double>& v, const Vec3& x) {
  std::array<std::size_t, 3> base{0, 0, 0};
  Vec3 frac{0.0, 0.0, 0.0};
  for (int k = 0; k < g.dim; ++k) {
    double u = (x[k] - g.origin[k]) / g.spacing[k];
    const double top = static_cast<double>(g.nodes[k] - 1);
    u = std::clamp(u, 0.0, top);
    std::size_t i = static_cast<std::size_t>(std::floor(u));
    if (i >= g.nodes[k] - 1) i = g.nodes[k] - 2;
    base[k] = i;
    frac[k] = u - static_cast<double>(i);
  }
  double acc = 0.0;
  const int nc = 1 << g.dim;
  for (int c = 0; c < nc; ++c) {
    double wgt = 1.0;
    auto m = base;
    for (int k = 0; k < g.dim; ++k) {
      const int bit = (c >> k) & 1;
      wgt *= bit ? frac[k] : 1.0 - frac[k];
      m[k] += static_cast<std::size_t>(bit);
    }
    if (wgt != 0.0) acc += wgt * v[g.flatten(m)];
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Weighted quadrature for x_d^s on {x_d >= 0}.

class WeightedHalfGrid {
public:
  WeightedHalfGrid(const Grid& grid, double s) : grid_(grid), s_(s) {
    grid_.validate();
    if (!(s > -1.0)) throw DomainError("WeightedHalfGrid: s must exceed -1");
    const int d = grid_.dim - 1;
    if (grid_.origin[d] < 0.0) throw DomainError("WeightedHalfGrid: grid must lie in {x_d >= 0}");
    const std::size_t n = grid_.nodes[d];
    if (n < 2) throw SizeError("WeightedHalfGrid: need at least 2 nodes along x_d");
    lower_.resize(n - 1);
    upper_.resize(n - 1);
    node_.assign(n, 0.0);
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const auto [wa, wb] = linear_power_weights(grid_.coord(d, j), grid_.coord(d, j + 1), s);
      lower_[j] = wa;
      upper_[j] = wb;
      node_[j] += wa;
      node_[j + 1] += wb;
    }
  }

  const Grid& grid() const { return grid_; }
  double s() const { return s_; }
  // Per-cell weights along a column: lower(j) multiplies f at node j, upper(j) at j + 1.
  double lower(std::size_t j) const { return lower_[j]; }
  double upper(std::size_t j) const { return upper_[j]; }
  const std::vector<double>& node_weights() const { return node_; }
  double column_mass() const {
    double m = 0.0;
    for (double w : node_) m += w;
    return m;
  }

private:
  Grid grid_;
  double s_;
  std::vector<double> lower_, upper_, node_;
};

// Trapezoid weight of node i along an axis with n nodes.
inline double trapezoid_weight(std::size_t i, std::size_t n, double h) {
  return (i == 0 || i + 1 == n) ? 0.5 * h : h;
}

inline double integrate_weighted(const WeightedHalfGrid& wg, const ScalarField& f) {
  const Grid& g = wg.grid();
  if (f.grid() != g) throw ShapeError("integrate_weighted: integrand sampled on a different grid");
  const int d = g.dim - 1;
  const std::size_t ncol = g.nodes[d];
  const auto& col = wg.node_weights();
  double total = 0.0;
  for (std::size_t start = 0; start < f.size(); start += ncol) {
    const auto m = g.unflatten(start);
    double cross = 1.0;
    for (int k = 0; k < d; ++k) cross *= trapezoid_weight(m[k], g.nodes[k], g.spacing[k]);
    double colsum = 0.0;
    for (std::size_t j = 0; j < ncol; ++j) colsum += col[j] * f[start + j];
    total += cross * colsum;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Interface extraction.

struct InterfacePoint {
  Vec3 x{0.0, 0.0, 0.0};
  Vec3 normal{0.0, 0.0, 0.0};  // unit, pointing out of {value > level}
  double curvature = 0.0;      // positive when the enclosed region is convex
};

struct Polyline {
  std::vector<InterfacePoint> points;
  bool closed = false;
};

struct LevelSetGeometry {
  int dim = 1;
  std::vector<Polyline> curves;
  bool has_interface() const { return !curves.empty(); }
  std::size_t point_count() const {
    std::size_t n = 0;
    for (const auto& c : curves) n += c.points.size();
    return n;
  }
};

struct ExtractOptions {
  double level = 0.0;
  // Arc length between the three points of the circumcircle fit; 0 picks
  // sqrt(h * extent), which balances vertex noise against curvature bias.
  double arc_window = 0.0;
};

namespace detail {

// Crossing parameter t in [0, 1] on the edge from node `out` (t = 0) to node
// `in` (t = 1). Exact zeros on the outside are treated as "unknown depth":
// the crossing is extrapolated from the inside values along the same line.
inline double edge_crossing(const std::vector<double>& v, double level, std::size_t out,
                            std::size_t in, long step, std::size_t steps_left_inside) {
  const double vin = v[in] - level;
  const double vout = v[out] - level;
  if (vout < 0.0 || level != 0.0) return vout / (vout - vin);
  if (steps_left_inside >= 2) {
    const double v2 = v[in + step] - level;
    const double v3 = v[in + 2 * step] - level;
    if (v2 > 0.0 && v3 > 0.0) {
      // Quadratic through t = 1, 2, 3.
      const double A = 0.5 * (vin - 2.0 * v2 + v3);
      const double B = (v2 - vin) - A * 3.0;
      const double C = vin - A - B;
      double best = -1.0;
      if (std::abs(A) < 1e-14 * (std::abs(B) + std::abs(C))) {
        if (B != 0.0) best = -C / B;
      } else {
        const double disc = B * B - 4.0 * A * C;
        if (disc >= 0.0) {
          const double sq = std::sqrt(disc);
          const double q = -0.5 * (B + std::copysign(sq, B));
          const double r1 = q / A;
          const double r2 = q != 0.0 ? C / q : r1;
          for (double r : {r1, r2})
            if (r >= 0.0 && r <= 1.0 && r > best) best = r;
        }
      }
      if (best >= 0.0 && best <= 1.0) return best;
    }
  }
  if (steps_left_inside >= 1) {
    const double v2 = v[in + step] - level;
    if (v2 > vin) return std::clamp(1.0 - vin / (v2 - vin), 0.0, 1.0);
  }
  return 0.0;
}

// Arc-length window around each vertex: the vertices lo/hi at least `window`
// away along the curve (clamped at the ends of open curves), with their
// signed arc offsets. lo == hi == i marks a vertex with no usable window.
struct ArcStencil {
  std::vector<std::size_t> lo, hi;
  std::vector<double> arc_lo, arc_hi;
};

inline ArcStencil arc_stencil(const Polyline& pl, double window) {
  const auto& P = pl.points;
  const std::size_t n = P.size();
  ArcStencil st;
  st.lo.resize(n);
  st.hi.resize(n);
  st.arc_lo.resize(n);
  st.arc_hi.resize(n);
  if (n == 0) return st;
  std::vector<double> arc(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double dx = P[i].x[0] - P[i - 1].x[0];
    const double dy = P[i].x[1] - P[i - 1].x[1];
    arc[i] = arc[i - 1] + std::hypot(dx, dy);
  }
  double total = arc[n - 1];
  if (pl.closed) {
    total += std::hypot(P[0].x[0] - P[n - 1].x[0], P[0].x[1] - P[n - 1].x[1]);
    window = std::min(window, total / 6.0);
  }
  const long nn = static_cast<long>(n);
  auto pos = [&](long k) -> std::pair<std::size_t, double> {
    // Index and unwrapped arc position of vertex k (k may leave [0, n) for closed curves).
    long q = ((k % nn) + nn) % nn;
    const long wraps = (k - q) / nn;
    return {static_cast<std::size_t>(q), arc[static_cast<std::size_t>(q)] + static_cast<double>(wraps) * total};
  };
  for (std::size_t i = 0; i < n; ++i) {
    const long ii = static_cast<long>(i);
    long j = ii, k = ii;
    const double here = arc[i];
    if (pl.closed) {
      while (j > ii - nn + 1 && here - pos(j).second < window) --j;
      while (k < ii + nn - 1 && pos(k).second - here < window) ++k;
    } else {
      while (j > 0 && here - arc[static_cast<std::size_t>(j)] < window) --j;
      while (k < nn - 1 && arc[static_cast<std::size_t>(k)] - here < window) ++k;
    }
    if (j == ii || k == ii) j = k = ii;
    st.lo[i] = pos(j).first;
    st.hi[i] = pos(k).first;
    st.arc_lo[i] = pos(j).second - here;
    st.arc_hi[i] = pos(k).second - here;
  }
  return st;
}

inline double default_arc_window(const Grid& g) {
  const double ext = std::max(g.upper(0) - g.origin[0], g.upper(1) - g.origin[1]);
  return std::sqrt(g.max_spacing() * ext);
}

inline void finish_polyline(Polyline& pl, double window) {
  auto& P = pl.points;
  const std::size_t n = P.size();
  if (n == 0) return;
  const ArcStencil st = arc_stencil(pl, window);
  const long lim = static_cast<long>(n);
  auto wrap = [&](long k) { return static_cast<std::size_t>(((k % lim) + lim) % lim); };
  for (std::size_t i = 0; i < n; ++i) {
    const long ii = static_cast<long>(i);
    // Tangent from the neighbouring vertices; outward normal is to its right.
    const auto& pn = P[wrap(ii + 1 < lim || pl.closed ? ii + 1 : ii)].x;
    const auto& pp = P[wrap(ii > 0 || pl.closed ? ii - 1 : ii)].x;
    double tx = pn[0] - pp[0], ty = pn[1] - pp[1];
    const double tl = std::hypot(tx, ty);
    if (tl > 0.0) {
      tx /= tl;
      ty /= tl;
      P[i].normal = {ty, -tx, 0.0};
    }
    if (st.lo[i] == i && st.hi[i] == i) {
      P[i].curvature = 0.0;
      continue;
    }
    const auto& a = P[st.lo[i]].x;
    const auto& b = P[i].x;
    const auto& c = P[st.hi[i]].x;
    const double abx = b[0] - a[0], aby = b[1] - a[1];
    const double bcx = c[0] - b[0], bcy = c[1] - b[1];
    const double acx = c[0] - a[0], acy = c[1] - a[1];
    const double cross = abx * bcy - aby * bcx;
    const double denom = std::hypot(abx, aby) * std::hypot(bcx, bcy) * std::hypot(acx, acy);
    P[i].curvature = denom > 0.0 ? 2.0 * cross / denom : 0.0;
  }
}

}  // namespace detail

inline LevelSetGeometry extract_level_set(const ScalarField& f, const ExtractOptions& opt = {}) {
  const Grid& g = f.grid();
  const auto& v = f.values();
  const double level = opt.level;
  LevelSetGeometry geo;
  geo.dim = g.dim;
  auto inside = [&](std::size_t i) { return v[i] > level; };

  if (g.dim == 1) {
    const std::size_t n = g.nodes[0];
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (inside(i) == inside(i + 1)) continue;
      const bool up = inside(i + 1);
      const std::size_t in = up ? i + 1 : i;
      const std::size_t out = up ? i : i + 1;
      const long step = up ? 1 : -1;
      const std::size_t left = up ? n - 1 - in : in;
      const double t = detail::edge_crossing(v, level, out, in, step, left);
      InterfacePoint p;
      const double xo = g.coord(0, out), xi = g.coord(0, in);
      p.x = {xo + t * (xi - xo), 0.0, 0.0};
      p.normal = {up ? -1.0 : 1.0, 0.0, 0.0};
      Polyline pl;
      pl.points.push_back(p);
      geo.curves.push_back(pl);
    }
    return geo;
  }
  if (g.dim != 2) throw DomainError("extract_level_set: only 1D and 2D fields are supported");

  const std::size_t nx = g.nodes[0], ny = g.nodes[1];
  auto id = [&](std::size_t i, std::size_t j) { return i * ny + j; };
  // Edge key: 2 * node + 0 for the +x edge, + 1 for the +y edge.
  std::map<std::size_t, Vec3> crossing;
  auto edge_point = [&](std::size_t a, std::size_t b, std::size_t key, int axis) -> std::size_t {
    if (crossing.count(key)) return key;
    const bool a_in = inside(a);
    const std::size_t in = a_in ? a : b;
    const std::size_t out = a_in ? b : a;
    const auto mi = g.unflatten(in);
    const long st = static_cast<long>(g.stride(axis));
    const long step = (in > out) ? st : -st;
    const std::size_t left = (in > out) ? g.nodes[axis] - 1 - mi[axis] : mi[axis];
    const double t = detail::edge_crossing(v, level, out, in, step, left);
    const Vec3 xo = g.point(out), xi = g.point(in);
    crossing[key] = {xo[0] + t * (xi[0] - xo[0]), xo[1] + t * (xi[1] - xo[1]), 0.0};
    return key;
  };

  std::vector<std::pair<std::size_t, std::size_t>> segs;  // exit key -> entry key
  for (std::size_t i = 0; i + 1 < nx; ++i) {
    for (std::size_t j = 0; j + 1 < ny; ++j) {
      const std::size_t c[4] = {id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)};
      const bool in[4] = {inside(c[0]), inside(c[1]), inside(c[2]), inside(c[3])};
      const int cnt = in[0] + in[1] + in[2] + in[3];
      if (cnt == 0 || cnt == 4) continue;
      // Counterclockwise edges e0..e3 with their keys and axes.
      const std::size_t keys[4] = {2 * c[0], 2 * c[1] + 1, 2 * c[3], 2 * c[0] + 1};
      const int axes[4] = {0, 1, 0, 1};
      std::size_t pts[4];
      bool exit_edge[4], entry_edge[4];
      for (int e = 0; e < 4; ++e) {
        const int a = e, b = (e + 1) % 4;
        exit_edge[e] = in[a] && !in[b];
        entry_edge[e] = !in[a] && in[b];
        if (exit_edge[e] || entry_edge[e]) {
          const std::size_t lo = std::min(c[a], c[b]);
          const std::size_t hi = std::max(c[a], c[b]);
          pts[e] = edge_point(lo, hi, keys[e], axes[e]);
        }
      }
      if (cnt == 2 && in[0] == in[2]) {
        double centre = 0.25 * (v[c[0]] + v[c[1]] + v[c[2]] + v[c[3]]);
        const bool centre_in = centre > level;
        for (int e = 0; e < 4; ++e) {
          if (!exit_edge[e]) continue;
          const int partner = centre_in ? (e + 1) % 4 : (e + 3) % 4;
          segs.emplace_back(pts[e], pts[partner]);
        }
      } else {
        int ex = -1, en = -1;
        for (int e = 0; e < 4; ++e) {
          if (exit_edge[e]) ex = e;
          if (entry_edge[e]) en = e;
        }
        segs.emplace_back(pts[ex], pts[en]);
      }
    }
  }
  if (segs.empty()) return geo;

  std::map<std::size_t, std::size_t> from;  // start key -> segment
  std::map<std::size_t, int> is_target;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    from[segs[k].first] = k;
    is_target[segs[k].second] = 1;
  }
  std::vector<char> used(segs.size(), 0);
  const double window = opt.arc_window > 0.0 ? opt.arc_window : detail::default_arc_window(g);
  auto walk = [&](std::size_t k0, bool closed) {
    Polyline pl;
    pl.closed = closed;
    std::size_t k = k0;
    pl.points.push_back({crossing[segs[k].first], {}, 0.0});
    while (true) {
      used[k] = 1;
      const std::size_t nxt = segs[k].second;
      auto it = from.find(nxt);
      if (it == from.end()) {
        pl.points.push_back({crossing[nxt], {}, 0.0});
        break;
      }
      if (used[it->second]) break;  // closed loop reached its start
      pl.points.push_back({crossing[nxt], {}, 0.0});
      k = it->second;
    }
    detail::finish_polyline(pl, window);
    geo.curves.push_back(std::move(pl));
  };
  for (std::size_t k = 0; k < segs.size(); ++k)
    if (!used[k] && !is_target.count(segs[k].first)) walk(k, false);
  for (std::size_t k = 0; k < segs.size(); ++k)
    if (!used[k]) walk(k, true);
  return geo;
}

inline LevelSetGeometry extract_free_boundary(const ScalarField& f) {
  return extract_level_set(f, ExtractOptions{});
}

// Symmetric Hausdorff distance between the vertex sets of two extractions.
inline double hausdorff_distance(const LevelSetGeometry& a, const LevelSetGeometry& b) {
  auto one_side = [](const LevelSetGeometry& p, const LevelSetGeometry& q) {
    double worst = 0.0;
    for (const auto& cp : p.curves)
      for (const auto& x : cp.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& cq : q.curves)
          for (const auto& y : cq.points) {
            const double d = std::hypot(std::hypot(x.x[0] - y.x[0], x.x[1] - y.x[1]), x.x[2] - y.x[2]);
            best = std::min(best, d);
          }
        worst = std::max(worst, best);
      }
    return worst;
  };
  return std::max(one_side(a, b), one_side(b, a));
}

}  // namespace altphillips
