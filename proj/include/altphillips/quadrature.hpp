#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <utility>

#include "altphillips/error.hpp"

namespace altphillips {

// Integral of t^p over [a, b], 0 <= a <= b, p > -1.
inline double power_moment(double a, double b, double p) {
  const double q = p + 1.0;
  const double hb = b > 0.0 ? std::pow(b, q) : 0.0;
  const double ha = a > 0.0 ? std::pow(a, q) : 0.0;
  return (hb - ha) / q;
}

// Weights (wa, wb) with  int_a^b t^s f dt = wa f(a) + wb f(b)  for f linear.
inline std::pair<double, double> linear_power_weights(double a, double b, double s) {
  const double L = b - a;
  const double m0 = power_moment(a, b, s);
  const double m1 = power_moment(a, b, s + 1.0);
  return {(b * m0 - m1) / L, (m1 - a * m0) / L};
}

// Gauss-Legendre rule on [0, 1].
struct UnitRule {
  std::array<double, 6> x{};
  std::array<double, 6> w{};
  int n = 0;
};

inline UnitRule gauss_legendre_unit(int n) {
  UnitRule r;
  r.n = n;
  auto set = [&](std::initializer_list<double> xs, std::initializer_list<double> ws) {
    int i = 0;
    for (double v : xs) r.x[i++] = 0.5 * (v + 1.0);
    i = 0;
    for (double v : ws) r.w[i++] = 0.5 * v;
  };
  switch (n) {
    case 1: set({0.0}, {2.0}); break;
    case 2: set({-0.5773502691896257645, 0.5773502691896257645}, {1.0, 1.0}); break;
    case 3:
      set({-0.7745966692414833770, 0.0, 0.7745966692414833770},
          {0.5555555555555555556, 0.8888888888888888889, 0.5555555555555555556});
      break;
    case 4:
      set({-0.8611363115940525752, -0.3399810435848562648, 0.3399810435848562648,
           0.8611363115940525752},
          {0.3478548451374538574, 0.6521451548625461426, 0.6521451548625461426,
           0.3478548451374538574});
      break;
    case 5:
      set({-0.9061798459386639928, -0.5384693101056830910, 0.0, 0.5384693101056830910,
           0.9061798459386639928},
          {0.2369268850561890875, 0.4786286704993664680, 0.5688888888888888889,
           0.4786286704993664680, 0.2369268850561890875});
      break;
    case 6:
      set({-0.9324695142031520278, -0.6612093864662645136, -0.2386191860831969086,
           0.2386191860831969086, 0.6612093864662645136, 0.9324695142031520278},
          {0.1713244923791703450, 0.3607615629185710000, 0.4679139345726910473,
           0.4679139345726910473, 0.3607615629185710000, 0.1713244923791703450});
      break;
    default: throw DomainError("gauss_legendre_unit: n must be in 1..6");
  }
  return r;
}

// Value and partials of P(a, b) = int_0^1 (a + (b - a) u)_+^s du for a, b >= 0.
struct LinePower {
  double value = 0.0;
  double da = 0.0;
  double db = 0.0;
};

inline LinePower line_power(double a, double b, double s) {
  LinePower r;
  if (a <= 0.0 && b <= 0.0) return r;
  const double q = 1.0 + s;
  if (a <= 0.0 || b <= 0.0) {
    // One endpoint on the interface: only the positive part contributes.
    const bool flip = b <= 0.0;
    const double hi = flip ? a : b;
    const double lo = flip ? b : a;
    const double L = hi - lo;
    const double hq = std::pow(hi, q);
    const double v = hq / (q * L);
    const double dhi = std::pow(hi, s) / L - v / L;
    const double dlo = v / L;
    r.value = v;
    r.da = flip ? dhi : dlo;
    r.db = flip ? dlo : dhi;
    return r;
  }
  const double m = 0.5 * (a + b);
  const double d = b - a;
  const double e = d / m;
  if (std::abs(e) < 1e-3) {
    const double c2 = s * (s - 1.0) / 24.0;
    const double c4 = s * (s - 1.0) * (s - 2.0) * (s - 3.0) / 1920.0;
    const double ms = std::pow(m, s);
    const double e2 = e * e;
    r.value = ms * (1.0 + c2 * e2 + c4 * e2 * e2);
    const double dm = ms / m * (s + c2 * (s - 2.0) * e2 + c4 * (s - 4.0) * e2 * e2);
    const double dd = ms / m * (2.0 * c2 * e + 4.0 * c4 * e2 * e);
    r.da = 0.5 * dm - dd;
    r.db = 0.5 * dm + dd;
    return r;
  }
  const double aq = std::pow(a, q);
  const double bq = std::pow(b, q);
  r.value = (bq - aq) / (q * d);
  r.db = std::pow(b, s) / d - r.value / d;
  r.da = -std::pow(a, s) / d + r.value / d;
  return r;
}

// int_0^1 (a + (b - a) u)_+^s (ga + (gb - ga) u) du, exact for linear profiles.
inline double line_power_linear(double a, double b, double ga, double gb, double s) {
  if (a <= 0.0 && b <= 0.0) return 0.0;
  if (a > 0.0 && b > 0.0) {
    const double m = 0.5 * (a + b);
    const double e = (b - a) / m;
    if (std::abs(e) < 1e-3) {
      const double gbar = 0.5 * (ga + gb);
      const double dg = gb - ga;
      const double e2 = e * e;
      const double even = 1.0 + s * (s - 1.0) / 24.0 * e2 +
                          s * (s - 1.0) * (s - 2.0) * (s - 3.0) / 1920.0 * e2 * e2;
      const double odd = s * e / 12.0 + s * (s - 1.0) * (s - 2.0) / 480.0 * e2 * e;
      return std::pow(m, s) * (gbar * even + dg * odd);
    }
  }
  // Change variables to w; G is linear in w along the line.
  const double d = b - a;
  const double c1 = (gb - ga) / d;
  const double c0 = ga - c1 * a;
  const double lo = std::max(std::min(a, b), 0.0);
  const double hi = std::max(a, b);
  const double i0 = power_moment(lo, hi, s);
  const double i1 = power_moment(lo, hi, s + 1.0);
  return (c0 * i0 + c1 * i1) / std::abs(d);
}

// Integral of w_+^s * G over one grid cell. Corner arrays are indexed by the
// bitmask of unit offsets (bit k set = upper node along axis k); w and G are
// multilinear. The cell is integrated exactly along `axis` and by a
// transverse Gauss-Legendre rule.
inline double cell_power_integral(const double* wc, const double* gc, int dim,
                                  const std::array<double, 3>& h, int axis, double s,
                                  int nq = 4) {
  const UnitRule rule = gauss_legendre_unit(nq);
  int others[2] = {0, 0};
  int no = 0;
  for (int k = 0; k < dim; ++k)
    if (k != axis) others[no++] = k;
  double vol = 1.0;
  for (int k = 0; k < dim; ++k) vol *= h[k];
  const int n1 = no >= 1 ? rule.n : 1;
  const int n2 = no >= 2 ? rule.n : 1;
  double total = 0.0;
  for (int q1 = 0; q1 < n1; ++q1) {
    for (int q2 = 0; q2 < n2; ++q2) {
      const double x1 = no >= 1 ? rule.x[q1] : 0.0;
      const double x2 = no >= 2 ? rule.x[q2] : 0.0;
      const double wt = (no >= 1 ? rule.w[q1] : 1.0) * (no >= 2 ? rule.w[q2] : 1.0);
      double ends_w[2] = {0.0, 0.0};
      double ends_g[2] = {0.0, 0.0};
      const int ncorner = 1 << dim;
      for (int c = 0; c < ncorner; ++c) {
        double coef = 1.0;
        if (no >= 1) coef *= ((c >> others[0]) & 1) ? x1 : 1.0 - x1;
        if (no >= 2) coef *= ((c >> others[1]) & 1) ? x2 : 1.0 - x2;
        const int end = (c >> axis) & 1;
        ends_w[end] += coef * wc[c];
        ends_g[end] += coef * gc[c];
      }
      total += wt * line_power_linear(ends_w[0], ends_w[1], ends_g[0], ends_g[1], s);
    }
  }
  return vol * total;
}

}  // namespace altphillips
