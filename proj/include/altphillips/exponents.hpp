#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "altphillips/error.hpp"

namespace altphillips {

struct ExponentPack {
  double gamma;
  double beta;    // 2 / (2 - gamma)
  double s;       // beta * gamma
  double c_beta;  // beta^(-beta)
};

inline ExponentPack make_exponents(double gamma) {
  if (!(gamma > -2.0 && gamma < 2.0)) {
    std::ostringstream msg;
    msg << "gamma = " << gamma << " outside the admissible interval (-2, 2)";
    throw DomainError(msg.str());
  }
  ExponentPack p;
  p.gamma = gamma;
  p.beta = 2.0 / (2.0 - gamma);
  p.s = 2.0 * gamma / (2.0 - gamma);
  p.c_beta = std::pow(p.beta, -p.beta);
  return p;
}

// Pack for a given weight exponent s > -1; gamma = 2s / (2 + s).
inline ExponentPack exponents_from_s(double s) {
  if (!(s > -1.0)) throw DomainError("weight exponent s must exceed -1");
  return make_exponents(2.0 * s / (2.0 + s));
}

inline double u_to_w(double u, const ExponentPack& p) {
  if (u < 0.0) throw DomainError("u_to_w: negative input");
  if (u == 0.0) return 0.0;
  return p.beta * std::pow(u, 1.0 / p.beta);
}

inline double w_to_u(double w, const ExponentPack& p) {
  if (w < 0.0) throw DomainError("w_to_u: negative input");
  if (w == 0.0) return 0.0;
  return std::pow(w / p.beta, p.beta);
}

struct OneDimValue {
  double u0;
  double w0;
};

inline OneDimValue one_dim_solution(double t, const ExponentPack& p) {
  if (!(t > 0.0)) return {0.0, 0.0};
  return {p.c_beta * std::pow(t, p.beta), t};
}

struct DimensionWindow {
  double d_low;
  double d_high;

  // Strict open interval; a relative slack keeps the boundary case d = d_high
  // (e.g. d = 7 at the threshold exponent) on the excluded side.
  bool admits(double d) const {
    const double slack = 1e-12 * std::max(1.0, std::abs(d));
    return d > d_low + slack && d < d_high - slack;
  }
};

inline DimensionWindow dimension_window(double s) {
  if (s > 1.0) throw DomainError("dimension_window: s must not exceed 1");
  const double r = std::sqrt(1.0 - s);
  return {2.0 + (1.0 - r) * (1.0 - r), 2.0 + (1.0 + r) * (1.0 + r)};
}

inline double d7_gamma_threshold() { return (10.0 - 8.0 * std::sqrt(5.0)) / 11.0; }

}  // namespace altphillips
