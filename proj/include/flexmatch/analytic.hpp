#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "types.hpp"

namespace flexmatch {

struct PhiValue {
  double phi1 = 0, phi2 = 0, phi = 0;
};

inline PhiValue phi_closed_form(double alpha, double alpha_f, const FlexAllocation& a) {
  if (!(alpha >= 0.0 && alpha_f >= alpha)) throw InvalidParams("phi needs alpha_f >= alpha >= 0");
  check_alloc(a);
  const double bl = a.b_l, br = a.b_r, s = alpha + alpha_f;
  PhiValue v;
  v.phi1 = bl * std::exp(-(2 * alpha_f * br + s * (1 - br))) +
           (1 - bl) * std::exp(-(s * br + 2 * alpha * (1 - br)));
  v.phi2 = br * std::exp(-(2 * alpha_f * bl + s * (1 - bl))) +
           (1 - br) * std::exp(-(s * bl + 2 * alpha * (1 - bl)));
  v.phi = 1.0 - std::max(v.phi1, v.phi2);
  return v;
}

enum class Optimal { one_sided, balanced, tie };

inline const char* to_string(Optimal o) {
  switch (o) {
    case Optimal::one_sided: return "one_sided";
    case Optimal::balanced: return "balanced";
    case Optimal::tie: return "tie";
  }
  return "?";
}

inline double phi_criterion(double alpha, double alpha_f, double B) {
  const double d = alpha_f - alpha, x = std::exp(-d);
  return std::exp(-B * d / 2) * (1 - B / 2 + B / 2 * x) - (1 - B) - B * x;
}

inline Optimal phi_optimal_allocation(double alpha, double alpha_f, double B,
                                      double tol = 1e-12) {
  if (!(B >= 0.0 && B <= 1.0)) throw InvalidParams("B must lie in [0,1]");
  if (!(alpha_f >= alpha)) throw InvalidParams("alpha_f must be >= alpha");
  double c = phi_criterion(alpha, alpha_f, B);
  if (c > tol) return Optimal::one_sided;
  if (c < -tol) return Optimal::balanced;
  return Optimal::tie;
}

namespace detail {

inline void require_local(double p, double pf) {
  if (!(p >= 0.0 && p < pf && pf <= 0.5)) throw InvalidParams("local model needs 0 <= p < p_f <= 1/2");
}

// one step of the chain (x^f_{i+1}, x^n_{i+1}) = (f1, f2)(x^f_i, x^n_i) for k = 2
inline std::pair<double, double> local_step(double p, double pf, const FlexAllocation& a,
                                            double xf, double xn) {
  const double bl = a.b_l, br = a.b_r;
  auto term = [](double x, double q_next, double q_same) {
    return x * q_next + (1 - x) * (1 - q_same) * q_next;
  };
  double f1 = bl * br * term(xf, 2 * pf, 2 * pf) + (1 - bl) * br * term(xf, pf + p, pf + p) +
              bl * (1 - br) * term(xn, 2 * pf, pf + p) +
              (1 - bl) * (1 - br) * term(xn, pf + p, 2 * p);
  double f2 = bl * br * term(xf, pf + p, 2 * pf) + (1 - bl) * br * term(xf, 2 * p, pf + p) +
              bl * (1 - br) * term(xn, pf + p, pf + p) +
              (1 - bl) * (1 - br) * term(xn, 2 * p, 2 * p);
  return {f1, f2};
}

}  // namespace detail

// Fixed point of the two-state chain, solved as a 2x2 linear system.
inline double local_model_mu(double p, double pf, const FlexAllocation& a) {
  detail::require_local(p, pf);
  check_alloc(a);
  auto [c1, c2] = detail::local_step(p, pf, a, 0, 0);
  auto [u1, u2] = detail::local_step(p, pf, a, 1, 0);
  auto [v1, v2] = detail::local_step(p, pf, a, 0, 1);
  const double a11 = u1 - c1, a21 = u2 - c2, a12 = v1 - c1, a22 = v2 - c2;
  const double m11 = 1 - a11, m12 = -a12, m21 = -a21, m22 = 1 - a22;
  const double det = m11 * m22 - m12 * m21;
  double xf, xn;
  if (std::fabs(det) > 1e-14) {
    xf = (c1 * m22 - m12 * c2) / det;
    xn = (m11 * c2 - m21 * c1) / det;
  } else {
    // degenerate only when some edge class has probability one; iterate from zero instead
    xf = xn = 0;
    for (int t = 0; t < 100000; ++t) {
      auto [nf, nn] = detail::local_step(p, pf, a, xf, xn);
      if (std::fabs(nf - xf) + std::fabs(nn - xn) < 1e-16) break;
      xf = nf;
      xn = nn;
    }
  }
  const double bl = a.b_l, br = a.b_r;
  return br * xf + br * (1 - xf) * ((1 + bl) * pf + (1 - bl) * p) + (1 - br) * xn +
         (1 - br) * (1 - xn) * (bl * pf + (2 - bl) * p);
}

// Expanded rational form of the same quantity (degree-8 numerator and denominator).
inline double local_model_mu_rational(double p, double pf, const FlexAllocation& a) {
  detail::require_local(p, pf);
  const double s = a.b_l + a.b_r, b = a.b_l, s2 = s * s;
  const double p2 = p * p, p3 = p2 * p, p4 = p3 * p;
  const double f = pf, f2 = f * f, f3 = f2 * f, f4 = f3 * f;
  const double b2 = b * b, b3 = b2 * b, b4 = b3 * b;
  double num = 2 * s2 * p4 * b2 - 2 * s2 * p4 * b - 8 * s2 * p3 * f * b2 + 8 * s2 * p3 * f * b +
               12 * s2 * p2 * f2 * b2 - 12 * s2 * p2 * f2 * b - s2 * p2 - 8 * s2 * p * f3 * b2 +
               8 * s2 * p * f3 * b + 2 * s2 * p * f + 2 * s2 * f4 * b2 - 2 * s2 * f4 * b - s2 * f2 -
               4 * s * p4 * b3 + 2 * s * p4 * b2 + 2 * s * p4 * b + 16 * s * p3 * f * b3 -
               8 * s * p3 * f * b2 - 8 * s * p3 * f * b - 24 * s * p2 * f2 * b3 +
               12 * s * p2 * f2 * b2 + 12 * s * p2 * f2 * b - 2 * s * p2 * b + 7 * s * p2 +
               16 * s * p * f3 * b3 - 8 * s * p * f3 * b2 - 8 * s * p * f3 * b + 4 * s * p * f * b -
               6 * s * p * f - 2 * s * p - 4 * s * f4 * b3 + 2 * s * f4 * b2 + 2 * s * f4 * b -
               2 * s * f2 * b - s * f2 + 2 * s * f + 2 * p4 * b4 - 2 * p4 * b2 - 8 * p3 * f * b4 +
               8 * p3 * f * b2 + 12 * p2 * f2 * b4 - 12 * p2 * f2 * b2 + 2 * p2 * b2 - 8 * p2 -
               8 * p * f3 * b4 + 8 * p * f3 * b2 - 4 * p * f * b2 + 4 * p + 2 * f4 * b4 -
               2 * f4 * b2 + 2 * f2 * b2;
  double den = s2 * p4 * b2 - s2 * p4 * b - 4 * s2 * p3 * f * b2 + 4 * s2 * p3 * f * b +
               6 * s2 * p2 * f2 * b2 - 6 * s2 * p2 * f2 * b - 4 * s2 * p * f3 * b2 +
               4 * s2 * p * f3 * b + s2 * f4 * b2 - s2 * f4 * b - 2 * s * p4 * b3 + s * p4 * b2 +
               s * p4 * b + 8 * s * p3 * f * b3 - 4 * s * p3 * f * b2 - 4 * s * p3 * f * b -
               12 * s * p2 * f2 * b3 + 6 * s * p2 * f2 * b2 + 6 * s * p2 * f2 * b - 2 * s * p2 * b +
               3 * s * p2 + 8 * s * p * f3 * b3 - 4 * s * p * f3 * b2 - 4 * s * p * f3 * b +
               4 * s * p * f * b - 2 * s * p * f - 2 * s * f4 * b3 + s * f4 * b2 + s * f4 * b -
               2 * s * f2 * b - s * f2 + p4 * b4 - p4 * b2 - 4 * p3 * f * b4 + 4 * p3 * f * b2 +
               6 * p2 * f2 * b4 - 6 * p2 * f2 * b2 + 2 * p2 * b2 - 4 * p2 - 4 * p * f3 * b4 +
               4 * p * f3 * b2 - 4 * p * f * b2 + f4 * b4 - f4 * b2 + 2 * f2 * b2 + 1;
  return num / den;
}

inline double cannibalization_gap_bound(double alpha_f) {
  if (!(alpha_f > 0)) throw InvalidParams("alpha_f must be positive");
  return alpha_f * alpha_f * alpha_f / 32.0 * std::exp(-7.0 * alpha_f);
}

struct Thresholds {
  double alpha_star = 0;
  std::optional<double> alpha_f_star;
};

inline double alpha_star(double B) {
  if (!(B > 0.0 && B < 1.0)) throw InvalidParams("B must lie in (0,1)");
  const double h = 1 - B / 2;
  return std::min(B * B / (8 * h * h * h), std::log((2 - B) / B) / (2 * h));
}

inline Thresholds asymmetry_thresholds(double B, double alpha) {
  Thresholds t;
  t.alpha_star = alpha_star(B);
  if (alpha > 0.0 && alpha < t.alpha_star) {
    const double h = 1 - B / 2;
    double inner = 2 * alpha * ((B / 2) * (B / 2) - 2 * alpha * h * h * h);
    double den = h * std::exp(-2 * alpha * h) - B / 2;
    t.alpha_f_star = (std::log(B) - std::log(inner)) / den;
  }
  return t;
}

}  // namespace flexmatch
