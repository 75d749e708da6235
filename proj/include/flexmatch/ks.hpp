#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "types.hpp"

namespace flexmatch {

// L/H refer to the two states of the fixed-point system; "hat" components belong to the right side.
struct KsVector {
  double w_L_f = 0, w_L_nf = 0, w_H_f = 0, w_H_nf = 0;
  double w_hat_L_f = 0, w_hat_L_nf = 0, w_hat_H_f = 0, w_hat_H_nf = 0;

  std::array<double, 8> as_array() const {
    return {w_L_f, w_L_nf, w_H_f, w_H_nf, w_hat_L_f, w_hat_L_nf, w_hat_H_f, w_hat_H_nf};
  }
};

struct KsSolution {
  KsVector y;
  double xi = 0, xi_hat = 0, mu_ks = 0;
  long iterations = 0;
  double residual = 0;
  bool subcritical = false;
  bool accelerated = false;  // finished by the Newton polish
};

inline bool is_subcritical(double alpha, double alpha_f) { return alpha + alpha_f < std::exp(1.0); }

inline KsVector ks_map(double alpha, double alpha_f, const FlexAllocation& b, const KsVector& w) {
  const double bl = b.b_l, br = b.b_r, lam = alpha + alpha_f;
  KsVector o;
  o.w_L_f = std::exp(-2 * br * alpha_f * (1 - w.w_hat_H_f) - (1 - br) * lam * (1 - w.w_hat_H_nf));
  o.w_L_nf = std::exp(-br * lam * (1 - w.w_hat_H_f) - 2 * (1 - br) * alpha * (1 - w.w_hat_H_nf));
  o.w_H_f = 1 - std::exp(-2 * br * alpha_f * w.w_hat_L_f - (1 - br) * lam * w.w_hat_L_nf);
  o.w_H_nf = 1 - std::exp(-br * lam * w.w_hat_L_f - 2 * (1 - br) * alpha * w.w_hat_L_nf);
  o.w_hat_L_f = std::exp(-2 * bl * alpha_f * (1 - w.w_H_f) - (1 - bl) * lam * (1 - w.w_H_nf));
  o.w_hat_L_nf = std::exp(-bl * lam * (1 - w.w_H_f) - 2 * (1 - bl) * alpha * (1 - w.w_H_nf));
  o.w_hat_H_f = 1 - std::exp(-2 * bl * alpha_f * w.w_L_f - (1 - bl) * lam * w.w_L_nf);
  o.w_hat_H_nf = 1 - std::exp(-bl * lam * w.w_L_f - 2 * (1 - bl) * alpha * w.w_L_nf);
  return o;
}

inline double ks_xi(double alpha, double alpha_f, const FlexAllocation& b, const KsVector& y) {
  const double bl = b.b_l, br = b.b_r, lam = alpha + alpha_f;
  const double lf = y.w_L_f, lnf = y.w_L_nf, hf = 1 - y.w_hat_H_f, hnf = 1 - y.w_hat_H_nf;
  return 2 - bl * lf - br * hf - br * hf * (2 * bl * alpha_f * lf + (1 - bl) * lam * lnf) -
         (1 - bl) * lnf - (1 - br) * hnf -
         (1 - br) * hnf * (bl * lam * lf + 2 * (1 - bl) * alpha * lnf);
}

inline double ks_xi_hat(double alpha, double alpha_f, const FlexAllocation& b, const KsVector& y) {
  const double bl = b.b_l, br = b.b_r, lam = alpha + alpha_f;
  const double lf = y.w_hat_L_f, lnf = y.w_hat_L_nf, hf = 1 - y.w_H_f, hnf = 1 - y.w_H_nf;
  return 2 - br * lf - bl * hf - bl * hf * (2 * br * alpha_f * lf + (1 - br) * lam * lnf) -
         (1 - br) * lnf - (1 - bl) * hnf -
         (1 - bl) * hnf * (br * lam * lf + 2 * (1 - br) * alpha * lnf);
}

inline double sup_dist(const KsVector& a, const KsVector& b) {
  auto x = a.as_array(), y = b.as_array();
  double d = 0;
  for (int i = 0; i < 8; ++i) d = std::max(d, std::fabs(x[i] - y[i]));
  return d;
}

namespace detail {

inline KsVector from_array(const std::array<double, 8>& a) {
  return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7]};
}

// Newton on F(w) - w with a forward-difference Jacobian and residual backtracking. Returns the
// polished vector, or nothing when it fails to reach tol.
inline bool newton_polish(double alpha, double alpha_f, const FlexAllocation& b, KsVector& w,
                          double tol) {
  auto G = [&](const std::array<double, 8>& x) {
    auto f = ks_map(alpha, alpha_f, b, from_array(x)).as_array();
    for (int i = 0; i < 8; ++i) f[i] -= x[i];
    return f;
  };
  auto norm = [](const std::array<double, 8>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
  };
  auto x = w.as_array();
  auto g = G(x);
  for (int it = 0; it < 100 && norm(g) >= tol; ++it) {
    double J[8][9];
    for (int j = 0; j < 8; ++j) {
      auto xp = x;
      const double h = 1e-7;
      xp[j] += h;
      auto gp = G(xp);
      for (int i = 0; i < 8; ++i) J[i][j] = (gp[i] - g[i]) / h;
    }
    for (int i = 0; i < 8; ++i) J[i][8] = -g[i];
    for (int c = 0; c < 8; ++c) {
      int piv = c;
      for (int r = c + 1; r < 8; ++r)
        if (std::fabs(J[r][c]) > std::fabs(J[piv][c])) piv = r;
      if (std::fabs(J[piv][c]) < 1e-300) return false;
      for (int k = 0; k < 9; ++k) std::swap(J[c][k], J[piv][k]);
      for (int r = 0; r < 8; ++r)
        if (r != c) {
          double f = J[r][c] / J[c][c];
          for (int k = c; k < 9; ++k) J[r][k] -= f * J[c][k];
        }
    }
    double step = 1;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
      auto xn = x;
      for (int i = 0; i < 8; ++i) xn[i] += step * J[i][8] / J[i][i];
      auto gn = G(xn);
      if (norm(gn) < norm(g)) {
        x = xn;
        g = gn;
        moved = true;
        break;
      }
    }
    if (!moved) return false;
  }
  if (!(norm(g) < tol)) return false;
  w = from_array(x);
  return true;
}

}  // namespace detail

// Jacobi iteration from the zero vector. The map is monotone, so iterates rise to the least
// fixed point. Near criticality that rise is sublinear; after each stall window a Newton polish
// is tried and kept only if it lands at or above the current iterate and close to it, since every
// fixed point dominates the iterates and the nearest one from below is the least one.
inline KsSolution solve_ks_fixed_point(double alpha, double alpha_f, const FlexAllocation& b,
                                       double tol = 1e-12, long max_iter = 1000000) {
  if (!(alpha >= 0.0 && alpha_f > alpha)) throw InvalidParams("ks solver needs alpha_f > alpha >= 0");
  if (!(tol > 0)) throw InvalidParams("tol must be positive");
  check_alloc(b);
  constexpr long kStallWindow = 5000;
  KsSolution s;
  KsVector w;
  double change = 1;
  long it = 0;
  // The two sides form interleaved chains whose step sizes alternate, so the returned vector is
  // the one whose residual was just measured rather than its image.
  while (it < max_iter) {
    KsVector nw = ks_map(alpha, alpha_f, b, w);
    change = sup_dist(nw, w);
    ++it;
    if (!(change >= tol)) break;
    w = nw;
    if (it % kStallWindow == 0) {
      KsVector p = w;
      if (detail::newton_polish(alpha, alpha_f, b, p, tol)) {
        auto pa = p.as_array(), wa = w.as_array();
        bool ok = true;
        for (int i = 0; i < 8; ++i) ok = ok && pa[i] >= wa[i] - 1e-9 && pa[i] <= wa[i] + 1e-2;
        if (ok) {
          w = p;
          change = sup_dist(ks_map(alpha, alpha_f, b, w), w);
          s.accelerated = true;
          break;
        }
      }
    }
  }
  s.y = w;
  s.iterations = it;
  s.residual = change;
  if (!(s.residual < tol)) throw NonConvergence("ks fixed point did not converge in max_iter rounds");
  s.xi = ks_xi(alpha, alpha_f, b, w);
  s.xi_hat = ks_xi_hat(alpha, alpha_f, b, w);
  s.mu_ks = std::min(s.xi, s.xi_hat);
  s.subcritical = is_subcritical(alpha, alpha_f);
  return s;
}

inline double mu_ks(double alpha, double alpha_f, const FlexAllocation& b, double tol = 1e-12) {
  return solve_ks_fixed_point(alpha, alpha_f, b, tol).mu_ks;
}

inline bool in_certified_regime(double alpha, double alpha_f) {
  return alpha > 1e-4 && alpha < alpha_f && is_subcritical(alpha, alpha_f);
}

struct ReducedOneSided {
  double x = 0, lo = 0, hi = 0, residual = 0;
  bool certified = false;
};

struct ReducedBalanced {
  double x1 = 0, x1_lo = 0, x1_hi = 0;
  double x2 = 0, x2_lo = 0, x2_hi = 0;
  double residual = 0;
  bool certified = false;
};

namespace detail {

// Root of an increasing g on [lo, hi] with g(lo) < 0 < g(hi); Newton steps kept inside the bracket.
template <class G, class DG>
double bracketed_root(G g, DG dg, double lo, double hi, double eps) {
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    double v = g(x);
    if (std::fabs(v) < eps * 0.5) return x;
    if (v < 0)
      lo = x;
    else
      hi = x;
    double d = dg(x);
    double nx = (d > 0 && std::isfinite(d)) ? x - v / d : lo;
    if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
    if (hi - lo < 1e-300) return nx;
    x = nx;
  }
  return x;
}

}  // namespace detail

// Subcritically the one-sided least solution satisfies x = exp(-lam x); that form has slope > 1,
// which is what makes the [x - eps, x + eps] enclosure sound.
inline ReducedOneSided solve_reduced_one_sided(double alpha, double alpha_f, double eps = 1e-8) {
  if (!(alpha >= 0.0 && alpha_f > alpha)) throw InvalidParams("needs alpha_f > alpha >= 0");
  if (!(eps > 0)) throw InvalidParams("eps must be positive");
  const double lam = alpha + alpha_f;
  auto f = [&](double x) { return x - std::exp(-lam * x); };
  auto df = [&](double x) { return 1 + lam * std::exp(-lam * x); };
  ReducedOneSided r;
  r.x = detail::bracketed_root(f, df, 0.0, 1.0, eps);
  r.residual = std::fabs(f(r.x));
  r.lo = r.x - eps;
  r.hi = r.x + eps;
  r.certified = in_certified_regime(alpha, alpha_f) && r.residual < eps;
  return r;
}

inline double reduced_x2(double alpha, double alpha_f, double x1) {
  return -2 * (std::log(x1) + alpha_f * x1) / (alpha + alpha_f);
}

inline double reduced_f1(double alpha, double alpha_f, double x1) {
  const double lam = alpha + alpha_f, t = std::log(x1) + alpha_f * x1;
  return std::exp(-0.5 * lam * x1 + 2 * alpha / lam * t) + 2 * t / lam;
}

inline ReducedBalanced solve_reduced_balanced(double alpha, double alpha_f, double eps = 1e-8) {
  if (!(alpha >= 0.0 && alpha_f > alpha)) throw InvalidParams("needs alpha_f > alpha >= 0");
  if (!(eps > 0)) throw InvalidParams("eps must be positive");
  const double lam = alpha + alpha_f;
  auto f1 = [&](double x) { return reduced_f1(alpha, alpha_f, x); };
  auto df1 = [&](double x) {
    const double t = std::log(x) + alpha_f * x, dt = 1 / x + alpha_f;
    return std::exp(-0.5 * lam * x + 2 * alpha / lam * t) * (-0.5 * lam + 2 * alpha / lam * dt) +
           2 * dt / lam;
  };
  double lo = 1e-6;
  while (lo > 1e-300 && !(f1(lo) < 0)) lo *= 1e-6;
  ReducedBalanced r;
  r.x1 = detail::bracketed_root(f1, df1, lo, 1.0, eps);
  r.residual = std::fabs(f1(r.x1));
  r.x2 = reduced_x2(alpha, alpha_f, r.x1);
  r.x1_lo = r.x1 - eps;
  r.x1_hi = r.x1 + eps;
  r.x2_lo = reduced_x2(alpha, alpha_f, r.x1 + eps);
  r.x2_hi = r.x1 > eps ? reduced_x2(alpha, alpha_f, r.x1 - eps)
                       : std::numeric_limits<double>::infinity();
  r.certified = in_certified_regime(alpha, alpha_f) && r.residual < eps;
  return r;
}

// Matched fraction at the special allocations written in terms of the reduced solutions.
inline double mu_one_sided_from_x(double alpha, double alpha_f, double x) {
  const double lam = alpha + alpha_f;
  return 2 - x - std::exp(-lam * x) * (1 + lam * x);
}

inline double mu_balanced_from_x(double alpha, double alpha_f, double x1, double x2) {
  const double lam = alpha + alpha_f;
  return 2 - 0.5 * x1 - 0.5 * x2 -
         0.5 * std::exp(-alpha_f * x1 - 0.5 * lam * x2) * (1 + alpha_f * x1 + 0.5 * lam * x2) -
         0.5 * std::exp(-0.5 * lam * x1 - alpha * x2) * (1 + 0.5 * lam * x1 + alpha * x2);
}

struct SodBalanced {
  double sod_diag = 0;    // second derivative along (1,-1) at (1/2,1/2)
  double sod_budget = 0;  // second derivative along (0,1) at (1/2,1/2)
};

inline double sod_diag_from_x(double a, double af, double x1, double x2) {
  const double d2 = (af - a) * (af - a);
  return (d2 * 4 * x1 * x2 * (x1 + x2) - 16 * (x2 - x1) * (af * x1 - a * x2)) /
         (d2 * x1 * x2 + 4 * (a * x2 + af * x1 - 1));
}

inline double sod_budget_from_x(double a, double af, double x1, double x2) {
  const double q = x1 * x2 * (af - a) * (af - a);
  const double lam = af + a;
  double num = -2 * (x1 + x2) * q * q - 16 * (x1 + x2) * x1 * x2 * af * a +
               8 * af * af * x1 * (x2 * x2 - 3 * x1 * x2 + 4 * x1 * x1) +
               8 * a * a * x2 * (x1 * x1 - 3 * x1 * x2 + 4 * x2 * x2);
  double den = -q * q + 8 * x1 * x2 * lam * lam + 16 * (a * a * x2 * x2 + af * af * x1 * x1 - 1);
  return num / den;
}

inline SodBalanced directional_sod_balanced(double alpha, double alpha_f, double eps = 1e-12) {
  auto r = solve_reduced_balanced(alpha, alpha_f, eps);
  return {sod_diag_from_x(alpha, alpha_f, r.x1, r.x2),
          sod_budget_from_x(alpha, alpha_f, r.x1, r.x2)};
}

}  // namespace flexmatch
