#pragma once
#include <cmath>
#include <functional>
#include "lab/types.hpp"

namespace lab {

// Closed forms on the curvature -1 model spaces, all under the Delta
// generator: transition densities solve d_t p = Delta p, so the flat-space
// limit is (4 pi t)^(-m/2) exp(-r^2/4t).

inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  double h = (b - a) / n, acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// sqrt(cosh s - cosh r) without cancellation: 2 sinh((s+r)/2) sinh((s-r)/2).
inline double cosh_diff(double s, double r) {
  return 2.0 * std::sinh(0.5 * (s + r)) * std::sinh(0.5 * (s - r));
}

// Hyperbolic plane kernel, log form. The Gaussian factor exp(-r^2/4t) is
// pulled out so the remaining integral is O(1) and small times stay finite.
//   p_t(r) = sqrt(2)/(8 pi^{3/2}) t^{-3/2} e^{-t/4} I,
//   I = int_r^inf s e^{-s^2/4t} / sqrt(cosh s - cosh r) ds.
// The substituted form v^2 = cosh s - cosh r flattens the near-singular peak
// but stretches exponentially in s - r, so it is only used while the
// significant s-range sqrt(r^2 + 166 t) - r stays short; otherwise integrate
// in s with a sqrt(s - r) unfolding of the endpoint.
namespace detail_h2 {
inline double smax_of(double r, double t) { return std::sqrt(r * r + 166.0 * t); }
inline bool narrow_regime(double r, double t) { return smax_of(r, t) - r <= 3.0; }

inline double kernel_integral(double r, double t) {
  double smax = smax_of(r, t);
  if (narrow_regime(r, t)) {
    double V = std::sqrt(cosh_diff(smax + 1e-3, r));
    auto f = [&](double v) {
      double s = std::acosh(std::cosh(r) + v * v);
      if (s == 0.0) return 2.0;  // limit of 2 s / sinh s
      return 2.0 * s / std::sinh(s) * std::exp(-(s * s - r * r) / (4 * t));
    };
    return simpson(f, 0.0, V, 480);
  }
  auto fn = [&](double w) {  // s = r + w^2, integrand 2 w s e^.. / sqrt(..)
    double s = r + w * w;
    double num;
    if (w < 1e-12)
      num = (r < 1e-12) ? 0.0 : 2.0 * s / std::sqrt(std::sinh(r));
    else
      num = 2.0 * w * s / std::sqrt(cosh_diff(s, r));
    return num * std::exp(-(s * s - r * r) / (4 * t));
  };
  auto ff = [&](double s) {
    return s * std::exp(-(s * s - r * r) / (4 * t)) / std::sqrt(cosh_diff(s, r));
  };
  return simpson(fn, 0.0, 1.0, 400) + simpson(ff, r + 1.0, smax + 2.0, 1200);
}
}  // namespace detail_h2

inline double lnp_h2(double r, double t) {
  const double lnC = 0.5 * std::log(2.0) - std::log(8.0) - 1.5 * std::log(M_PI);
  r = std::abs(r);
  return lnC - 1.5 * std::log(t) - t / 4.0 - r * r / (4 * t) +
         std::log(detail_h2::kernel_integral(r, t));
}

// d/dr ln p for the plane: differentiate under the integral in the
// small-time regime (ds/dr = sinh r / sinh s), finite differences otherwise.
inline double dr_lnp_h2(double r, double t) {
  if (!detail_h2::narrow_regime(r, t) || r < 1e-6) {
    double h = std::max(1e-6, 1e-6 * r);
    return (lnp_h2(r + h, t) - lnp_h2(r - h, t)) / (2 * h);
  }
  double smax = detail_h2::smax_of(r, t);
  double V = std::sqrt(cosh_diff(smax + 1e-3, r));
  double I = 0, dI = 0;
  auto add = [&](double v, double wgt) {
    double s = std::acosh(std::cosh(r) + v * v);
    double f, df;
    if (s < 1e-12) {
      f = 2.0;
      df = 0.0;
    } else {
      double sh = std::sinh(s), ch = std::cosh(s);
      double e = std::exp(-(s * s - r * r) / (4 * t));
      double dsdr = std::sinh(r) / sh;
      f = 2.0 * s / sh * e;
      double dpre = (2.0 / sh - 2.0 * s * ch / (sh * sh)) * dsdr;
      double dexp = -(2.0 * s * dsdr - 2.0 * r) / (4 * t);
      df = (dpre + 2.0 * s / sh * dexp) * e;
    }
    I += wgt * f;
    dI += wgt * df;
  };
  int n = 480;
  double h = V / n;
  add(0.0, 1.0);
  add(V, 1.0);
  for (int i = 1; i < n; ++i) add(i * h, i % 2 ? 4.0 : 2.0);
  return -r / (2 * t) + dI / I;  // the h/3 weights cancel in the ratio
}

// Hyperbolic 3-space closed form.
inline double lnp_h3(double r, double t) {
  double lnratio = (r < 1e-8) ? -r * r / 6.0 : std::log(r) - std::log(std::sinh(r));
  return -1.5 * std::log(4.0 * M_PI * t) + lnratio - t - r * r / (4 * t);
}

inline double dr_lnp_h3(double r, double t) {
  if (r < 1e-8) return -r / 3.0 - r / (2 * t);
  return 1.0 / r - 1.0 / std::tanh(r) - r / (2 * t);
}

// Busemann functions on the half-space model, normalized to 0 at x0.
// Boundary point at infinity:
inline double busemann_inf_halfspace(const Vec& x, const Vec& x0) {
  int m = int(x.size());
  return -std::log(x[m - 1] / x0[m - 1]);
}

// Finite boundary point s (chart coordinates of the first m-1 entries):
inline double busemann_point_halfspace(const Vec& x, const Vec& x0, const Vec& s) {
  int m = int(x.size());
  auto part = [&](const Vec& z) {
    double q = (z.head(m - 1) - s).squaredNorm() + z[m - 1] * z[m - 1];
    return std::log(q / z[m - 1]);
  };
  return part(x) - part(x0);
}

// Exact stable-tensor profile on the plane in inverse (W) form: the backward
// solution of W' = 1 - W^2 from W(s - eps) = -eps is a shifted -tanh.
inline double riccati_exact_W_h2(double t, double s, double eps) {
  return -std::tanh(s - eps - t + std::atanh(eps));
}

// Harmonic measure density from z0 in the unit disk (angle theta), which is
// the Euclidean Poisson kernel by conformal invariance of planar paths.
inline double poisson_disk(const Vec& z0, double theta) {
  double cx = std::cos(theta) - z0[0], cy = std::sin(theta) - z0[1];
  return (1.0 - z0.squaredNorm()) / (2.0 * M_PI * (cx * cx + cy * cy));
}

}  // namespace lab
