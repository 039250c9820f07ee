#pragma once
#include "lab/geodesic.hpp"

namespace lab {

// Half-space model: d = acosh(1 + |x-y|^2 / (2 x_m y_m)), evaluated in logs
// once the argument is large so depths y_m ~ exp(-600) stay finite.
template <class S>
S dist_halfspace(const VecT<S>& x, const VecT<S>& y) {
  int m = int(x.size());
  S d2 = (x - y).squaredNorm();
  S lq = std::log(d2) - std::log(S(2)) - std::log(x[m - 1]) - std::log(y[m - 1]);
  if (lq > S(36)) return lq + std::log(S(2));  // acosh(1+q) -> log(2q)
  S q = std::exp(lq);
  return std::acosh(S(1) + q);
}

// Coordinate partials of d(x, y) in the first argument.
template <class S>
VecT<S> dist_halfspace_grad(const VecT<S>& x, const VecT<S>& y) {
  int m = int(x.size());
  S q = (x - y).squaredNorm() / (2 * x[m - 1] * y[m - 1]);
  VecT<S> dq(m);
  for (int i = 0; i < m; ++i) dq[i] = (x[i] - y[i]) / (x[m - 1] * y[m - 1]);
  dq[m - 1] -= q / x[m - 1];
  S z = S(1) + q;
  return dq / std::sqrt(z * z - 1);
}

template <class S>
S dist_disk(const VecT<S>& x, const VecT<S>& y) {
  S q = 2 * (x - y).squaredNorm() / ((1 - x.squaredNorm()) * (1 - y.squaredNorm()));
  return std::acosh(1 + q);
}

// Chart log map on the half-space model via the distance gradient: the unit
// tangent at x toward y is minus the normalized sharp of grad_x d.
template <class S>
VecT<S> log_map_halfspace(const VecT<S>& x, const VecT<S>& y) {
  int m = int(x.size());
  S d = dist_halfspace(x, y);
  if (d < S(1e-9)) return y - x;
  HyperbolicHalfSpaceT<S> M(m);
  VecT<S> u = -sharp(M, x, dist_halfspace_grad(x, y));
  return d * u / norm(M, x, u);
}

// Newton solve of exp_x(v) = y. Residuals are measured in the metric at y so
// the stopping rule is a geodesic-distance error, uniformly over depth.
template <class S>
struct ShootResult {
  VecT<S> v;
  S dist = 0;
  int iters = 0;
  bool ok = false;
};

template <class S>
ShootResult<S> log_map_shoot(const MetricT<S>& M, const VecT<S>& x, const VecT<S>& y,
                             VecT<S> v0, S tol = S(1e-9), int max_iter = 30,
                             S h_arc = S(0.02)) {
  int m = M.m;
  ShootResult<S> res;
  res.v = v0;
  MatT<S> Gy;
  M.g(y, Gy);
  for (int it = 0; it < max_iter; ++it) {
    VecT<S> xe = x, ve = res.v;
    exp_map(M, xe, ve, (MatT<S>*)nullptr, h_arc);
    VecT<S> F = xe - y;
    S err = std::sqrt(F.dot(Gy * F));
    res.iters = it;
    if (err < tol * (1 + norm(M, x, res.v))) {
      res.ok = true;
      break;
    }
    MatT<S> J(m, m);
    S hv = S(1e-6) * (1 + res.v.norm());
    for (int j = 0; j < m; ++j) {
      VecT<S> vp = res.v;
      vp[j] += hv;
      VecT<S> xp = x;
      exp_map(M, xp, vp, (MatT<S>*)nullptr, h_arc);
      J.col(j) = (xp - xe) / hv;
    }
    VecT<S> step = J.fullPivLu().solve(F);
    // damp large corrections; keeps the iteration inside the chart
    S sn = norm(M, x, step);
    if (sn > S(0.5) * (1 + norm(M, x, res.v))) step *= S(0.5) * (1 + norm(M, x, res.v)) / sn;
    res.v -= step;
  }
  res.dist = norm(M, x, res.v);
  return res;
}

}  // namespace lab
