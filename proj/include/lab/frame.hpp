#pragma once
#include <vector>
#include "lab/geodesic.hpp"

namespace lab {

// Modified Gram-Schmidt in g(x), columns in order.
template <class S>
MatT<S> mgs_frame(const MetricT<S>& M, const VecT<S>& x, MatT<S> E) {
  MatT<S> G;
  M.g(x, G);
  for (int j = 0; j < E.cols(); ++j) {
    for (int i = 0; i < j; ++i) E.col(j) -= E.col(i).dot(G * E.col(j)) * E.col(i);
    E.col(j) /= std::sqrt(E.col(j).dot(G * E.col(j)));
  }
  return E;
}

// Gram-Schmidt differentiated: dG is the metric variation tensor at x and dE
// the seed variation; returns (U, dU) with dU the first-order response.
// Inner products vary as d<a,b> = X(a,b) + <da,b> + <a,db>.
template <class S>
void mgs_frame_var(const MetricT<S>& M, const VecT<S>& x, const MatT<S>& E,
                   const MatT<S>& Xab, const MatT<S>& dE, MatT<S>& U, MatT<S>& dU) {
  int m = M.m;
  MatT<S> G;
  M.g(x, G);
  U.resize(m, E.cols());
  dU.resize(m, E.cols());
  for (int j = 0; j < E.cols(); ++j) {
    VecT<S> w = E.col(j), dw = dE.col(j);
    for (int i = 0; i < j; ++i) {
      VecT<S> ui = U.col(i), dui = dU.col(i);
      S c = ui.dot(G * w);
      S dc = ui.dot(Xab * w) + dui.dot(G * w) + ui.dot(G * dw);
      w -= c * ui;
      dw -= dc * ui + c * dui;
    }
    S n2 = w.dot(G * w);
    S n = std::sqrt(n2);
    S dn = (S(0.5) * w.dot(Xab * w) + w.dot(G * dw)) / n;
    U.col(j) = w / n;
    dU.col(j) = dw / n - w * (dn / n2);
  }
}

// One Brownian step on the frame bundle: geodesic increment with velocity
// U dB, frame carried by parallel transport then re-orthonormalized.
template <class S>
void bm_step(const MetricT<S>& M, VecT<S>& x, MatT<S>& U, const VecT<S>& dB, int nsub = 2) {
  VecT<S> v = U * dB;
  S h = S(1) / S(nsub);
  for (int i = 0; i < nsub; ++i) geodesic_step(M, x, v, h, &U);
  U = mgs_frame(M, x, U);
}

// Roll a path out of its antidevelopment: x_{k+1} = exp(U_k da_k), frames by
// pure parallel transport (no re-orthonormalization, so the map is exactly
// invertible by antidevelop up to integrator error).
template <class S>
void develop(const MetricT<S>& M, const VecT<S>& x0, const MatT<S>& U0,
             const std::vector<VecT<S>>& da, std::vector<VecT<S>>& xs,
             std::vector<MatT<S>>& Us, int nsub = 2) {
  size_t K = da.size();
  xs.assign(K + 1, x0);
  Us.assign(K + 1, U0);
  VecT<S> x = x0;
  MatT<S> U = U0;
  for (size_t k = 0; k < K; ++k) {
    VecT<S> v = U * da[k];
    S h = S(1) / S(nsub);
    for (int i = 0; i < nsub; ++i) geodesic_step(M, x, v, h, &U);
    xs[k + 1] = x;
    Us[k + 1] = U;
  }
}

// Small-displacement chart log by Newton, seeded with the chart difference.
template <class S>
VecT<S> log_map_small(const MetricT<S>& M, const VecT<S>& x, const VecT<S>& y,
                      int iters = 3, int nsub = 2) {
  int m = M.m;
  VecT<S> v = y - x;
  MatT<S> Gy;
  M.g(y, Gy);
  for (int it = 0; it < iters; ++it) {
    VecT<S> xe = x, ve = v;
    S h = S(1) / S(nsub);
    for (int i = 0; i < nsub; ++i) geodesic_step(M, xe, ve, h, (MatT<S>*)nullptr);
    VecT<S> F = xe - y;
    MatT<S> J(m, m);
    S hv = S(1e-7) * (1 + v.norm());
    for (int j = 0; j < m; ++j) {
      VecT<S> vp = v;
      vp[j] += hv;
      VecT<S> xp = x, vv = vp;
      for (int i = 0; i < nsub; ++i) geodesic_step(M, xp, vv, h, (MatT<S>*)nullptr);
      J.col(j) = (xp - xe) / hv;
    }
    v -= J.fullPivLu().solve(F);
  }
  return v;
}

// Parallel transport of the columns of W along a finely sampled path, each
// segment crossed along its connecting geodesic.
template <class S>
void transport_along(const MetricT<S>& M, const std::vector<VecT<S>>& pts, MatT<S>& W,
                     int nsub = 2) {
  S h = S(1) / S(nsub);
  for (size_t k = 0; k + 1 < pts.size(); ++k) {
    VecT<S> v = log_map_small(M, pts[k], pts[k + 1], 3, nsub);
    VecT<S> x = pts[k];
    for (int i = 0; i < nsub; ++i) geodesic_step(M, x, v, h, &W);
  }
}

// Recover driving increments and parallel frames from a path: da_k is the
// frame reading of the chart log between consecutive points.
template <class S>
void antidevelop(const MetricT<S>& M, const std::vector<VecT<S>>& xs, const MatT<S>& U0,
                 std::vector<VecT<S>>& da, std::vector<MatT<S>>& Us, int nsub = 2) {
  size_t K = xs.empty() ? 0 : xs.size() - 1;
  da.assign(K, VecT<S>());
  Us.assign(K + 1, U0);
  MatT<S> U = U0;
  for (size_t k = 0; k < K; ++k) {
    VecT<S> w = log_map_small(M, xs[k], xs[k + 1], 3, nsub);
    // pure-transport frames drift from orthonormality at the integrator-error
    // level, so invert exactly rather than via U^T g
    da[k] = U.partialPivLu().solve(w);
    VecT<S> x = xs[k], v = w;
    S h = S(1) / S(nsub);
    for (int i = 0; i < nsub; ++i) geodesic_step(M, x, v, h, &U);
    Us[k + 1] = U;
  }
}

}  // namespace lab
