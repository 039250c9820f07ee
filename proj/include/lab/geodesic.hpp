#pragma once
#include "lab/christoffel.hpp"

namespace lab {

// ddot x^k = -Gamma^k_ij xdot^i xdot^j; transported columns obey
// wdot^k = -Gamma^k_ij xdot^i w^j. One fused RK4 step for (x, v, W).
template <class S>
void gamma_contract(const Ten3T<S>& Gam, const VecT<S>& v, const VecT<S>& w, VecT<S>& out) {
  int m = Gam.m;
  out.resize(m);
  for (int k = 0; k < m; ++k) out[k] = -v.dot(Gam[k] * w);
}

namespace detail {
template <class S>
struct GeoDeriv {
  VecT<S> dx, dv;
  MatT<S> dW;
};

template <class S>
void geo_rhs(const MetricT<S>& M, const VecT<S>& x, const VecT<S>& v, const MatT<S>* W,
             GeoDeriv<S>& d) {
  Ten3T<S> Gam;
  christoffel(M, x, Gam);
  d.dx = v;
  gamma_contract(Gam, v, v, d.dv);
  if (W) {
    int m = M.m, c = int(W->cols());
    d.dW.resize(m, c);
    VecT<S> t;
    for (int j = 0; j < c; ++j) {
      gamma_contract(Gam, v, VecT<S>(W->col(j)), t);
      d.dW.col(j) = t;
    }
  }
}
}  // namespace detail

template <class S>
void geodesic_step(const MetricT<S>& M, VecT<S>& x, VecT<S>& v, S h, MatT<S>* W = nullptr) {
  using detail::GeoDeriv;
  GeoDeriv<S> k1, k2, k3, k4;
  detail::geo_rhs(M, x, v, W, k1);
  VecT<S> x2 = x + (h / 2) * k1.dx, v2 = v + (h / 2) * k1.dv;
  MatT<S> W2;
  if (W) W2 = *W + (h / 2) * k1.dW;
  detail::geo_rhs(M, x2, v2, W ? &W2 : nullptr, k2);
  VecT<S> x3 = x + (h / 2) * k2.dx, v3 = v + (h / 2) * k2.dv;
  MatT<S> W3;
  if (W) W3 = *W + (h / 2) * k2.dW;
  detail::geo_rhs(M, x3, v3, W ? &W3 : nullptr, k3);
  VecT<S> x4 = x + h * k3.dx, v4 = v + h * k3.dv;
  MatT<S> W4;
  if (W) W4 = *W + h * k3.dW;
  detail::geo_rhs(M, x4, v4, W ? &W4 : nullptr, k4);
  x += (h / 6) * (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx);
  v += (h / 6) * (k1.dv + 2 * k2.dv + 2 * k3.dv + k4.dv);
  if (W) *W += (h / 6) * (k1.dW + 2 * k2.dW + 2 * k3.dW + k4.dW);
}

// exp_x(v), integrating unit parameter in substeps of arc length ~ h_arc.
// Optionally parallel-transports the columns of W along the same geodesic.
template <class S>
void exp_map(const MetricT<S>& M, VecT<S>& x, VecT<S> v, MatT<S>* W = nullptr,
             S h_arc = S(0.01)) {
  S len = norm(M, x, v);
  int n = std::max(1, int(std::ceil(len / h_arc)));
  S h = S(1) / S(n);
  for (int i = 0; i < n; ++i) geodesic_step(M, x, v, h, W);
}

// Unit-speed geodesic carrying a parallel orthonormal frame whose first
// column is the velocity. r_jac() is the normal-bundle curvature block
// (R_jac)_ab = <R(E_a, v) v, E_b>, indices 1..m-1.
template <class S>
struct GeodesicOrbitT {
  const MetricT<S>* M = nullptr;
  VecT<S> x;
  MatT<S> E;  // E.col(0) = velocity
  int steps_since_norm = 0;

  void init(const MetricT<S>& metric, const VecT<S>& x0, const VecT<S>& dir,
            const MatT<S>* seed = nullptr) {
    M = &metric;
    x = x0;
    int m = metric.m;
    MatT<S> B(m, m);
    if (seed) B = *seed;
    else B.setIdentity();
    B.col(0) = dir;
    // Gram-Schmidt in g(x): first column becomes the unit velocity
    MatT<S> G;
    metric.g(x, G);
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < j; ++i) B.col(j) -= B.col(i).dot(G * B.col(j)) * B.col(i);
      S n2 = B.col(j).dot(G * B.col(j));
      for (int a = 0; a < m && n2 < S(1e-12); ++a) {
        // degenerate seed: try coordinate axes until one survives projection
        B.col(j).setZero();
        B.col(j)[a] = 1;
        for (int i = 0; i < j; ++i) B.col(j) -= B.col(i).dot(G * B.col(j)) * B.col(i);
        n2 = B.col(j).dot(G * B.col(j));
      }
      B.col(j) /= std::sqrt(n2);
    }
    E = B;
  }

  void step(S h) {
    VecT<S> v = E.col(0);
    MatT<S> rest = E.rightCols(E.cols() - 1);
    geodesic_step(*M, x, v, h, &rest);
    E.col(0) = v;
    E.rightCols(E.cols() - 1) = rest;
    if (++steps_since_norm >= 256) {
      renormalize();
      steps_since_norm = 0;
    }
  }

  void renormalize() {
    MatT<S> G;
    M->g(x, G);
    for (int j = 0; j < E.cols(); ++j) {
      for (int i = 0; i < j; ++i) E.col(j) -= E.col(i).dot(G * E.col(j)) * E.col(i);
      E.col(j) /= std::sqrt(E.col(j).dot(G * E.col(j)));
    }
  }

  MatT<S> r_jac() const {
    int m = M->m;
    auto C = curvature_at(*M, x);
    MatT<S> G;
    M->g(x, G);
    MatT<S> R(m - 1, m - 1);
    VecT<S> v = E.col(0);
    for (int a = 1; a < m; ++a) {
      VecT<S> Rv = C.apply(VecT<S>(E.col(a)), v, v);
      for (int b = 1; b < m; ++b) R(a - 1, b - 1) = Rv.dot(G * E.col(b));
    }
    return R;
  }
};
using GeodesicOrbit = GeodesicOrbitT<double>;

}  // namespace lab
