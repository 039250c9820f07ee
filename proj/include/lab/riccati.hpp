#pragma once
#include <vector>
#include "lab/geodesic.hpp"

namespace lab {

// Stable tensor along a unit-speed geodesic with horizon at distance s: the
// second fundamental form U(t) of spheres centered at gamma(s), continued to
// t = 0. U solves U' + U^2 + R_jac = 0 with a pole at the horizon, so we
// integrate the inverse W = U^-1 instead:
//     W' = I + W R_jac(t) W,  W(s - eps) = -eps I,
// which is smooth, tanh-like and stays negative definite. The epsilon cap
// biases U(0) by O(eps^3).
template <class S>
struct StableTensorResult {
  MatT<S> U0;       // stable tensor at the base point, normal-bundle block
  MatT<S> W0;       // its inverse
  S div_spray = 0;  // trace U0 = divergence of the radial field toward gamma(s)
  std::vector<MatT<S>> W_path;  // W at the coarse grid times t_k = k h (t0 first)
};

template <class S>
StableTensorResult<S> stable_tensor(const MetricT<S>& M, const VecT<S>& x0,
                                    const VecT<S>& dir, S s, S eps = S(1e-3),
                                    S h = S(1e-3), bool keep_path = false) {
  int m = M.m;
  int n = std::max(1, int(std::ceil((s - eps) / h)));
  h = (s - eps) / S(n);

  // curvature blocks R_jac(t) on the half grid t = j h/2, j = 0..2n
  GeodesicOrbitT<S> orb;
  orb.init(M, x0, dir);
  std::vector<MatT<S>> R(2 * n + 1);
  R[0] = orb.r_jac();
  for (int j = 1; j <= 2 * n; ++j) {
    orb.step(h / 2);
    R[j] = orb.r_jac();
  }

  StableTensorResult<S> res;
  if (keep_path) res.W_path.assign(n + 1, MatT<S>());
  MatT<S> W = -eps * MatT<S>::Identity(m - 1, m - 1);
  MatT<S> I = MatT<S>::Identity(m - 1, m - 1);
  auto rhs = [&](const MatT<S>& Wv, int half_idx) { return MatT<S>(I + Wv * R[half_idx] * Wv); };
  if (keep_path) res.W_path[n] = W;
  for (int k = n; k > 0; --k) {
    // backward RK4 from t_k to t_{k-1}; R indices on the half grid
    int j2 = 2 * k, j1 = 2 * k - 1, j0 = 2 * k - 2;
    MatT<S> k1 = rhs(W, j2);
    MatT<S> k2 = rhs(MatT<S>(W - (h / 2) * k1), j1);
    MatT<S> k3 = rhs(MatT<S>(W - (h / 2) * k2), j1);
    MatT<S> k4 = rhs(MatT<S>(W - h * k3), j0);
    W -= (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    if (keep_path) res.W_path[k - 1] = W;
  }
  res.W0 = W;
  res.U0 = W.inverse();
  res.div_spray = res.U0.trace();
  return res;
}

// Differential of the geodesic flow on (J, J') pairs in a parallel normal
// frame: the fundamental solution of the Jacobi system
//     J'  = J',   J'' = -R_jac(t) J
// over [0, s], a 2(m-1) square matrix acting on stacked (J(0), J'(0)).
// Negative s integrates along the geodesic continued backward. Optional
// out-params return the endpoint of the geodesic, so segment maps compose.
template <class S>
MatT<S> geodesic_flow_tangent(const MetricT<S>& M, const VecT<S>& x0, const VecT<S>& dir,
                              S s, S h = S(1e-3), VecT<S>* x_end = nullptr,
                              VecT<S>* v_end = nullptr) {
  int p = M.m - 1;
  S sgn = s < 0 ? S(-1) : S(1);
  S L = sgn * s;
  int n = std::max(1, int(std::ceil(L / h)));
  h = L / S(n);

  GeodesicOrbitT<S> orb;
  orb.init(M, x0, dir);
  std::vector<MatT<S>> A(2 * n + 1);
  auto block = [&](MatT<S>& a) {
    // in arc-length tau = sgn t the system reads d/dtau (J, J') = sgn A (J, J')
    a.setZero(2 * p, 2 * p);
    a.topRightCorner(p, p) = sgn * MatT<S>::Identity(p, p);
    a.bottomLeftCorner(p, p) = -sgn * orb.r_jac();
  };
  block(A[0]);
  for (int j = 1; j <= 2 * n; ++j) {
    orb.step(sgn * h / 2);
    block(A[j]);
  }
  if (x_end) *x_end = orb.x;
  if (v_end) *v_end = orb.E.col(0);

  MatT<S> Y = MatT<S>::Identity(2 * p, 2 * p);
  for (int k = 0; k < n; ++k) {
    int j0 = 2 * k, j1 = 2 * k + 1, j2 = 2 * k + 2;
    MatT<S> k1 = A[j0] * Y;
    MatT<S> k2 = A[j1] * (Y + (h / 2) * k1);
    MatT<S> k3 = A[j1] * (Y + (h / 2) * k2);
    MatT<S> k4 = A[j2] * (Y + h * k3);
    Y += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return Y;
}

// Divergence of the Busemann-directed unit field at x (direction dir toward
// the boundary point): the horizon limit of the stable tensor trace. coth
// converges like e^{-2s}, so s = 40 puts the truncation far below 1e-10.
template <class S>
S busemann_field_divergence(const MetricT<S>& M, const VecT<S>& x, const VecT<S>& dir,
                            S s = S(40), S h = S(1e-3)) {
  return stable_tensor(M, x, dir, s, S(1e-3), h).div_spray;
}

}  // namespace lab
