#pragma once
#include "lab/metric.hpp"

namespace lab {

// Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij), stored G[k](i,j).
template <class S>
void christoffel(const MetricT<S>& M, const VecT<S>& x, Ten3T<S>& Gam) {
  int m = M.m;
  MatT<S> G, Gi;
  Ten3T<S> D;
  M.g(x, G);
  M.dg(x, D);
  Gi = G.inverse();
  Gam.resize(m);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      VecT<S> w(m);
      for (int l = 0; l < m; ++l) w[l] = D[i](j, l) + D[j](i, l) - D[l](i, j);
      VecT<S> gk = S(0.5) * (Gi * w);
      for (int k = 0; k < m; ++k) {
        Gam[k](i, j) = gk[k];
        Gam[k](j, i) = gk[k];
      }
    }
}

// dGam[a][k](i,j) = d_a Gamma^k_ij, from analytic first and second metric
// derivatives (d_a g^kl = -g^kp (d_a g_pq) g^ql).
template <class S>
void dchristoffel(const MetricT<S>& M, const VecT<S>& x, Ten4T<S>& dGam) {
  int m = M.m;
  MatT<S> G, Gi;
  Ten3T<S> D;
  Ten4T<S> D2;
  M.g(x, G);
  M.dg(x, D);
  M.d2g(x, D2);
  Gi = G.inverse();
  dGam.resize(m);
  std::array<MatT<S>, MaxDim> dGi;
  for (int a = 0; a < m; ++a) dGi[a] = -Gi * D[a] * Gi;
  for (int a = 0; a < m; ++a)
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        VecT<S> w(m), dw(m);
        for (int l = 0; l < m; ++l) {
          w[l] = D[i](j, l) + D[j](i, l) - D[l](i, j);
          dw[l] = D2[a][i](j, l) + D2[a][j](i, l) - D2[a][l](i, j);
        }
        VecT<S> gk = S(0.5) * (dGi[a] * w + Gi * dw);
        for (int k = 0; k < m; ++k) {
          dGam[a][k](i, j) = gk[k];
          dGam[a][k](j, i) = gk[k];
        }
      }
}

// R[i][j](l,k) = R^l_kij = d_i Gam^l_jk - d_j Gam^l_ik
//              + Gam^l_is Gam^s_jk - Gam^l_js Gam^s_ik.
template <class S>
void curvature(const MetricT<S>& M, const VecT<S>& x, Ten4T<S>& R) {
  int m = M.m;
  Ten3T<S> Gam;
  Ten4T<S> dGam;
  christoffel(M, x, Gam);
  dchristoffel(M, x, dGam);
  // Gm[i](l,k) = Gamma^l_ik, dGm[a][i](l,k) = d_a Gamma^l_ik
  std::array<MatT<S>, MaxDim> Gm;
  for (int i = 0; i < m; ++i) {
    Gm[i].resize(m, m);
    for (int l = 0; l < m; ++l)
      for (int k = 0; k < m; ++k) Gm[i](l, k) = Gam[l](i, k);
  }
  R.resize(m);
  MatT<S> dIJ(m, m), dJI(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      for (int l = 0; l < m; ++l)
        for (int k = 0; k < m; ++k) {
          dIJ(l, k) = dGam[i][l](j, k);
          dJI(l, k) = dGam[j][l](i, k);
        }
      R[i][j] = dIJ - dJI + Gm[i] * Gm[j] - Gm[j] * Gm[i];
    }
}

// Point-local curvature evaluator; uses the space-form closed form
// R(X,Y)Z = K(<Y,Z> X - <X,Z> Y) when the model declares constant curvature.
template <class S>
struct CurvatureAt {
  int m = 0;
  bool space_form = false;
  S K = 0;
  MatT<S> G;   // metric at the point (space-form path)
  Ten4T<S> R;  // full tensor otherwise

  VecT<S> apply(const VecT<S>& X, const VecT<S>& Y, const VecT<S>& Z) const {
    if (space_form)
      return K * (Y.dot(G * Z) * X - X.dot(G * Z) * Y);
    VecT<S> out = VecT<S>::Zero(m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        S c = X[i] * Y[j];
        if (c != S(0)) out += c * (R[i][j] * Z);
      }
    return out;
  }
};

template <class S>
CurvatureAt<S> curvature_at(const MetricT<S>& M, const VecT<S>& x) {
  CurvatureAt<S> C;
  C.m = M.m;
  if (!std::isnan(M.constant_curvature)) {
    C.space_form = true;
    C.K = M.constant_curvature;
    M.g(x, C.G);
  } else {
    curvature(M, x, C.R);
    M.g(x, C.G);
  }
  return C;
}

template <class S>
S sectional(const MetricT<S>& M, const VecT<S>& x, const VecT<S>& X, const VecT<S>& Y) {
  auto C = curvature_at(M, x);
  MatT<S> G;
  M.g(x, G);
  S num = X.dot(G * C.apply(X, Y, Y));
  S den = X.dot(G * X) * Y.dot(G * Y) - std::pow(X.dot(G * Y), 2);
  return num / den;
}

// Frame-conjugated Ricci transform A with A z = sum_i u^-1 R(u e_i, u z) u e_i.
// Equals +(m-1) Id on curvature -1 space forms under this sign convention.
template <class S>
MatT<S> ric_op_frame(const MetricT<S>& M, const VecT<S>& x, const MatT<S>& U) {
  int m = M.m;
  auto C = curvature_at(M, x);
  MatT<S> Ui = U.transpose() * C.G, A(m, m);  // u^-1 = u^T g, u orthonormal
  for (int b = 0; b < m; ++b) {
    VecT<S> acc = VecT<S>::Zero(m);
    for (int i = 0; i < m; ++i)
      acc += C.apply(U.col(i), U.col(b), U.col(i));
    A.col(b) = Ui * acc;
  }
  return A;
}

// Covariant derivative of the curvature tensor in direction index a,
// (nabla_a R)^l_kij; coordinate derivative by central differences plus the
// four connection corrections. Identically zero on locally symmetric models.
template <class S>
void nabla_curvature_fd(const MetricT<S>& M, const VecT<S>& x, int a, Ten4T<S>& NR,
                        S h = S(1e-5)) {
  int m = M.m;
  Ten4T<S> Rp, Rm, R0;
  VecT<S> xp = x, xm = x;
  xp[a] += h;
  xm[a] -= h;
  curvature(M, xp, Rp);
  curvature(M, xm, Rm);
  curvature(M, x, R0);
  Ten3T<S> Gam;
  christoffel(M, x, Gam);
  NR.resize(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int l = 0; l < m; ++l)
        for (int k = 0; k < m; ++k) {
          S v = (Rp[i][j](l, k) - Rm[i][j](l, k)) / (2 * h);
          for (int s = 0; s < m; ++s) {
            v += Gam[l](a, s) * R0[i][j](s, k);
            v -= Gam[s](a, k) * R0[i][j](l, s);
            v -= Gam[s](a, i) * R0[s][j](l, k);
            v -= Gam[s](a, j) * R0[i][s](l, k);
          }
          NR[i][j](l, k) = v;
        }
}

// Gradient of a scalar with known partials: grad = g^-1 df.
template <class S>
VecT<S> sharp(const MetricT<S>& M, const VecT<S>& x, const VecT<S>& df) {
  MatT<S> G;
  M.g(x, G);
  return G.inverse() * df;
}

// Divergence (1/sqrt g) d_i (sqrt g W^i) of a vector field given as a callable,
// central differences with step h.
template <class S, class F>
S divergence_fd(const MetricT<S>& M, const VecT<S>& x, F&& W, S h = S(1e-4)) {
  int m = M.m;
  S acc = 0;
  for (int i = 0; i < m; ++i) {
    VecT<S> xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    acc += (sqrt_det_g(M, xp) * W(xp)[i] - sqrt_det_g(M, xm) * W(xm)[i]) / (2 * h);
  }
  return acc / sqrt_det_g(M, x);
}

}  // namespace lab
