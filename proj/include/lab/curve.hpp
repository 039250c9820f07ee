#pragma once
#include <memory>
#include "lab/christoffel.hpp"
#include "lab/metric.hpp"

namespace lab {

// One-parameter metric family lambda -> g^lambda with tangent
// X = d/dlambda g^lambda at 0. Families are exact: X and dX are the analytic
// lambda derivatives of whatever at() returns, never hand-picked multiples.
template <class S>
struct MetricCurveT {
  virtual const MetricT<S>& base() const = 0;
  virtual std::unique_ptr<MetricT<S>> at(S lam) const = 0;
  virtual void X(const VecT<S>& x, MatT<S>& Xab) const = 0;
  virtual void dX(const VecT<S>& x, Ten3T<S>& D) const = 0;  // D[k] = d_k X
  virtual ~MetricCurveT() = default;
};
using MetricCurve = MetricCurveT<double>;

// g^lambda = exp(2 lambda phi) g0, X = 2 phi g0. A constant phi (profile c0)
// is the global rescaling family.
template <class S>
struct ConformalCurveT : MetricCurveT<S> {
  const MetricT<S>* b;
  ProfileT<S> phi;
  ConformalCurveT(const MetricT<S>* base_, ProfileT<S> p) : b(base_), phi(std::move(p)) {}
  const MetricT<S>& base() const override { return *b; }
  std::unique_ptr<MetricT<S>> at(S lam) const override {
    return std::make_unique<ConformalMetricT<S>>(b, phi.scaled(lam));
  }
  void X(const VecT<S>& x, MatT<S>& Xab) const override {
    b->g(x, Xab);
    Xab *= S(2) * phi.value(x);
  }
  void dX(const VecT<S>& x, Ten3T<S>& D) const override {
    MatT<S> G;
    b->g(x, G);
    b->dg(x, D);
    S p = phi.value(x);
    VecT<S> dp;
    phi.grad(x, dp);
    for (int k = 0; k < b->m; ++k) D[k] = S(2) * (p * D[k] + dp[k] * G);
  }
};
using ConformalCurve = ConformalCurveT<double>;

// g^lambda = g0 + lambda T, X = T.
template <class S>
struct AdditiveCurveT : MetricCurveT<S> {
  const MetricT<S>* b;
  const SymTensorFieldT<S>* field;
  AdditiveCurveT(const MetricT<S>* base_, const SymTensorFieldT<S>* f) : b(base_), field(f) {}
  const MetricT<S>& base() const override { return *b; }
  std::unique_ptr<MetricT<S>> at(S lam) const override {
    return std::make_unique<AdditiveMetricT<S>>(b, field, lam);
  }
  void X(const VecT<S>& x, MatT<S>& Xab) const override { field->eval(x, Xab); }
  void dX(const VecT<S>& x, Ten3T<S>& D) const override { field->deriv(x, D); }
};
using AdditiveCurve = AdditiveCurveT<double>;

// T_ij(x) = psi(x) C_ij with psi a bump and C constant symmetric. In a
// conformal chart (g ~ f^2 delta) the g-trace is proportional to tr C, so
// tr C = 0 gives pointwise volume-preserving directions.
template <class S>
struct BumpTensorFieldT : SymTensorFieldT<S> {
  BumpProfileT<S> psi;
  MatT<S> C;
  void eval(const VecT<S>& x, MatT<S>& T) const override { T = psi.value(x) * C; }
  void deriv(const VecT<S>& x, Ten3T<S>& D) const override {
    int m = int(x.size());
    D.resize(m);
    VecT<S> d;
    psi.grad(x, d);
    for (int k = 0; k < m; ++k) D[k] = d[k] * C;
  }
  void deriv2(const VecT<S>& x, Ten4T<S>& D2) const override {
    int m = int(x.size());
    D2.resize(m);
    MatT<S> H;
    psi.hess(x, H);
    for (int a = 0; a < m; ++a)
      for (int k = 0; k < m; ++k) D2[a][k] = H(a, k) * C;
  }
};
using BumpTensorField = BumpTensorFieldT<double>;

// First variation of the Levi-Civita connection along the curve:
// dGamma^k_ij = 1/2 g^kl (nab_i X_jl + nab_j X_il - nab_l X_ij),
// with nab the base connection. Stored like christoffel: out[k](i,j).
template <class S>
void christoffel_variation(const MetricCurveT<S>& curve, const VecT<S>& x, Ten3T<S>& out) {
  const MetricT<S>& M = curve.base();
  int m = M.m;
  MatT<S> G, Gi, Xab;
  Ten3T<S> dXp, Gam, NX;
  M.g(x, G);
  Gi = G.inverse();
  curve.X(x, Xab);
  curve.dX(x, dXp);
  christoffel(M, x, Gam);
  // NX[a] = covariant derivative nab_a X as a matrix in (i,j)
  NX.resize(m);
  for (int a = 0; a < m; ++a) {
    NX[a] = dXp[a];
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int s = 0; s < m; ++s)
          NX[a](i, j) -= Gam[s](a, i) * Xab(s, j) + Gam[s](a, j) * Xab(i, s);
  }
  out.resize(m);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      VecT<S> w(m);
      for (int l = 0; l < m; ++l) w[l] = NX[i](j, l) + NX[j](i, l) - NX[l](i, j);
      VecT<S> gk = S(0.5) * (Gi * w);
      for (int k = 0; k < m; ++k) {
        out[k](i, j) = gk[k];
        out[k](j, i) = gk[k];
      }
    }
}

// g-trace of the curve tangent and its coordinate partials.
template <class S>
S trace_X(const MetricCurveT<S>& curve, const VecT<S>& x) {
  MatT<S> G, Xab;
  curve.base().g(x, G);
  curve.X(x, Xab);
  return (G.inverse() * Xab).trace();
}

template <class S>
VecT<S> trace_X_partials(const MetricCurveT<S>& curve, const VecT<S>& x) {
  const MetricT<S>& M = curve.base();
  int m = M.m;
  MatT<S> G, Gi, Xab;
  Ten3T<S> D, dXp;
  M.g(x, G);
  M.dg(x, D);
  Gi = G.inverse();
  curve.X(x, Xab);
  curve.dX(x, dXp);
  VecT<S> out(m);
  for (int a = 0; a < m; ++a) {
    MatT<S> dGi = -Gi * D[a] * Gi;
    out[a] = (dGi * Xab).trace() + (Gi * dXp[a]).trace();
  }
  return out;
}

}  // namespace lab
