#pragma once
#include <cmath>
#include <limits>
#include <memory>
#include <vector>
#include "lab/types.hpp"

namespace lab {

// Riemannian metric in a single chart. Models supply analytic first and
// second coordinate derivatives; everything downstream (Christoffel symbols,
// curvature, their variations) is exact up to rounding, which keeps the
// finite-difference cross checks in the tests honest.
template <class S>
struct MetricT {
  int m = 0;
  // set when the model is a space form; enables the closed-form curvature path
  double constant_curvature = std::numeric_limits<S>::quiet_NaN();
  // locally symmetric (covariantly constant curvature): nabla R terms vanish
  bool symmetric_space = false;

  virtual void g(const VecT<S>& x, MatT<S>& G) const = 0;
  virtual void dg(const VecT<S>& x, Ten3T<S>& D) const = 0;
  virtual void d2g(const VecT<S>& x, Ten4T<S>& D2) const = 0;
  virtual ~MetricT() = default;
};
using Metric = MetricT<double>;

template <class S>
S inner(const MetricT<S>& M, const VecT<S>& x, const VecT<S>& v, const VecT<S>& w) {
  MatT<S> G;
  M.g(x, G);
  return v.dot(G * w);
}

template <class S>
S norm(const MetricT<S>& M, const VecT<S>& x, const VecT<S>& v) {
  return std::sqrt(inner(M, x, v, v));
}

template <class S>
S sqrt_det_g(const MetricT<S>& M, const VecT<S>& x) {
  MatT<S> G;
  M.g(x, G);
  return std::sqrt(G.determinant());
}

template <class S>
struct EuclideanT : MetricT<S> {
  explicit EuclideanT(int dim) {
    this->m = dim;
    this->constant_curvature = 0;
    this->symmetric_space = true;
  }
  void g(const VecT<S>& x, MatT<S>& G) const override { G.setIdentity(this->m, this->m); }
  void dg(const VecT<S>& x, Ten3T<S>& D) const override { D.resize(this->m); }
  void d2g(const VecT<S>& x, Ten4T<S>& D2) const override { D2.resize(this->m); }
};
using Euclidean = EuclideanT<double>;

// Upper half space {x_m > 0}, g = dx^2 / x_m^2, curvature -1.
template <class S>
struct HyperbolicHalfSpaceT : MetricT<S> {
  explicit HyperbolicHalfSpaceT(int dim) {
    this->m = dim;
    this->constant_curvature = -1;
    this->symmetric_space = true;
  }
  void g(const VecT<S>& x, MatT<S>& G) const override {
    S y = x[this->m - 1];
    G.setZero(this->m, this->m);
    G.diagonal().setConstant(S(1) / (y * y));
  }
  void dg(const VecT<S>& x, Ten3T<S>& D) const override {
    D.resize(this->m);
    S y = x[this->m - 1];
    D[this->m - 1].diagonal().setConstant(S(-2) / (y * y * y));
  }
  void d2g(const VecT<S>& x, Ten4T<S>& D2) const override {
    D2.resize(this->m);
    S y = x[this->m - 1];
    int l = this->m - 1;
    D2[l][l].diagonal().setConstant(S(6) / (y * y * y * y));
  }
};
using HyperbolicHalfSpace = HyperbolicHalfSpaceT<double>;

// Unit disk, g = 4 dx^2 / (1-|x|^2)^2, curvature -1 (dimension 2 use).
template <class S>
struct PoincareDiskT : MetricT<S> {
  explicit PoincareDiskT(int dim = 2) {
    this->m = dim;
    this->constant_curvature = -1;
    this->symmetric_space = true;
  }
  void g(const VecT<S>& x, MatT<S>& G) const override {
    S c = S(1) - x.squaredNorm();
    G.setZero(this->m, this->m);
    G.diagonal().setConstant(S(4) / (c * c));
  }
  void dg(const VecT<S>& x, Ten3T<S>& D) const override {
    D.resize(this->m);
    S c = S(1) - x.squaredNorm();
    for (int k = 0; k < this->m; ++k)
      D[k].diagonal().setConstant(S(16) * x[k] / (c * c * c));
  }
  void d2g(const VecT<S>& x, Ten4T<S>& D2) const override {
    D2.resize(this->m);
    S c = S(1) - x.squaredNorm();
    for (int a = 0; a < this->m; ++a)
      for (int k = 0; k < this->m; ++k) {
        S val = S(16) * ((a == k ? S(1) : S(0)) / (c * c * c) +
                         S(6) * x[a] * x[k] / (c * c * c * c));
        D2[a][k].diagonal().setConstant(val);
      }
  }
};
using PoincareDisk = PoincareDiskT<double>;

// Smooth compactly supported bump A * exp(1/(q-1)), q = |x-c|^2/rho^2 < 1.
// Chart-coordinate radius; everything analytic, support strictly inside q = 1.
template <class S>
struct BumpProfileT {
  VecT<S> center;
  S rho = 1;
  S amp = 0;

  S value(const VecT<S>& x) const {
    S q = (x - center).squaredNorm() / (rho * rho);
    if (q >= S(1) - S(1.5e-3)) return 0;
    return amp * std::exp(S(1) / (q - S(1)));
  }
  void grad(const VecT<S>& x, VecT<S>& d) const {
    int m = int(x.size());
    d.setZero(m);
    S q = (x - center).squaredNorm() / (rho * rho);
    if (q >= S(1) - S(1.5e-3)) return;
    S f = amp * std::exp(S(1) / (q - S(1)));
    S dwdq = S(-1) / ((q - 1) * (q - 1));
    d = f * dwdq * S(2) / (rho * rho) * (x - center);
  }
  void hess(const VecT<S>& x, MatT<S>& H) const {
    int m = int(x.size());
    H.setZero(m, m);
    S q = (x - center).squaredNorm() / (rho * rho);
    if (q >= S(1) - S(1.5e-3)) return;
    S f = amp * std::exp(S(1) / (q - S(1)));
    S e1 = q - 1;
    S dw = S(-1) / (e1 * e1);
    S d2w = S(2) / (e1 * e1 * e1);
    VecT<S> dq = S(2) / (rho * rho) * (x - center);
    MatT<S> d2q = MatT<S>::Identity(m, m) * (S(2) / (rho * rho));
    // d2 f = f [ (dw dq)(dw dq)^T + d2w dq dq^T + dw d2q ]
    H = f * ((dw * dw + d2w) * (dq * dq.transpose()) + dw * d2q);
  }
};
using BumpProfile = BumpProfileT<double>;

// Scalar profile: constant plus a sum of bumps. Linear in its parameters, so
// metric curves can scale it by lambda.
template <class S>
struct ProfileT {
  S c0 = 0;
  std::vector<BumpProfileT<S>> bumps;

  S value(const VecT<S>& x) const {
    S v = c0;
    for (auto& b : bumps) v += b.value(x);
    return v;
  }
  void grad(const VecT<S>& x, VecT<S>& d) const {
    d.setZero(x.size());
    VecT<S> t;
    for (auto& b : bumps) { b.grad(x, t); d += t; }
  }
  void hess(const VecT<S>& x, MatT<S>& H) const {
    H.setZero(x.size(), x.size());
    MatT<S> t;
    for (auto& b : bumps) { b.hess(x, t); H += t; }
  }
  ProfileT scaled(S s) const {
    ProfileT out = *this;
    out.c0 *= s;
    for (auto& b : out.bumps) b.amp *= s;
    return out;
  }
};
using Profile = ProfileT<double>;

// g = exp(2 phi) * base.
template <class S>
struct ConformalMetricT : MetricT<S> {
  const MetricT<S>* base;
  ProfileT<S> phi;

  ConformalMetricT(const MetricT<S>* b, ProfileT<S> p) : base(b), phi(std::move(p)) {
    this->m = b->m;
  }
  void g(const VecT<S>& x, MatT<S>& G) const override {
    base->g(x, G);
    G *= std::exp(S(2) * phi.value(x));
  }
  void dg(const VecT<S>& x, Ten3T<S>& D) const override {
    MatT<S> B;
    base->g(x, B);
    base->dg(x, D);
    S e = std::exp(S(2) * phi.value(x));
    VecT<S> dp;
    phi.grad(x, dp);
    for (int k = 0; k < this->m; ++k) D[k] = e * (D[k] + S(2) * dp[k] * B);
  }
  void d2g(const VecT<S>& x, Ten4T<S>& D2) const override {
    MatT<S> B;
    Ten3T<S> dB;
    base->g(x, B);
    base->dg(x, dB);
    base->d2g(x, D2);
    S e = std::exp(S(2) * phi.value(x));
    VecT<S> dp;
    MatT<S> hp;
    phi.grad(x, dp);
    phi.hess(x, hp);
    for (int a = 0; a < this->m; ++a)
      for (int k = 0; k < this->m; ++k)
        D2[a][k] = e * (D2[a][k] + S(2) * dp[k] * dB[a] + S(2) * dp[a] * dB[k] +
                        (S(4) * dp[a] * dp[k] + S(2) * hp(a, k)) * B);
  }
};
using ConformalMetric = ConformalMetricT<double>;

// Symmetric 2-tensor field with analytic derivatives, for additive families.
template <class S>
struct SymTensorFieldT {
  virtual void eval(const VecT<S>& x, MatT<S>& T) const = 0;
  virtual void deriv(const VecT<S>& x, Ten3T<S>& D) const = 0;   // D[k] = d_k T
  virtual void deriv2(const VecT<S>& x, Ten4T<S>& D2) const = 0; // D2[a][k]
  virtual ~SymTensorFieldT() = default;
};
using SymTensorField = SymTensorFieldT<double>;

template <class S>
struct AdditiveMetricT : MetricT<S> {
  const MetricT<S>* base;
  const SymTensorFieldT<S>* tensor;
  S lam;
  AdditiveMetricT(const MetricT<S>* b, const SymTensorFieldT<S>* t, S l)
      : base(b), tensor(t), lam(l) {
    this->m = b->m;
  }
  void g(const VecT<S>& x, MatT<S>& G) const override {
    MatT<S> T;
    base->g(x, G);
    tensor->eval(x, T);
    G += lam * T;
  }
  void dg(const VecT<S>& x, Ten3T<S>& D) const override {
    Ten3T<S> DT;
    base->dg(x, D);
    tensor->deriv(x, DT);
    for (int k = 0; k < this->m; ++k) D[k] += lam * DT[k];
  }
  void d2g(const VecT<S>& x, Ten4T<S>& D2) const override {
    Ten4T<S> T2;
    base->d2g(x, D2);
    tensor->deriv2(x, T2);
    for (int a = 0; a < this->m; ++a)
      for (int k = 0; k < this->m; ++k) D2[a][k] += lam * T2[a][k];
  }
};
using AdditiveMetric = AdditiveMetricT<double>;

}  // namespace lab
