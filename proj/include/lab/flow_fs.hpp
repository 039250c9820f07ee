#pragma once
#include <functional>
#include <vector>
#include "lab/frame.hpp"
#include "lab/tangent_flow.hpp"

namespace lab {

// Smooth vector field on the model, chart components.
struct VectorField {
  std::function<Vec(const Vec&)> eval;
};

// C1 time profile with value 1 at 0 and 0 at T, shaping how far along the
// path the start-point motion is carried before it is damped out.
struct ScalingFn {
  std::function<double(double)> value, deriv;
  static ScalingFn cubic(double T) {
    ScalingFn f;
    f.value = [T](double t) {
      double u = t / T;
      return (1 - u) * (1 - u) * (1 + 2 * u);
    };
    f.deriv = [T](double t) {
      double u = t / T;
      return -6 * u * (1 - u) / T;
    };
    return f;
  }
};

// Integral curve of the field with a parallel frame: dx/ds = V(x) and the
// columns transported, RK4 in nsub substeps. Arrival frame is
// re-orthonormalized.
inline void field_frame_transport(const Metric& M, Vec& x, Mat& E, const VectorField& V,
                                  double s, int nsub = 8) {
  int m = M.m;
  double h = s / nsub;
  auto rhs = [&](const Vec& xa, const Mat& Ea, Vec& dx, Mat& dE) {
    Ten3 Gam;
    christoffel(M, xa, Gam);
    dx = V.eval(xa);
    dE.resize(m, m);
    Vec t;
    for (int j = 0; j < m; ++j) {
      gamma_contract(Gam, dx, Vec(Ea.col(j)), t);
      dE.col(j) = t;
    }
  };
  for (int i = 0; i < nsub; ++i) {
    Vec k1x, k2x, k3x, k4x;
    Mat k1e, k2e, k3e, k4e;
    rhs(x, E, k1x, k1e);
    rhs(Vec(x + 0.5 * h * k1x), Mat(E + 0.5 * h * k1e), k2x, k2e);
    rhs(Vec(x + 0.5 * h * k2x), Mat(E + 0.5 * h * k2e), k3x, k3e);
    rhs(Vec(x + h * k3x), Mat(E + h * k3e), k4x, k4e);
    x += (h / 6) * (k1x + 2 * k2x + 2 * k3x + k4x);
    E += (h / 6) * (k1e + 2 * k2e + 2 * k3e + k4e);
  }
  E = mgs_frame(M, x, E);
}

struct FlowOptions {
  double s = 0.1;       // flow parameter
  int sweeps = 6;       // fixed-point sweeps
  double ds_max = 0.025;  // flow-parameter step bound
  int nsub = 2;         // geodesic substeps inside developments
  bool auto_halve = true;
  int max_halvings = 3;
};

struct FlowResult {
  double s_eff = 0;  // after any halving
  std::vector<double> sweep_dist;  // successive-iterate distances
  bool contracted = true;          // factor >= 2 per sweep beyond sweep 3
  // processes at the full flow parameter, one entry per time increment
  std::vector<Mat> O;    // rotation part, K entries
  std::vector<Vec> g;    // drift part, K entries
  std::vector<Vec> inc;  // increments of the transported noise, K entries
  std::vector<Vec> y;    // development of those increments, K+1 points
  Vec y0;                // moved start point
  Mat U0s;               // transported start frame
};

namespace detail_flow {

// curvature pairing in frame coordinates at one path node; space forms get
// the position-free closed form K (a b^T - b a^T)
struct CurvPack {
  bool space_form;
  double K;
  const Metric* M;
  Mat theta(const Vec& x, const Mat& U, const Vec& a, const Vec& b) const {
    if (space_form) return K * (a * b.transpose() - b * a.transpose());
    return flow_coeff(*M, x, U, a, b);
  }
};

// 2x2-and-up Cayley map of (minus) an antisymmetric matrix; exactly
// orthogonal for antisymmetric input
inline Mat cayley(const Mat& A) {
  int m = int(A.rows());
  Mat I = Mat::Identity(m, m);
  return (I - 0.5 * A).partialPivLu().solve(I + 0.5 * A);
}

}  // namespace detail_flow

// Moves Brownian paths along the field: the start point slides with the flow
// of V while the endpoint stays put, and the transported noise stays a
// Brownian motion up to an explicit drift. Solved as a fixed point of the
// rotation/drift system in the flow parameter, one curvature accumulator per
// parameter node, and the development re-run each sweep.
inline FlowResult picard_flow_fs(const Metric& M, const VectorField& V,
                                 const ScalingFn& sf, const Vec& y_start, const Mat& U0,
                                 const std::vector<Vec>& dB, double dt,
                                 const FlowOptions& opt) {
  int m = M.m;
  int K = int(dB.size());
  FlowResult res;
  detail_flow::CurvPack cp{!std::isnan(M.constant_curvature), M.constant_curvature, &M};

  auto develop_primal = [&]() {
    res.y.assign(K + 1, y_start);
    Vec x = y_start;
    Mat U = U0;
    for (int k = 0; k < K; ++k) {
      bm_step(M, x, U, dB[k], opt.nsub);
      res.y[k + 1] = x;
    }
  };
  if (opt.s == 0) {
    res.s_eff = 0;
    res.O.assign(K, Mat::Identity(m, m));
    res.g.assign(K, Vec::Zero(m));
    res.inc = dB;
    res.y0 = y_start;
    res.U0s = U0;
    develop_primal();
    return res;
  }

  for (int attempt = 0;; ++attempt) {
    double s = opt.s / double(1 << attempt);
    int Q = std::max(1, int(std::ceil(std::abs(s) / opt.ds_max)));
    double ds = s / Q;

    // base curve: start points and transported frames at the parameter nodes
    std::vector<Vec> xq(Q + 1, y_start);
    std::vector<Mat> U0q(Q + 1, U0);
    std::vector<Vec> vq(Q + 1);  // field at the start, frame coordinates
    for (int q = 0; q <= Q; ++q) {
      if (q > 0) {
        xq[q] = xq[q - 1];
        U0q[q] = U0q[q - 1];
        field_frame_transport(M, xq[q], U0q[q], V, ds);
      }
      Mat G;
      M.g(xq[q], G);
      vq[q] = U0q[q].transpose() * G * V.eval(xq[q]);
    }

    // iterate state: O, g per (parameter node, time increment); the rotation
    // couples to each increment through the interval average of the
    // accumulator, which tracks the transported noise pathwise (a left-point
    // product with a curvature-drift make-up term wanders from the true flow
    // at the square root of the time step)
    std::vector<std::vector<Mat>> O(Q + 1, std::vector<Mat>(K, Mat::Identity(m, m)));
    std::vector<std::vector<Vec>> g(Q + 1, std::vector<Vec>(K, Vec::Zero(m)));
    std::vector<std::vector<Vec>> inc(Q + 1, dB);
    std::vector<std::vector<Mat>> Kacc(Q + 1, std::vector<Mat>(K + 1));
    std::vector<std::vector<Vec>> Rv(Q + 1, std::vector<Vec>(K));

    res.sweep_dist.assign(opt.sweeps, 0.0);
    for (int n = 0; n < opt.sweeps; ++n) {
      // develop the previous iterate at every parameter node; accumulate the
      // curvature pairing (midpoint rule) and the drift source along the way
      for (int q = 0; q <= Q; ++q) {
        Vec x = xq[q];
        Mat U = U0q[q];
        Mat Kmat = Mat::Zero(m, m);
        Kacc[q][0] = Kmat;
        for (int k = 0; k < K; ++k) {
          const Vec& da = inc[q][k];
          Mat A0 = sf.value(k * dt) * cp.theta(x, U, da, vq[q]);
          bm_step(M, x, U, da, opt.nsub);
          Mat A1 = sf.value((k + 1) * dt) * cp.theta(x, U, da, vq[q]);
          Kmat += 0.5 * (A0 + A1);
          Kmat = 0.5 * (Kmat - Kmat.transpose().eval());
          Kacc[q][k + 1] = Kmat;
          Rv[q][k] = sf.deriv((k + 0.5) * dt) * vq[q];
        }
      }
      // parameter sweep at each time increment: rotation by Cayley steps of
      // the averaged accumulator, drift by the variation-of-constants integral
      double dist = 0;
      for (int k = 0; k < K; ++k) {
        Mat Ocur = Mat::Identity(m, m);
        Vec J = Vec::Zero(m);
        for (int q = 0; q <= Q; ++q) {
          if (q > 0) {
            Mat Kbar = 0.25 * (Kacc[q - 1][k] + Kacc[q - 1][k + 1] +
                               Kacc[q][k] + Kacc[q][k + 1]);
            Mat Onew = detail_flow::cayley(Mat(-ds * Kbar)) * Ocur;
            J += 0.5 * ds *
                 (Ocur.transpose() * Rv[q - 1][k] + Onew.transpose() * Rv[q][k]);
            Ocur = Onew;
          }
          Vec gnew = Ocur * J;
          if (q == Q) {
            dist = std::max(dist, (Ocur - O[q][k]).norm());
            dist = std::max(dist, (gnew - g[q][k]).norm());
          }
          O[q][k] = Ocur;
          g[q][k] = gnew;
        }
      }
      for (int q = 0; q <= Q; ++q)
        for (int k = 0; k < K; ++k) inc[q][k] = O[q][k] * dB[k] + g[q][k] * dt;
      res.sweep_dist[n] = dist;
    }
    res.contracted = true;
    for (size_t n = 3; n + 1 < res.sweep_dist.size(); ++n)
      if (res.sweep_dist[n + 1] > 0.5 * res.sweep_dist[n] + 1e-300)
        res.contracted = false;
    if (!res.contracted && opt.auto_halve && attempt < opt.max_halvings) continue;

    res.s_eff = s;
    res.O = O[Q];
    res.g = g[Q];
    res.inc = inc[Q];
    res.y0 = xq[Q];
    res.U0s = U0q[Q];
    res.y.assign(K + 1, res.y0);
    Vec x = res.y0;
    Mat U = res.U0s;
    for (int k = 0; k < K; ++k) {
      bm_step(M, x, U, res.inc[k], opt.nsub);
      res.y[k + 1] = x;
    }
    return res;
  }
}

// Density of the moved path law against the base Wiener law: the drift of
// the full-parameter iterate, evaluated on the backward-moved noise, paired
// against the original increments. Unit mean over Brownian draws.
inline double flow_log_density(const Metric& M, const VectorField& V, const ScalingFn& sf,
                               const Vec& y_start, const Mat& U0,
                               const std::vector<Vec>& dB, double dt,
                               const FlowOptions& opt) {
  if (opt.s == 0) return 0.0;
  FlowOptions ob = opt;
  ob.auto_halve = false;
  ob.s = -opt.s;
  FlowResult back = picard_flow_fs(M, V, sf, y_start, U0, dB, dt, ob);
  ob.s = opt.s;
  FlowResult fwd = picard_flow_fs(M, V, sf, y_start, U0, back.inc, dt, ob);
  double acc = 0;
  int K = int(dB.size());
  for (int k = 0; k < K; ++k)
    acc += 0.5 * fwd.g[k].dot(dB[k]) - 0.25 * fwd.g[k].squaredNorm() * dt;
  return acc;
}

}  // namespace lab
