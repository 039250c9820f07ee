#pragma once
#include <vector>
#include "lab/frame.hpp"

namespace lab {

// Derivative of the Brownian flow map on the frame bundle, carried in the
// frame parallelism as a pair (z, Z): z is the position response read in the
// moving frame, Z the frame response. The pair solves the linear system
//     dz = Z o dB,   dZ = C(o dB, z),
// with C(w, z) = u^-1 R(u w, u z) u evaluated along the primal path.
template <class S>
struct TangentFlowStateT {
  VecT<S> z;
  MatT<S> Z;
};
using TangentFlowState = TangentFlowStateT<double>;

// C(w, z) as an m x m matrix at (x, U); frames here are orthonormal so the
// inverse is the metric transpose.
template <class S>
MatT<S> flow_coeff(const MetricT<S>& M, const VecT<S>& x, const MatT<S>& U,
                   const VecT<S>& w, const VecT<S>& z) {
  int m = M.m;
  auto C = curvature_at(M, x);
  MatT<S> Ui = U.transpose() * C.G;
  VecT<S> uw = U * w, uz = U * z;
  MatT<S> out(m, m);
  for (int j = 0; j < m; ++j) out.col(j) = Ui * C.apply(uw, uz, VecT<S>(U.col(j)));
  return out;
}

// One Heun (Stratonovich midpoint) step. The primal frame states before and
// after the matching bm_step with the same increment must be supplied.
template <class S>
void tangent_flow_step(const MetricT<S>& M, const VecT<S>& x0, const MatT<S>& U0,
                       const VecT<S>& x1, const MatT<S>& U1, const VecT<S>& dB,
                       TangentFlowStateT<S>& tf) {
  MatT<S> C0 = flow_coeff(M, x0, U0, dB, tf.z);
  VecT<S> zp = tf.z + tf.Z * dB;
  MatT<S> C1 = flow_coeff(M, x1, U1, dB, zp);
  tf.z += (tf.Z + S(0.5) * C0) * dB;  // trapezoid with the predicted Z
  tf.Z += S(0.5) * (C0 + C1);
}

// Left-point Ito form of the same system, used as a cross-check:
//     dz = Z dB + Ric(uz) dt,
//     dZ = C(dB, z) + [sum_i C(e_i, Z e_i)] dt
//          + [sum_i u^-1 (grad_{ue_i} R)(ue_i, uz) u] dt,
// where the last term vanishes on locally symmetric models.
template <class S>
void tangent_flow_step_ito(const MetricT<S>& M, const VecT<S>& x0, const MatT<S>& U0,
                           const VecT<S>& dB, S dt, TangentFlowStateT<S>& tf) {
  int m = M.m;
  MatT<S> C0 = flow_coeff(M, x0, U0, dB, tf.z);
  MatT<S> drift = MatT<S>::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    VecT<S> ei = VecT<S>::Zero(m);
    ei[i] = 1;
    drift += flow_coeff(M, x0, U0, ei, VecT<S>(tf.Z.col(i)));
  }
  if (!M.symmetric_space) {
    MatT<S> G;
    M.g(x0, G);
    MatT<S> Ui = U0.transpose() * G;
    VecT<S> uz = U0 * tf.z;
    std::vector<Ten4T<S>> NR(m);
    for (int a = 0; a < m; ++a) nabla_curvature_fd(M, x0, a, NR[a]);
    // (grad_d R)(X, Y) Z contracted against the chart blocks
    auto nr_apply = [&](const VecT<S>& d, const VecT<S>& X, const VecT<S>& Y,
                        const VecT<S>& Z) {
      VecT<S> out = VecT<S>::Zero(m);
      for (int a = 0; a < m; ++a) {
        if (d[a] == S(0)) continue;
        for (int p = 0; p < m; ++p)
          for (int q = 0; q < m; ++q) {
            S c = d[a] * X[p] * Y[q];
            if (c != S(0)) out += c * (NR[a][p][q] * Z);
          }
      }
      return out;
    };
    for (int i = 0; i < m; ++i) {
      VecT<S> a = U0.col(i);
      for (int j = 0; j < m; ++j)
        drift.col(j) += Ui * nr_apply(a, a, uz, VecT<S>(U0.col(j)));
    }
  }
  VecT<S> ric = ric_op_frame(M, x0, U0) * tf.z;
  tf.z += tf.Z * dB + ric * dt;
  tf.Z += C0 + drift * dt;
}

}  // namespace lab
