#pragma once
#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>

namespace lab {

// Dense types with stack storage up to dimension 8: no heap traffic in the
// per-step loops, while keeping the dimension a runtime value.
constexpr int MaxDim = 8;

template <class S> using VecT = Eigen::Matrix<S, Eigen::Dynamic, 1, 0, MaxDim, 1>;
template <class S> using MatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, 0, MaxDim, MaxDim>;

using Vec = VecT<double>;
using Mat = MatT<double>;

// Rank-3 block d[k] = matrix slice k. Used for dg (d[k](i,j) = d_k g_ij) and
// for Christoffel symbols (d[k](i,j) = Gamma^k_ij).
template <class S> struct Ten3T {
  int m = 0;
  std::array<MatT<S>, MaxDim> d;
  void resize(int dim) {
    m = dim;
    for (int k = 0; k < m; ++k) d[k].setZero(m, m);
  }
  MatT<S>& operator[](int k) { return d[k]; }
  const MatT<S>& operator[](int k) const { return d[k]; }
};
using Ten3 = Ten3T<double>;

// Rank-4 block t[a][k](i,j), used for dGamma and second metric derivatives.
template <class S> struct Ten4T {
  int m = 0;
  std::array<Ten3T<S>, MaxDim> t;
  void resize(int dim) {
    m = dim;
    for (int a = 0; a < m; ++a) t[a].resize(dim);
  }
  Ten3T<S>& operator[](int a) { return t[a]; }
  const Ten3T<S>& operator[](int a) const { return t[a]; }
};
using Ten4 = Ten4T<double>;

inline void require(bool ok, const char* what) {
  if (!ok) throw std::runtime_error(what);
}

}  // namespace lab
