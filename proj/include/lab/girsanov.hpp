#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>
#include "lab/estimators.hpp"
#include "lab/geodesic.hpp"

namespace lab {

// Exponential martingale accumulator under the variance-2 noise convention:
//     log M_t = 1/2 int <f, dB> - 1/4 int |f|^2 dt,
// with the Ito integral discretized at the left point. f lives in the frame
// coordinates of the driving noise and must stay within the declared bound.
struct GirsanovWeight {
  double log_m = 0;
  double f2_int = 0;  // int |f|^2 dt, the Novikov quantity
  double f_max = 0;   // declared bound on |f|; 0 disables the check
  bool ok = true;

  explicit GirsanovWeight(double bound = 0) : f_max(bound) {}

  void accumulate(const Vec& f, const Vec& dB, double dt) {
    double f2 = f.squaredNorm();
    if (f_max > 0 && f2 > f_max * f_max * (1 + 1e-12)) ok = false;
    log_m += 0.5 * f.dot(dB) - 0.25 * f2 * dt;
    f2_int += f2 * dt;
  }

  double weight() const { return std::exp(log_m); }
};

// Weight of a stored path: f_k and dB_k per step, fixed dt.
inline GirsanovWeight girsanov_weight(const std::vector<Vec>& f, const std::vector<Vec>& dB,
                                      double dt, double f_bound = 0) {
  GirsanovWeight w(f_bound);
  for (size_t k = 0; k < dB.size(); ++k) w.accumulate(f[k], dB[k], dt);
  return w;
}

// Chart covector of ln p(s, x, y) in x. Exact closed form on the unperturbed
// models in dimension 2 and 3 (radial kernel, chain rule through the
// distance); otherwise the short-time Gaussian surrogate
// d ln p ~ -d(x,y)^2 / (4s), which is approximate and kept to diagnostics.
inline Vec dlnp_covector(const Metric& M, const Vec& x, const Vec& y, double s,
                         bool surrogate) {
  double r = dist_halfspace(x, y);
  if (r < 1e-12) return Vec(Vec::Zero(M.m));
  double dr = surrogate ? -r / (2 * s) : (M.m == 2 ? dr_lnp_h2(r, s) : dr_lnp_h3(r, s));
  return Vec(dr * dist_halfspace_grad(x, y));
}

// Brownian bridge: a frame Brownian motion whose development carries the
// extra drift 2 grad ln p(T-t, x, y), conditioning the endpoint on y.
struct BridgeState {
  Vec x;
  Mat U;
  Vec target;
  double t_left = 0;
  int capped_steps = 0;      // steps taken in the deterministic pinning phase
  double cap_entry_gap = 0;  // distance to target when pinning began
  bool approximate_drift = false;  // Gaussian surrogate in use
};

inline BridgeState bridge_start(const Metric& M, const Vec& x0, const Vec& y, double T) {
  BridgeState st;
  st.x = x0;
  st.U = mgs_frame(M, x0, Mat(Mat::Identity(M.m, M.m)));
  st.target = y;
  st.t_left = T;
  st.approximate_drift = !(M.symmetric_space && (M.m == 2 || M.m == 3));
  return st;
}

// One bridge step. The drift is singular as t -> T, so the final
// cap_steps*dt of time switches to direct geodesic interpolation toward the
// target: each capped step covers the fraction dt/t_left of the remaining
// log map, which lands exactly on the target at t_left = dt. dB is ignored
// while pinned so callers can keep drawing increments on a fixed schedule.
inline void bridge_step(const Metric& M, BridgeState& st, const Vec& dB, double dt,
                        int cap_steps = 10) {
  if (st.t_left <= cap_steps * dt + 1e-12) {
    double r = dist_halfspace(st.x, st.target);
    if (st.capped_steps == 0) st.cap_entry_gap = r;
    st.capped_steps++;
    if (r > 1e-14) {
      Vec v = Vec(log_map_halfspace(st.x, st.target) * (dt / st.t_left));
      exp_map(M, st.x, v, &st.U);
    }
    st.t_left -= dt;
    return;
  }
  Vec g = dlnp_covector(M, st.x, st.target, st.t_left, st.approximate_drift);
  Vec f = Vec(2.0 * (st.U.transpose() * g));  // frame coordinates of the sharp
  bm_step(M, st.x, st.U, Vec(dB + f * dt));
  st.t_left -= dt;
}

// Full bridge trajectory on the uniform grid t_k = k dt. Path storage is a
// heap matrix: the step count breaks the small fixed-capacity types.
struct BridgePath {
  Eigen::MatrixXd x;  // m x (K+1), column k is the state at t_k
  double dt = 0, T = 0;
  int capped_steps = 0;
  double cap_entry_gap = 0;
  double terminal_gap = 0;
};

inline BridgePath run_bridge(const Metric& M, const Vec& x0, const Vec& y, double T, double dt,
                             RngStream& rng, int cap_steps = 10) {
  int K = int(std::lround(T / dt));
  BridgePath path;
  path.x.resize(M.m, K + 1);
  path.dt = dt;
  path.T = T;
  path.x.col(0) = x0;
  BridgeState st = bridge_start(M, x0, y, T);
  Vec dB(M.m);
  for (int k = 0; k < K; ++k) {
    rng.fill_increment(dB, M.m, dt);
    bridge_step(M, st, dB, dt, cap_steps);
    path.x.col(k + 1) = st.x;
  }
  path.capped_steps = st.capped_steps;
  path.cap_entry_gap = st.cap_entry_gap;
  path.terminal_gap = dist_halfspace(st.x, y);
  return path;
}

// Tabulated CDF of a scalar radius statistic, linearly interpolated.
struct RadiusCdf {
  std::vector<double> r, F;  // F monotone on [0, 1]
  double total_mass = 0;     // unnormalized mass of the underlying density

  double operator()(double rv) const {
    if (rv <= r.front()) return 0;
    if (rv >= r.back()) return 1;
    auto it = std::upper_bound(r.begin(), r.end(), rv);
    size_t i = it - r.begin();
    double w = (rv - r[i - 1]) / (r[i] - r[i - 1]);
    return F[i - 1] + w * (F[i] - F[i - 1]);
  }

  double mean() const {  // int (1 - F) dr over the table
    double s = 0;
    for (size_t i = 1; i < r.size(); ++i)
      s += 0.5 * ((1 - F[i - 1]) + (1 - F[i])) * (r[i] - r[i - 1]);
    return s;
  }
};

// Law of rho = d(x, z_{T/2}) under the x->y bridge at endpoint distance d:
// density p(T/2, x, z) p(T/2, z, y) / p(T, x, y) integrated over geodesic
// spheres around x, the second radius coming from the law of cosines.
// total_mass is the unnormalized integral, which the semigroup property pins
// to p(T, d), so the quadrature carries its own consistency check.
inline RadiusCdf bridge_midpoint_cdf(int m, double d, double T, int nr = 1200,
                                     int ntheta = 192) {
  double s = T / 2;
  double rmax = d + 10 * std::sqrt(T) + 2;
  double amax = rmax + d + 1;  // covers both kernel arguments
  int ntab = 4000;
  double h = amax / ntab;
  std::vector<double> tab(ntab + 1);
  for (int i = 0; i <= ntab; ++i) {
    double rr = std::max(1e-6, i * h);
    tab[i] = m == 2 ? lnp_h2(rr, s) : lnp_h3(rr, s);
  }
  auto lnp = [&](double rr) {
    double u = std::clamp(rr, 0.0, amax) / h;
    int i = std::min(int(u), ntab - 1);
    double w = u - i;
    return tab[i] + w * (tab[i + 1] - tab[i]);
  };
  double chd = std::cosh(d), shd = std::sinh(d);
  // Simpson in the polar angle; the two-dimensional model doubles the
  // half-range, the three-dimensional one carries the sin(theta) area factor.
  auto angular = [&](double rho) {
    double chr = std::cosh(rho), shr = std::sinh(rho);
    auto f = [&](double th) {
      double c = std::max(1.0, chr * chd - shr * shd * std::cos(th));
      double d2 = std::acosh(c);
      double v = std::exp(lnp(d2));
      return m == 2 ? v : v * std::sin(th);
    };
    int n = ntheta;
    double dth = M_PI / n, acc = f(0) + f(M_PI);
    for (int j = 1; j < n; ++j) acc += (j % 2 ? 4.0 : 2.0) * f(j * dth);
    acc *= dth / 3;
    return m == 2 ? 2 * acc : 2 * M_PI * acc;
  };
  RadiusCdf cdf;
  cdf.r.resize(nr + 1);
  cdf.F.resize(nr + 1);
  std::vector<double> w(nr + 1, 0.0);
  double dr = rmax / nr;
  for (int i = 1; i <= nr; ++i) {
    double rho = i * dr;
    double vol = m == 2 ? std::sinh(rho) : std::sinh(rho) * std::sinh(rho);
    w[i] = std::exp(lnp(rho)) * angular(rho) * vol;
  }
  cdf.r[0] = 0;
  cdf.F[0] = 0;
  for (int i = 1; i <= nr; ++i) {
    cdf.r[i] = i * dr;
    cdf.F[i] = cdf.F[i - 1] + 0.5 * (w[i - 1] + w[i]) * dr;
  }
  cdf.total_mass = cdf.F[nr];
  for (double& v : cdf.F) v /= cdf.total_mass;
  return cdf;
}

// E_bridge[phi] over N independent bridges, with the usual exclusion
// accounting. phi sees the whole discrete path.
template <class F>
EstimateReport bridge_weight_expectation(const Metric& M, const Vec& x0, const Vec& y, double T,
                                         double dt, int N, uint64_t seed, F&& phi,
                                         int workers = 1, int cap_steps = 10) {
  std::vector<double> slot(N);
  parallel_for(N, workers, [&](int p) {
    auto rng = rng_stream(seed, p);
    BridgePath path = run_bridge(M, x0, y, T, dt, rng, cap_steps);
    bool valid = path.x.allFinite() && path.x.row(M.m - 1).minCoeff() > 0;
    double v = valid ? phi(path) : std::nan("");
    slot[p] = std::isfinite(v) ? v : std::nan("");
  });
  EstimateReport rep{"bridge_functional", "drift_sde"};
  rep.n_paths = N;
  rep.T = T;
  rep.dt = dt;
  rep.seed = seed;
  std::vector<double> vals;
  vals.reserve(N);
  for (double v : slot) {
    if (std::isfinite(v)) vals.push_back(v);
    else rep.excluded++;
  }
  auto ms = mean_se(vals);
  rep.estimate = ms.mean;
  rep.std_error = ms.se;
  rep.ok = rep.excluded <= N / 100;
  return rep;
}

}  // namespace lab
