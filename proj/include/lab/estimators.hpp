#pragma once
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>
#include "lab/distance.hpp"
#include "lab/frame.hpp"
#include "lab/hyperbolic.hpp"
#include "lab/parallel.hpp"
#include "lab/riccati.hpp"
#include "lab/rng.hpp"
#include "lab/stats.hpp"

namespace lab {

struct EstimateReport {
  std::string quantity;
  std::string route;
  double estimate = 0;
  double std_error = 0;  // sample std / sqrt(n)
  int n_paths = 0;
  int excluded = 0;       // paths dropped for leaving the chart or NaN
  double T = 0, dt = 0;
  uint64_t seed = 0;
  bool ok = true;              // false once exclusions pass the abort threshold
  bool pre_asymptotic = false;  // horizon too short for the transient to decay
};

inline double ci95(const EstimateReport& r) { return 1.96 * r.std_error; }

inline bool ci_overlap(const EstimateReport& a, const EstimateReport& b) {
  return std::abs(a.estimate - b.estimate) <= ci95(a) + ci95(b);
}

// Linear drift, displacement route: mean of d(x0, x_T)/T. The startup
// transient biases the mean by about +(m-1) integral of (coth r - 1), of
// order 1/T, so T should be large enough to bury it under the CI.
inline EstimateReport estimate_drift_displacement(const Metric& M, const Vec& x0, double T,
                                                  double dt, int N, uint64_t seed,
                                                  int workers = 1) {
  int K = int(std::lround(T / dt));
  std::vector<double> slot(N);
  parallel_for(N, workers, [&](int p) {
    auto rng = rng_stream(seed, p);
    Vec x = x0, dB(M.m);
    Mat U = mgs_frame(M, x0, Mat(Mat::Identity(M.m, M.m)));
    for (int k = 0; k < K; ++k) {
      rng.fill_increment(dB, M.m, dt);
      bm_step(M, x, U, dB);
    }
    bool valid = x.allFinite() && x[M.m - 1] > 0;
    slot[p] = valid ? dist_halfspace(x0, x) / T : std::nan("");
  });
  EstimateReport rep{"drift", "displacement"};
  rep.n_paths = N;
  rep.T = T;
  rep.dt = dt;
  rep.seed = seed;
  rep.pre_asymptotic = T < 10;
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

// Linear drift, divergence route: ergodic average of -Div of the unit field
// aimed at the path's forward limit point. The limit direction at time t is
// approximated by the chart direction toward x_T, an O(e^{-(T-t)}) angular
// error, so evaluations stop a guard interval before the endpoint.
inline EstimateReport estimate_drift_divergence(const Metric& M, const Vec& x0, double T,
                                                double dt, int N, uint64_t seed,
                                                double horizon = 10.0, double dt_eval = 1.0,
                                                double guard = 4.0, double riccati_h = 2e-2,
                                                int workers = 1) {
  int K = int(std::lround(T / dt));
  int every = std::max(1, int(std::lround(dt_eval / dt)));
  std::vector<double> slot(N);
  std::vector<int> fails(N, 0);
  parallel_for(N, workers, [&](int p) {
    auto rng = rng_stream(seed, p);
    Vec x = x0, dB(M.m);
    Mat U = mgs_frame(M, x0, Mat(Mat::Identity(M.m, M.m)));
    std::vector<Vec> at;
    for (int k = 0; k < K; ++k) {
      rng.fill_increment(dB, M.m, dt);
      bm_step(M, x, U, dB);
      double t = (k + 1) * dt;
      if ((k + 1) % every == 0 && t <= T - guard) at.push_back(x);
    }
    Vec xT = x;
    double acc = 0;
    int n = 0;
    for (const Vec& xt : at) {
      Vec dir = log_map_halfspace(xt, xT);
      double v = -stable_tensor(M, xt, dir, horizon, 1e-3, riccati_h).div_spray;
      if (std::isfinite(v)) {
        acc += v;
        ++n;
      } else {
        fails[p]++;
      }
    }
    slot[p] = n > 0 ? acc / n : std::nan("");
  });
  EstimateReport rep{"drift", "divergence"};
  rep.n_paths = N;
  rep.T = T;
  rep.dt = dt;
  rep.seed = seed;
  std::vector<double> vals;
  int nfail = 0, neval = 0;
  for (int p = 0; p < N; ++p) {
    if (std::isfinite(slot[p])) vals.push_back(slot[p]);
    else rep.excluded++;
    nfail += fails[p];
    neval += fails[p];
  }
  neval += int(vals.size());
  auto ms = mean_se(vals);
  rep.estimate = ms.mean;
  rep.std_error = ms.se;
  rep.ok = rep.excluded == 0 && nfail * 1000 <= neval;
  return rep;
}

// Stochastic entropy via the kernel oracle: mean of -ln p(T, x0, x_T)/T.
// Only the unperturbed models carry a kernel oracle.
inline EstimateReport estimate_entropy(const Metric& M, const Vec& x0, double T, double dt,
                                       int N, uint64_t seed, int workers = 1) {
  int K = int(std::lround(T / dt));
  std::vector<double> slot(N);
  parallel_for(N, workers, [&](int p) {
    auto rng = rng_stream(seed, p);
    Vec x = x0, dB(M.m);
    Mat U = mgs_frame(M, x0, Mat(Mat::Identity(M.m, M.m)));
    for (int k = 0; k < K; ++k) {
      rng.fill_increment(dB, M.m, dt);
      bm_step(M, x, U, dB);
    }
    if (!x.allFinite() || x[M.m - 1] <= 0) {
      slot[p] = std::nan("");
      return;
    }
    double r = dist_halfspace(x0, x);
    slot[p] = -(M.m == 2 ? lnp_h2(r, T) : lnp_h3(r, T)) / T;
  });
  EstimateReport rep{"entropy", "kernel"};
  rep.n_paths = N;
  rep.T = T;
  rep.dt = dt;
  rep.seed = seed;
  std::vector<double> vals;
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

struct ExitAngleResult {
  std::vector<double> angles;  // disk-chart exit angles in (-pi, pi]
  int not_exited = 0;          // paths that never crossed the cutoff radius
  int n_paths = 0;
  double r_cut = 0, t_max = 0, dt = 0;
  uint64_t seed = 0;
};

// Cayley map from the half plane to the unit disk, (0,1) to the origin.
inline std::complex<double> halfplane_to_disk(const Vec& x) {
  std::complex<double> z(x[0], x[1]), i(0, 1);
  return (z - i) / (z + i);
}

// Runs planar paths from x0 until they leave the ball of radius r_cut around
// the disk-chart center (0,1); records the angular position at exit.
inline ExitAngleResult sample_exit_angle(const Metric& M, const Vec& x0, int N, double r_cut,
                                         double dt, double t_max, uint64_t seed,
                                         int workers = 1) {
  Vec center(2);
  center << 0.0, 1.0;
  int K = int(std::lround(t_max / dt));
  std::vector<double> slot(N);
  parallel_for(N, workers, [&](int p) {
    auto rng = rng_stream(seed, p);
    Vec x = x0, dB(2);
    Mat U = mgs_frame(M, x0, Mat(Mat::Identity(2, 2)));
    slot[p] = std::nan("");
    for (int k = 0; k < K; ++k) {
      rng.fill_increment(dB, 2, dt);
      bm_step(M, x, U, dB);
      if (dist_halfspace(center, x) > r_cut) {
        slot[p] = std::arg(halfplane_to_disk(x));
        break;
      }
    }
  });
  ExitAngleResult res;
  res.n_paths = N;
  res.r_cut = r_cut;
  res.t_max = t_max;
  res.dt = dt;
  res.seed = seed;
  for (double a : slot) {
    if (std::isfinite(a)) res.angles.push_back(a);
    else res.not_exited++;
  }
  return res;
}

// CDF of the exit law from a start point at disk radius r0 on the positive
// real axis: the Poisson kernel integrates to
//     F(theta) = 1/2 + (1/pi) atan( ((1+r0)/(1-r0)) tan(theta/2) ).
inline double exit_angle_cdf(double r0, double theta) {
  double a = (1 + r0) / (1 - r0);
  if (theta >= M_PI) return 1.0;
  if (theta <= -M_PI) return 0.0;
  return 0.5 + std::atan(a * std::tan(theta / 2)) / M_PI;
}

}  // namespace lab
