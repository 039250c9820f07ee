#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <cmath>
#include "lab/distance.hpp"
#include "lab/frame.hpp"
#include "lab/rng.hpp"

using namespace lab;

namespace {
Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// points along the geodesic from x with velocity v, parameter in [0,1]
std::vector<Vec> geodesic_samples(const Metric& M, Vec x, Vec v, int n) {
  std::vector<Vec> pts{x};
  for (int i = 0; i < n; ++i) {
    geodesic_step(M, x, v, 1.0 / n, (Mat*)nullptr);
    pts.push_back(x);
  }
  return pts;
}
}  // namespace

TEST_CASE("flat steps add the increment and keep the frame") {
  Euclidean M(2);
  Vec x = vec2(0.3, -0.7), dB = vec2(0.05, -0.02);
  Mat U = Mat::Identity(2, 2);
  bm_step(M, x, U, dB);
  CHECK((x - vec2(0.35, -0.72)).norm() < 1e-15);
  CHECK((U - Mat::Identity(2, 2)).norm() < 1e-15);
}

TEST_CASE("short time quadratic variation reaches 2 m dt") {
  HyperbolicHalfSpace M(2);
  double dt = 1e-3, t = 0.02;
  int nstep = int(t / dt), N = 5000;
  double sum = 0, sum2 = 0;
  Vec x0 = vec2(0.0, 1.0);
  for (int p = 0; p < N; ++p) {
    auto rng = rng_stream(11, p);
    Vec x = x0, dB(2);
    Mat U = Mat::Identity(2, 2);
    for (int k = 0; k < nstep; ++k) {
      rng.fill_increment(dB, 2, dt);
      bm_step(M, x, U, dB);
    }
    double d2 = dist_halfspace(x0, x);
    d2 *= d2;
    sum += d2;
    sum2 += d2 * d2;
  }
  double mean = sum / N;
  double se = std::sqrt((sum2 / N - mean * mean) / N);
  // E d^2 = 2 m t + O(t^2) for the generator-Delta convention
  CHECK(std::abs(mean - 4.0 * t) < 3 * se + 0.01 * 4.0 * t);
}

TEST_CASE("radial escape speed is one on the plane") {
  HyperbolicHalfSpace M(2);
  // T must outrun the startup transient, which biases d/T by about +1.6/T
  double dt = 0.01, T = 50.0;
  int nstep = int(T / dt), N = 800;
  double sum = 0, sum2 = 0;
  Vec x0 = vec2(0.0, 1.0);
  for (int p = 0; p < N; ++p) {
    auto rng = rng_stream(5, p);
    Vec x = x0, dB(2);
    Mat U = Mat::Identity(2, 2);
    for (int k = 0; k < nstep; ++k) {
      rng.fill_increment(dB, 2, dt);
      bm_step(M, x, U, dB);
    }
    double v = dist_halfspace(x0, x) / T;
    sum += v;
    sum2 += v * v;
  }
  double mean = sum / N;
  double se = std::sqrt((sum2 / N - mean * mean) / N);
  CHECK(std::abs(mean - 1.0) < 0.05);
  CHECK(se < 0.02);
}

TEST_CASE("fixed seed reproduces the path bit for bit") {
  HyperbolicHalfSpace M(2);
  Vec a = vec2(0.0, 1.0), b = vec2(0.0, 1.0), dB(2);
  Mat Ua = Mat::Identity(2, 2), Ub = Ua;
  for (int rep = 0; rep < 2; ++rep) {
    Vec& x = rep ? b : a;
    Mat& U = rep ? Ub : Ua;
    auto rng = rng_stream(123, 17);
    for (int k = 0; k < 200; ++k) {
      rng.fill_increment(dB, 2, 1e-3);
      bm_step(M, x, U, dB);
    }
  }
  CHECK(a[0] == b[0]);
  CHECK(a[1] == b[1]);
  CHECK((Ua - Ub).norm() == 0.0);
}

TEST_CASE("flat transport leaves vectors alone") {
  Euclidean M(2);
  std::vector<Vec> pts;
  for (int i = 0; i <= 50; ++i) pts.push_back(vec2(0.1 * i, std::sin(0.2 * i)));
  Mat W(2, 1);
  W << 0.3, -0.8;
  Mat W0 = W;
  transport_along(M, pts, W);
  CHECK((W - W0).norm() < 1e-12);
}

TEST_CASE("triangle holonomy equals the enclosed area") {
  HyperbolicHalfSpace M(2);
  Vec A = vec2(0.0, 1.0), B = vec2(1.0, 1.2), C = vec2(-0.4, 1.8);
  auto angle_at = [&](const Vec& p, const Vec& q, const Vec& r) {
    Vec u = log_map_halfspace(p, q), w = log_map_halfspace(p, r);
    return std::acos(inner(M, p, u, w) / (norm(M, p, u) * norm(M, p, w)));
  };
  double area = M_PI - angle_at(A, B, C) - angle_at(B, C, A) - angle_at(C, A, B);

  int n = 400;
  auto side = [&](const Vec& p, const Vec& q) {
    return geodesic_samples(M, p, Vec(log_map_halfspace(p, q)), n);
  };
  std::vector<Vec> loop = side(A, B);
  for (auto& s : {side(B, C), side(C, A)})
    loop.insert(loop.end(), s.begin() + 1, s.end());

  Mat E = mgs_frame(M, A, Mat(Mat::Identity(2, 2)));
  Mat Et = E;
  transport_along(M, loop, Et);
  Mat G;
  M.g(A, G);
  Mat Q = E.transpose() * G * Et;  // net rotation in the start frame
  double theta = std::atan2(Q(1, 0), Q(0, 0));
  CHECK(std::abs(std::abs(theta) - area) < 1e-5);
}

TEST_CASE("transport back along the reversed path is the identity") {
  HyperbolicHalfSpace M(2);
  std::vector<Vec> pts;
  for (int i = 0; i <= 200; ++i)
    pts.push_back(vec2(0.005 * i, 1.0 + 0.3 * std::sin(0.03 * i)));
  Mat W(2, 2);
  W << 0.3, -0.1, 0.7, 0.4;
  Mat W0 = W;
  transport_along(M, pts, W);
  std::reverse(pts.begin(), pts.end());
  transport_along(M, pts, W);
  CHECK((W - W0).norm() < 1e-9);
}

TEST_CASE("a straight driving line develops onto the vertical geodesic") {
  HyperbolicHalfSpace M(2);
  int K = 1000;
  double L = 1.0;
  std::vector<Vec> da(K, vec2(0.0, L / K));
  std::vector<Vec> xs;
  std::vector<Mat> Us;
  develop(M, vec2(0.0, 1.0), Mat(Mat::Identity(2, 2)), da, xs, Us);
  CHECK(std::abs(xs.back()[0]) < 1e-12);
  CHECK(std::abs(xs.back()[1] - std::exp(L)) < 1e-8);
}

TEST_CASE("a driving circle develops with the closed form endpoint gap") {
  HyperbolicHalfSpace M(2);
  double r = 0.5;
  int K = 4000;
  std::vector<Vec> da(K);
  for (int k = 0; k < K; ++k) {
    double s0 = 2 * M_PI * k / K, s1 = 2 * M_PI * (k + 1) / K;
    da[k] = vec2(r * (std::cos(s1) - std::cos(s0)), r * (std::sin(s1) - std::sin(s0)));
  }
  std::vector<Vec> xs;
  std::vector<Mat> Us;
  develop(M, vec2(0.0, 1.0), Mat(Mat::Identity(2, 2)), da, xs, Us);
  double gap = dist_halfspace(Vec(vec2(0.0, 1.0)), xs.back());
  // the image is an arc of the circle with geodesic curvature 1/r: intrinsic
  // radius rho = atanh(r), covered center angle 2 pi / cosh(rho), and the
  // chord follows from the hyperbolic law of cosines
  double rho = std::atanh(r);
  double phi = 2 * M_PI / std::cosh(rho);
  double expect = std::acosh(std::cosh(rho) * std::cosh(rho) -
                             std::sinh(rho) * std::sinh(rho) * std::cos(phi));
  CHECK(std::abs(gap - expect) < 1e-4);
}

TEST_CASE("endpoint statistics shift linearly in the step size") {
  HyperbolicHalfSpace M(2);
  double T = 1.0;
  int N = 20000;
  Vec x0 = vec2(0.0, 1.0);
  // one fine noise sequence per path, coarsened by summing pairs, so the
  // three levels are pathwise coupled
  double sum[3] = {0, 0, 0};
  int nfine = 40;  // dt = 0.025
  std::vector<Vec> fine(nfine);
  for (int p = 0; p < N; ++p) {
    auto rng = rng_stream(29, p);
    for (int k = 0; k < nfine; ++k) {
      fine[k].resize(2);
      rng.fill_increment(fine[k], 2, T / nfine);
    }
    for (int lev = 0; lev < 3; ++lev) {
      int stride = 4 >> lev;
      Vec x = x0;
      Mat U = Mat::Identity(2, 2);
      for (int k = 0; k < nfine; k += stride) {
        Vec dB = fine[k];
        for (int j = 1; j < stride; ++j) dB += fine[k + j];
        bm_step(M, x, U, dB);
      }
      double d = dist_halfspace(x0, x);
      sum[lev] += d * d;
    }
  }
  double d1 = std::abs(sum[0] - sum[1]) / N, d2 = std::abs(sum[1] - sum[2]) / N;
  CHECK(d1 > 1e-4);            // the bias is resolved
  CHECK(d1 / d2 > 1.4);        // and shrinks about linearly
  CHECK(d1 / d2 < 3.2);
}
