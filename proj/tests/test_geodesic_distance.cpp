#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include "lab/curve.hpp"
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
}  // namespace

TEST_CASE("half plane geodesics in closed form") {
  HyperbolicHalfSpace M(2);
  // vertical ray: unit speed upward from (0,1) passes through (0, e^t)
  GeodesicOrbit orb;
  orb.init(M, vec2(0, 1), vec2(0, 1));
  double h = 1e-3;
  for (int i = 0; i < 1000; ++i) orb.step(h);
  CHECK(orb.x[0] == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(orb.x[1] == doctest::Approx(std::exp(1.0)).epsilon(1e-9));

  // horizontal launch: x(t) = (tanh t, sech t)
  orb.init(M, vec2(0, 1), vec2(1, 0));
  for (int i = 0; i < 1000; ++i) orb.step(h);
  CHECK(orb.x[0] == doctest::Approx(std::tanh(1.0)).epsilon(1e-9));
  CHECK(orb.x[1] == doctest::Approx(1.0 / std::cosh(1.0)).epsilon(1e-9));
}

TEST_CASE("parallel frame stays orthonormal along the orbit") {
  HyperbolicHalfSpace M(3);
  Vec x0(3), dir(3);
  x0 << 0.2, -0.1, 1.0;
  dir << 0.5, 0.3, -0.4;
  GeodesicOrbit orb;
  orb.init(M, x0, dir);
  for (int i = 0; i < 5000; ++i) orb.step(2e-3);  // 10 time units
  Mat G;
  M.g(orb.x, G);
  Mat gram = orb.E.transpose() * G * orb.E;
  CHECK((gram - Mat::Identity(3, 3)).norm() < 1e-9);
  // and the normal-bundle curvature block is -identity on a space form
  CHECK((orb.r_jac() + Mat::Identity(2, 2)).norm() < 1e-9);
}

TEST_CASE("distance closed form agrees with integrated geodesics") {
  HyperbolicHalfSpace M(2);
  Vec x = vec2(0.3, 1.2);
  Vec v = vec2(0.8, -0.5);
  Vec y = x, vv = v;
  exp_map(M, y, vv, (Mat*)nullptr, 0.005);
  CHECK(dist_halfspace(x, y) == doctest::Approx(norm(M, x, v)).epsilon(1e-8));

  Vec lg = log_map_halfspace(x, y);
  CHECK((lg - v).norm() < 1e-6);
}

TEST_CASE("distance stays finite and accurate at extreme depth") {
  Vec x = vec2(0.0, 1.0);
  Vec y = vec2(0.4, 1e-260);
  double d = dist_halfspace(x, y);
  CHECK(std::isfinite(d));
  // for y -> boundary, d -> log(|x-y|^2 / (x_m y_m))
  double expect = std::log(0.4 * 0.4 + 1.0) - std::log(1e-260);
  CHECK(d == doctest::Approx(expect).epsilon(1e-12));
  // continuity across the log/acosh switch
  for (double ym : {1e-14, 1e-16, 1e-18}) {
    Vec y2 = vec2(0.4, ym);
    double q = (x - y2).squaredNorm() / (2 * x[1] * ym);
    double direct = std::acosh(1 + q);
    CHECK(dist_halfspace(x, y2) == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("disk distance closed form") {
  Vec z = vec2(0.0, 0.0);
  Vec w = vec2(0.6, 0.0);
  CHECK(dist_disk(z, w) == doctest::Approx(2 * std::atanh(0.6)).epsilon(1e-12));
}

TEST_CASE("gradient of the distance") {
  Vec x = vec2(0.3, 1.4), y = vec2(-0.8, 0.6);
  Vec gr = dist_halfspace_grad(x, y);
  double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    CHECK(gr[i] ==
          doctest::Approx((dist_halfspace(xp, y) - dist_halfspace(xm, y)) / (2 * h))
              .epsilon(1e-6));
  }
}

TEST_CASE("shooting log map on the unperturbed model matches closed form") {
  HyperbolicHalfSpace M(2);
  Vec x = vec2(0.1, 1.0), y = vec2(2.0, 0.4);
  auto res = log_map_shoot(M, x, y, Vec(log_map_halfspace(x, y) * 1.05));
  CHECK(res.ok);
  CHECK(res.dist == doctest::Approx(dist_halfspace(x, y)).epsilon(1e-7));
}

TEST_CASE("shooting log map on a perturbed metric hits the target") {
  HyperbolicHalfSpace base(2);
  Profile p;
  BumpProfile b;
  b.center = vec2(0.8, 0.8);
  b.rho = 0.5;
  b.amp = 0.1;
  p.bumps.push_back(b);
  ConformalMetric M(&base, p);
  Vec x = vec2(0.0, 1.0), y = vec2(1.6, 0.5);
  auto res = log_map_shoot(M, x, y, log_map_halfspace(x, y));
  CHECK(res.ok);
  Vec xe = x, ve = res.v;
  exp_map(M, xe, ve, (Mat*)nullptr, 0.02);
  CHECK((xe - y).norm() < 1e-7);
  // the bump sits on the route, so the perturbed length must differ
  CHECK(std::abs(res.dist - dist_halfspace(x, y)) > 1e-3);
}

TEST_CASE("develop and antidevelop invert each other") {
  HyperbolicHalfSpace M(2);
  auto rng = rng_stream(21, 0);
  Vec x0 = vec2(0.0, 1.0);
  Mat U0 = mgs_frame(M, x0, Mat(Mat::Identity(2, 2)));
  std::vector<Vec> da(400);
  for (auto& d : da) rng.fill_increment(d, 2, 0.01);
  std::vector<Vec> xs;
  std::vector<Mat> Us;
  develop(M, x0, U0, da, xs, Us);
  std::vector<Vec> rec;
  std::vector<Mat> Ur;
  antidevelop(M, xs, U0, rec, Ur);
  double emax = 0;
  for (size_t k = 0; k < da.size(); ++k) emax = std::max(emax, (rec[k] - da[k]).norm());
  CHECK(emax < 1e-9);
  CHECK((Ur.back() - Us.back()).norm() < 1e-8);
}

TEST_CASE("frame orthonormality survives many brownian steps") {
  HyperbolicHalfSpace M(2);
  auto rng = rng_stream(5, 3);
  Vec x = vec2(0.0, 1.0);
  Mat U = mgs_frame(M, x, Mat(Mat::Identity(2, 2)));
  Vec dB;
  for (int k = 0; k < 5000; ++k) {
    rng.fill_increment(dB, 2, 0.01);
    bm_step(M, x, U, dB);
  }
  Mat G;
  M.g(x, G);
  CHECK((U.transpose() * G * U - Mat::Identity(2, 2)).norm() < 1e-12);
  CHECK(x[1] > 0);
}

TEST_CASE("differentiated gram schmidt matches finite differences") {
  HyperbolicHalfSpace base(2);
  Profile p;
  BumpProfile b;
  b.center = vec2(0.2, 1.1);
  b.rho = 0.8;
  b.amp = 0.3;
  p.bumps.push_back(b);
  ConformalCurve curve(&base, p);
  Vec x = vec2(0.4, 1.3);
  Mat E(2, 2), dE(2, 2);
  E << 1, 0.4, -0.2, 1;
  dE << 0.1, -0.3, 0.2, 0.05;
  Mat Xab;
  curve.X(x, Xab);
  Mat U, dU;
  mgs_frame_var(base, x, E, Xab, dE, U, dU);
  double h = 1e-6;
  auto Mp = curve.at(h), Mm = curve.at(-h);
  Mat Up = mgs_frame(*Mp, x, Mat(E + h * dE));
  Mat Um = mgs_frame(*Mm, x, Mat(E - h * dE));
  CHECK((U - mgs_frame(base, x, E)).norm() < 1e-14);
  CHECK(((Up - Um) / (2 * h) - dU).norm() < 1e-6);
}
