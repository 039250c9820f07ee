#pragma once
#include <cmath>
#include <memory>
#include <vector>
#include "lab/christoffel.hpp"
#include "lab/distance.hpp"
#include "lab/geodesic.hpp"

namespace lab {

// Constant-coefficient symmetric tensor times a scalar bump profile.
struct BumpTensorField : SymTensorField {
  Mat A;
  BumpProfile bump;

  BumpTensorField(Mat a, BumpProfile b) : A(std::move(a)), bump(std::move(b)) {}

  void eval(const Vec& x, Mat& T) const override { T = A * bump.value(x); }
  void deriv(const Vec& x, Ten3& D) const override {
    int m = int(A.rows());
    D.resize(m);
    Vec db;
    bump.grad(x, db);
    for (int k = 0; k < m; ++k) D[k] = A * db[k];
  }
  void deriv2(const Vec& x, Ten4& D2) const override {
    int m = int(A.rows());
    D2.resize(m);
    Mat h;
    bump.hess(x, h);
    for (int a = 0; a < m; ++a)
      for (int k = 0; k < m; ++k) D2[a][k] = A * h(a, k);
  }
};

// One-parameter metric family through the base at lambda = 0. Conformal
// curves exp(2 lambda phi) g0 carry analytic lambda-derivatives; additive
// curves g0 + lambda X fall back to central differences in lambda.
struct MetricCurve {
  const Metric* g0 = nullptr;
  bool conformal = false;
  Profile phi;                             // conformal curves
  const SymTensorField* tensor = nullptr;  // additive curves
  double fd_step = 1e-4;

  static MetricCurve conformal_curve(const Metric* base, Profile p) {
    MetricCurve c;
    c.g0 = base;
    c.conformal = true;
    c.phi = std::move(p);
    return c;
  }
  static MetricCurve additive_curve(const Metric* base, const SymTensorField* t) {
    MetricCurve c;
    c.g0 = base;
    c.tensor = t;
    return c;
  }

  std::unique_ptr<Metric> at(double lam) const {
    if (conformal) return std::make_unique<ConformalMetric>(g0, phi.scaled(lam));
    return std::make_unique<AdditiveMetric>(g0, tensor, lam);
  }

  // constant conformal factors have zero gradient, so the drift variation
  // vanishes identically and Y-field marches can be skipped
  bool upsilon_trivial() const { return conformal && phi.bumps.empty(); }

  // X = d_lambda g^lambda at 0 and its coordinate derivatives
  void tangent(const Vec& x, Mat& X) const {
    if (conformal) {
      g0->g(x, X);
      X *= 2 * phi.value(x);
    } else {
      tensor->eval(x, X);
    }
  }
  void dtangent(const Vec& x, Ten3& D) const {
    int m = g0->m;
    if (conformal) {
      Mat G;
      Ten3 dG;
      g0->g(x, G);
      g0->dg(x, dG);
      double p = phi.value(x);
      Vec dp;
      phi.grad(x, dp);
      D.resize(m);
      for (int k = 0; k < m; ++k) D[k] = 2 * (dp[k] * G + p * dG[k]);
    } else {
      tensor->deriv(x, D);
    }
  }

  // dGam[k](i,j) = d_lambda Gamma^k_ij at 0. Conformal: the classical
  // delta^k_i phi_j + delta^k_j phi_i - g_ij phi^k; otherwise a central
  // difference through the Christoffel symbols of g^lambda.
  void dgamma(const Vec& x, Ten3& dGam) const {
    int m = g0->m;
    dGam.resize(m);
    if (conformal) {
      Mat G;
      g0->g(x, G);
      Vec dp;
      phi.grad(x, dp);
      Vec up = sharp(*g0, x, dp);
      for (int k = 0; k < m; ++k)
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j)
            dGam[k](i, j) =
                (k == i ? dp[j] : 0.0) + (k == j ? dp[i] : 0.0) - G(i, j) * up[k];
      return;
    }
    auto gp = at(fd_step);
    auto gm = at(-fd_step);
    Ten3 Gp, Gm;
    christoffel(*gp, x, Gp);
    christoffel(*gm, x, Gm);
    for (int k = 0; k < m; ++k) dGam[k] = (Gp[k] - Gm[k]) / (2 * fd_step);
  }
};

// Upsilon(v): the g0-orthogonal part of the lambda-derivative of nabla_v v,
// contracted from the Christoffel variation. v must be g0-unit.
inline Vec upsilon(const MetricCurve& c, const Vec& x, const Vec& v) {
  int m = c.g0->m;
  Ten3 dG;
  c.dgamma(x, dG);
  Vec w(m);
  for (int k = 0; k < m; ++k) w[k] = v.dot(dG[k] * v);
  Mat G;
  c.g0->g(x, G);
  w -= v.dot(G * w) * v;
  return w;
}

// Boundary data of the half-space chart: a point of the horizontal
// hyperplane, or the vertical point at infinity.
struct BoundaryPoint {
  Vec xi;  // horizontal coordinates, size m-1
  bool at_inf = false;
};

// Forward endpoint of the geodesic from x with velocity v (any scale).
inline BoundaryPoint forward_boundary_point(const Vec& x, const Vec& v) {
  int m = int(x.size());
  double y = x[m - 1], vy = v[m - 1];
  Vec vh = v.head(m - 1);
  double nh = vh.norm();
  BoundaryPoint bp;
  bp.xi = x.head(m - 1);
  if (nh < 1e-9 * std::abs(vy)) {
    bp.at_inf = vy > 0;  // straight up ends at infinity, straight down below x
    return bp;
  }
  // vertical 2-plane through x spanned by vh: semicircle center offset mu,
  // radius rho, endpoints mu -/+ rho; motion with positive horizontal speed
  // heads to the right endpoint
  double mu = y * vy / nh;
  double rho = std::hypot(mu, y);
  bp.xi += ((mu + rho) / nh) * vh;
  return bp;
}

// g-unit vector at x pointing along the geodesic into the boundary point:
// closed form from the orthogonal-semicircle geometry of the half space.
inline Vec leaf_direction(const Vec& x, const BoundaryPoint& bp) {
  int m = int(x.size());
  double y = x[m - 1];
  Vec v = Vec::Zero(m);
  if (bp.at_inf) {
    v[m - 1] = y;
    return v;
  }
  Vec dh = x.head(m - 1) - bp.xi;
  double a = dh.norm();
  if (a < 1e-14) {
    v[m - 1] = -y;  // directly above the endpoint
    return v;
  }
  // in-plane coordinates (alpha, beta), alpha from xi toward x: the circle
  // through (a, y) with an endpoint at alpha = 0 has center t = (a^2+y^2)/2a
  // and radius t; the unit tangent there toward the endpoint is
  // (-beta, alpha - t)/t
  double t = (a * a + y * y) / (2 * a);
  v.head(m - 1) = (y * (-y / t) / a) * dh;
  v[m - 1] = y * (a - t) / t;
  return v;
}

struct YFieldInfo {
  double tau = 0;   // contraction rate of the pulled-back integrand
  double tail = 0;  // estimated truncation remainder
  int nodes = 0;    // last node that contributed
};

// Y(v): vertical part of the integral over s >= 0 of the flow pull-back of
// the unstable component of the vertical lift of Upsilon along the orbit.
// On constant negative curvature the unstable/stable tensors are +/-sqrt(-K)
// and the pull-back is a plain exponential: Y = 1/2 int e^{-sqrt(-K) s}
// Upsilon(Phi_s v) ds in parallel normal-frame coordinates. Otherwise both
// tensors come from Riccati passes warmed up over a guard horizon, and the
// pull-back inverts the principal solution of J' = U_u J, which stays well
// conditioned because stable and unstable components never mix.
// cull_center/cull_radius, when given, must bound the support of the curve
// tangent; the orbit then stops once it has left the support for good.
inline Vec y_field(const MetricCurve& c, const Vec& x, const Vec& v, double S = 15,
                   double h = 0.02, double guard = 8, YFieldInfo* info = nullptr,
                   const Vec* cull_center = nullptr, double cull_radius = 0) {
  const Metric& M = *c.g0;
  int m = M.m, p = m - 1;
  if (c.upsilon_trivial()) {
    if (info) *info = YFieldInfo{};
    return Vec(Vec::Zero(m));
  }
  int nS = std::max(2, int(std::ceil(S / h)));
  h = S / nS;
  bool closed = !std::isnan(M.constant_curvature) && M.constant_curvature < 0;
  double sq = closed ? std::sqrt(-M.constant_curvature) : 0;

  GeodesicOrbit orb;
  orb.init(M, x, v);
  Mat E0 = orb.E;
  Vec yf = Vec::Zero(p);

  auto frame_upsilon = [&](Vec& out) {
    Vec up = upsilon(c, orb.x, Vec(orb.E.col(0)));
    Mat G;
    M.g(orb.x, G);
    for (int a = 0; a < p; ++a) out[a] = orb.E.col(a + 1).dot(G * up);
  };

  if (closed) {
    Vec prev(p), cur(p), acc = Vec::Zero(p);
    frame_upsilon(prev);
    double upsmax = prev.norm(), dprev = 1e300;
    int last = nS;
    for (int k = 1; k <= nS; ++k) {
      orb.step(h / 2);
      orb.step(h / 2);
      if (cull_center) {
        double d = dist_halfspace(orb.x, *cull_center);
        if (d > cull_radius + 0.3 && d > dprev) {
          last = k;
          break;
        }
        dprev = d;
      }
      frame_upsilon(cur);
      upsmax = std::max(upsmax, cur.norm());
      double s = k * h;
      acc += (h / 2) * (std::exp(-sq * (s - h)) * prev + std::exp(-sq * s) * cur);
      prev = cur;
    }
    yf = 0.5 * acc;
    if (info) {
      info->tau = sq;
      info->tail = std::exp(-sq * S) * upsmax / (2 * sq);
      info->nodes = last;
    }
  } else {
    // forward sweep storing positions, frames, curvature blocks (half grid)
    std::vector<Vec> xs(nS + 1);
    std::vector<Mat> Es(nS + 1), Rs(2 * nS + 1);
    xs[0] = orb.x;
    Es[0] = orb.E;
    Rs[0] = orb.r_jac();
    for (int j = 1; j <= 2 * nS; ++j) {
      orb.step(h / 2);
      Rs[j] = orb.r_jac();
      if (j % 2 == 0) {
        xs[j / 2] = orb.x;
        Es[j / 2] = orb.E;
      }
    }
    Mat I_p = Mat::Identity(p, p);
    auto ric = [&](const Mat& U, const Mat& R) { return Mat(-(U * U) - R); };
    auto rk4 = [&](Mat& U, const Mat& R0, const Mat& Rh, const Mat& R1, double hh) {
      Mat k1 = ric(U, R0);
      Mat k2 = ric(Mat(U + (hh / 2) * k1), Rh);
      Mat k3 = ric(Mat(U + (hh / 2) * k2), Rh);
      Mat k4 = ric(Mat(U + hh * k3), R1);
      U += (hh / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    };
    int ng = int(std::ceil(guard / h));
    // unstable tensor: forward Riccati warmed up from -guard, kept on the
    // half grid for the principal-solution propagation
    std::vector<Mat> Rb(2 * ng + 1);
    {
      GeodesicOrbit back;
      back.init(M, x, v);
      Rb[0] = Rs[0];
      for (int j = 1; j <= 2 * ng; ++j) {
        back.step(-h / 2);
        Rb[j] = back.r_jac();
      }
    }
    std::vector<Mat> Uu(2 * nS + 1);
    {
      Mat U = I_p;
      for (int k = ng; k > 0; --k) rk4(U, Rb[2 * k], Rb[2 * k - 1], Rb[2 * k - 2], h);
      Uu[0] = U;
      for (int j = 0; j < 2 * nS; ++j) {
        // half-grid stride; midpoint curvature by averaging the endpoints
        rk4(U, Rs[j], Mat(0.5 * (Rs[j] + Rs[j + 1])), Rs[j + 1], h / 2);
        Uu[j + 1] = U;
      }
    }
    // stable tensor: backward Riccati from S + guard, full-grid values
    std::vector<Mat> Us(nS + 1);
    {
      GeodesicOrbit fwd;
      fwd.init(M, xs[nS], Vec(Es[nS].col(0)));
      std::vector<Mat> Rf(2 * ng + 1);
      Rf[0] = Rs[2 * nS];
      for (int j = 1; j <= 2 * ng; ++j) {
        fwd.step(h / 2);
        Rf[j] = fwd.r_jac();
      }
      Mat U = -I_p;
      for (int k = ng; k > 0; --k) rk4(U, Rf[2 * k], Rf[2 * k - 1], Rf[2 * k - 2], -h);
      Us[nS] = U;
      for (int k = nS; k > 0; --k) {
        rk4(U, Rs[2 * k], Rs[2 * k - 1], Rs[2 * k - 2], -h);
        Us[k - 1] = U;
      }
    }
    // principal solution P' = U_u P and the trapezoid accumulation of
    // b_k = P_k^{-1} (U_u - U_s)^{-1} upsilon_k
    Mat P = I_p;
    Vec acc = Vec::Zero(p), bprev(p), bcur(p);
    std::vector<double> fit_s, fit_ln;
    auto bval = [&](int k, Vec& out) {
      Vec upn(p);
      Vec up = upsilon(c, xs[k], Vec(Es[k].col(0)));
      Mat G;
      M.g(xs[k], G);
      for (int a = 0; a < p; ++a) upn[a] = Es[k].col(a + 1).dot(G * up);
      Vec a_k = (Uu[2 * k] - Us[k]).partialPivLu().solve(upn);
      out = P.partialPivLu().solve(a_k);
    };
    bval(0, bprev);
    for (int k = 1; k <= nS; ++k) {
      Mat k1 = Uu[2 * k - 2] * P;
      Mat k2 = Uu[2 * k - 1] * (P + (h / 2) * k1);
      Mat k3 = Uu[2 * k - 1] * (P + (h / 2) * k2);
      Mat k4 = Uu[2 * k] * (P + h * k3);
      P += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
      bval(k, bcur);
      acc += (h / 2) * (bprev + bcur);
      double nb = bcur.norm();
      if (nb > 1e-250) {
        fit_s.push_back(k * h);
        fit_ln.push_back(std::log(nb));
      }
      bprev = bcur;
    }
    yf = Uu[0] * acc;
    if (info) {
      info->nodes = nS;
      info->tail = bprev.norm();
      info->tau = 0;
      if (fit_s.size() >= 5) {  // least-squares slope of ln|b|
        double n = double(fit_s.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < fit_s.size(); ++i) {
          sx += fit_s[i];
          sy += fit_ln[i];
          sxx += fit_s[i] * fit_s[i];
          sxy += fit_s[i] * fit_ln[i];
        }
        info->tau = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
        if (info->tau > 0.05) info->tail = bprev.norm() / info->tau;
      }
    }
  }
  Vec out = Vec::Zero(m);
  for (int a = 0; a < p; ++a) out += yf[a] * E0.col(a + 1);
  return out;
}

// C^1-size proxy of the curve tangent at one point: g-operator norm of the
// (1,1) form plus the g-norm of its covariant derivative.
inline double tangent_c1_at(const MetricCurve& c, const Vec& x) {
  const Metric& M = *c.g0;
  int m = M.m;
  Mat G, Gi, X;
  Ten3 DX, Gam;
  M.g(x, G);
  Gi = G.inverse();
  c.tangent(x, X);
  c.dtangent(x, DX);
  christoffel(M, x, Gam);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(X),
                                                               Eigen::MatrixXd(G)};
  double op = es.eigenvalues().cwiseAbs().maxCoeff();
  // nabla_k X_ij = d_k X_ij - Gam^l_ki X_lj - Gam^l_kj X_il
  double n2 = 0;
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double t = DX[k](i, j);
        for (int l = 0; l < m; ++l) t -= Gam[l](k, i) * X(l, j) + Gam[l](k, j) * X(i, l);
        for (int a = 0; a < m; ++a)
          for (int b = 0; b < m; ++b)
            for (int d = 0; d < m; ++d) {
              double t2 = DX[a](b, d);
              for (int l = 0; l < m; ++l)
                t2 -= Gam[l](a, b) * X(l, d) + Gam[l](a, d) * X(b, l);
              n2 += Gi(k, a) * Gi(i, b) * Gi(j, d) * t * t2;
            }
      }
  return op + std::sqrt(std::max(0.0, n2));
}

namespace detail_fiber {
// Evaluate f over the unit sphere at x (half-space orthonormal frame
// y * e_i) and return the average. Dimension 2 walks the circle; dimension 3
// uses a theta-phi product grid with the sin(theta) area factor.
template <class F>
double average(int m, const Vec& x, int n, F&& f) {
  double y = x[m - 1];
  if (m == 2) {
    double acc = 0;
    for (int l = 0; l < n; ++l) {
      double th = 2 * M_PI * (l + 0.5) / n;
      Vec v(2);
      v << y * std::cos(th), y * std::sin(th);
      acc += f(v);
    }
    return acc / n;
  }
  int nt = n / 2, np = n;
  double acc = 0, wsum = 0;
  for (int a = 0; a < nt; ++a) {
    double th = M_PI * (a + 0.5) / nt, w = std::sin(th);
    for (int b = 0; b < np; ++b) {
      double ph = 2 * M_PI * (b + 0.5) / np;
      Vec v(3);
      v << y * std::sin(th) * std::cos(ph), y * std::sin(th) * std::sin(ph),
          y * std::cos(th);
      acc += w * f(v);
      wsum += w;
    }
  }
  return acc / wsum;
}
}  // namespace detail_fiber

struct GreatTermsOptions {
  Vec support_center;         // bounding disk of the curve-tangent support
  double support_radius = 0;  // hyperbolic radius; 0 disables shadow culling
  double window_radius = 9;   // window for the pointwise terms
  int n_rad = 48, n_ang = 48, n_fiber = 16;  // pointwise-term grids
  // Div Y quadrature: its window reaches support_radius + div_reach, angular
  // and fiber grids are separate because the integrand is much rougher
  double div_reach = 3.5;
  double panel_w = 0.45;  // max width of a radial Gauss-Legendre panel
  bool volume_div = true;  // also run the (expensive) volume-form quadrature
  int n_ang_div = 32, n_fiber_div = 64, n_fiber_shadow = 24;
  int n_boundary = 48;     // nodes of the boundary-form cross-check
  double S = 15, h_orbit = 0.02;
  double fd_scale = 3e-3;  // chart-relative step of the leafwise divergence
};

struct GreatTermsReport {
  // window integrals (fiber-averaged) of the four first-variation terms of
  // the linear drift: the trace-gradient term, the two terms from the
  // variation of the field's unit norm, and the divergence of the Y field
  double grad_trace = 0;
  double norm_var_div = 0;
  double norm_var_transport = 0;
  double div_y = 0;
  double total = 0;
  // same Div Y integral moved to the window boundary by the divergence
  // theorem (the interior part pairs Y against the radial kernel gradient
  // and vanishes since Y has no radial component)
  double div_y_boundary = 0;
  double vol_derivative = 0;  // half the window integral of trace X
  double window_volume = 0;
  double x_c1 = 0;            // C^1-size proxy of the tangent over the window
  double odd_fiber_max = 0;   // largest |fiber avg| of the two odd terms
};

// Leafwise divergence of x' -> Y(x', direction toward xi) by central
// differences of the density-weighted components.
inline double div_y_leaf(const MetricCurve& c, const Vec& x, const Vec& v,
                         const GreatTermsOptions& o) {
  const Metric& M = *c.g0;
  BoundaryPoint bp = forward_boundary_point(x, v);
  double hs = o.fd_scale * x[M.m - 1];
  const Vec* cc = o.support_radius > 0 ? &o.support_center : nullptr;
  double acc = 0;
  for (int i = 0; i < M.m; ++i) {
    Vec xp = x, xm = x;
    xp[i] += hs;
    xm[i] -= hs;
    Vec Yp = y_field(c, xp, leaf_direction(xp, bp), o.S, o.h_orbit, 8, nullptr, cc,
                     o.support_radius);
    Vec Ym = y_field(c, xm, leaf_direction(xm, bp), o.S, o.h_orbit, 8, nullptr, cc,
                     o.support_radius);
    acc += (sqrt_det_g(M, xp) * Yp[i] - sqrt_det_g(M, xm) * Ym[i]) / (2 * hs);
  }
  return acc / sqrt_det_g(M, x);
}

namespace detail_fiber {
// 7-point Gauss-Legendre nodes and weights on [-1, 1]
constexpr double gl7_x[7] = {-0.9491079123427585, -0.7415311855993945,
                             -0.4058451513773972, 0.0,
                             0.4058451513773972,  0.7415311855993945,
                             0.9491079123427585};
constexpr double gl7_w[7] = {0.1294849661688697, 0.2797053914892766,
                             0.3818300505051189, 0.4179591836734694,
                             0.3818300505051189, 0.2797053914892766,
                             0.1294849661688697};
}  // namespace detail_fiber

// First-variation terms of the linear drift at the curvature -1 base in
// dimension 2, integrated over a hyperbolic polar window against the
// Liouville measure (volume times normalized fiber angle). The three
// pointwise terms use a plain midpoint grid; the Div Y term gets its own
// smaller window, Gauss-Legendre radial panels split where the fiber rule
// switches from the full circle to the support shadow, and a much denser
// fiber grid, because Y varies on the angular scale of the support.
inline GreatTermsReport great_terms(const MetricCurve& c, const GreatTermsOptions& o) {
  const Metric& M = *c.g0;
  require(M.m == 2, "window quadrature is two-dimensional");
  require(M.constant_curvature == -1, "base must be the curvature -1 model");
  double ell = double(M.m - 1);  // -Div of the forward field on the base
  GreatTermsReport rep;
  double yc = o.support_center[1];
  double sinh_rs = std::sinh(o.support_radius);
  auto base_point = [&](double r, double phi) {
    Vec x = o.support_center;
    Vec dir(2);
    dir << r * yc * std::cos(phi), r * yc * std::sin(phi);
    exp_map(M, x, dir, (Mat*)nullptr, 0.02);
    return x;
  };

  // The three pointwise integrands and the volume derivative all carry a
  // factor of the tensor or its gradient, so when the support is declared the
  // window tightens to it and the same node counts buy real resolution.
  double r_pt = o.support_radius > 0 ? std::min(o.support_radius + 0.02, o.window_radius)
                                     : o.window_radius;
  double dr = r_pt / o.n_rad;
  double dphi = 2 * M_PI / o.n_ang;
  for (int i = 0; i < o.n_rad; ++i) {
    double r = (i + 0.5) * dr;
    double w_r = std::sinh(r) * dr * dphi;
    for (int j = 0; j < o.n_ang; ++j) {
      Vec x = base_point(r, j * dphi);
      double y = x[1];
      Mat G, Gi, X;
      Ten3 DX, dGb, Gam;
      M.g(x, G);
      Gi = G.inverse();
      c.tangent(x, X);
      c.dtangent(x, DX);
      M.dg(x, dGb);
      christoffel(M, x, Gam);
      double tr = (Gi * X).trace();
      Vec dtr(2);
      for (int k = 0; k < 2; ++k)
        dtr[k] = (-Gi * dGb[k] * Gi * X + Gi * DX[k]).trace();
      double s1 = 0, s2 = 0, s3 = 0;
      for (int l = 0; l < o.n_fiber; ++l) {
        double th = 2 * M_PI * (l + 0.5) / o.n_fiber;
        Vec v(2);
        v << y * std::cos(th), y * std::sin(th);
        double xvv = v.dot(X * v);
        s1 += -0.5 * v.dot(dtr);
        s2 += -0.5 * ell * xvv;
        // covariant transport derivative of X(v, v) along the orbit
        Mat A = v[0] * DX[0] + v[1] * DX[1];
        Mat W(2, 2);
        for (int a = 0; a < 2; ++a) W.row(a) = (Gam[a] * v).transpose();
        s3 += 0.5 * v.dot((A - W.transpose() * X - X * W) * v);
      }
      s1 /= o.n_fiber;
      s2 /= o.n_fiber;
      s3 /= o.n_fiber;
      rep.odd_fiber_max = std::max({rep.odd_fiber_max, std::abs(s1), std::abs(s3)});
      rep.grad_trace += w_r * s1;
      rep.norm_var_div += w_r * s2;
      rep.norm_var_transport += w_r * s3;
      rep.vol_derivative += w_r * 0.5 * tr;
      rep.window_volume += w_r;
    }
  }
  // C^1-size proxy on a fixed coarse grid, independent of the main grids
  double r_c1 = o.support_radius > 0 ? std::min(o.support_radius, o.window_radius)
                                     : o.window_radius;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 12; ++j)
      rep.x_c1 = std::max(
          rep.x_c1, tangent_c1_at(c, base_point((i + 0.5) * r_c1 / 10, j * M_PI / 6)));

  // Div Y fiber average at one base point: full circle inside the support
  // neighborhood, a trapezoid over the widened shadow of the support beyond
  auto div_avg = [&](const Vec& x) {
    double y = x[1];
    double d = o.support_radius > 0 ? dist_halfspace(x, o.support_center) : 0;
    double s4 = 0;
    if (o.support_radius == 0 || d <= o.support_radius + 0.7) {
      for (int l = 0; l < o.n_fiber_div; ++l) {
        double th = 2 * M_PI * (l + 0.5) / o.n_fiber_div;
        Vec v(2);
        v << y * std::cos(th), y * std::sin(th);
        s4 += -div_y_leaf(c, x, v, o) / o.n_fiber_div;
      }
    } else {
      double half = std::asin(std::min(1.0, sinh_rs / std::sinh(d)));
      Vec w = log_map_halfspace(x, o.support_center);
      double thc = std::atan2(w[1], w[0]);
      double lo = thc - 1.3 * half - 0.02, hi = thc + 1.3 * half + 0.02;
      double dth = (hi - lo) / (o.n_fiber_shadow - 1);
      for (int l = 0; l < o.n_fiber_shadow; ++l) {
        double th = lo + l * dth;
        Vec v(2);
        v << y * std::cos(th), y * std::sin(th);
        double wt = (l == 0 || l == o.n_fiber_shadow - 1) ? 0.5 : 1.0;
        s4 += -div_y_leaf(c, x, v, o) * wt * dth / (2 * M_PI);
      }
    }
    return s4;
  };
  double rb = std::min(o.window_radius,
                       o.support_radius > 0 ? o.support_radius + o.div_reach
                                            : o.window_radius);
  // composite Gauss-Legendre panels: edges at the support radius and at the
  // fiber-rule switch (integrand kinks), then at most panel_w wide
  std::vector<double> edges{0};
  if (o.support_radius > 0) {
    if (o.support_radius < rb) edges.push_back(o.support_radius);
    if (o.support_radius + 0.7 < rb) edges.push_back(o.support_radius + 0.7);
  }
  edges.push_back(rb);
  for (size_t e = 0; e + 1 < edges.size();) {
    if (edges[e + 1] - edges[e] > o.panel_w)
      edges.insert(edges.begin() + e + 1, edges[e] + o.panel_w);
    else
      ++e;
  }
  double dphi4 = 2 * M_PI / o.n_ang_div;
  if (o.volume_div)
    for (size_t e = 0; e + 1 < edges.size(); ++e) {
      double mid = 0.5 * (edges[e] + edges[e + 1]), hw = 0.5 * (edges[e + 1] - edges[e]);
      for (int q = 0; q < 7; ++q) {
        double r = mid + hw * detail_fiber::gl7_x[q];
        double w_r = hw * detail_fiber::gl7_w[q] * std::sinh(r) * dphi4;
        for (int j = 0; j < o.n_ang_div; ++j)
          rep.div_y += w_r * div_avg(base_point(r, j * dphi4));
      }
    }
  // boundary form: the interior pairing of Y with the radial kernel gradient
  // vanishes, so the same integral is minus the flux of the fiber-averaged Y
  // through the window edge
  if (o.support_radius > 0) {
    double y_flux = 0;
    for (int j = 0; j < o.n_boundary; ++j) {
      Vec x = base_point(rb, j * 2 * M_PI / o.n_boundary);
      double y = x[1];
      Vec lg = log_map_halfspace(x, o.support_center);
      Vec n_out = Vec(-lg / rb);  // outward g-unit normal of the window
      Mat G;
      M.g(x, G);
      double d = dist_halfspace(x, o.support_center);
      double half = std::asin(std::min(1.0, sinh_rs / std::sinh(d)));
      double thc = std::atan2(lg[1], lg[0]);
      double lo = thc - 1.3 * half - 0.02, hi = thc + 1.3 * half + 0.02;
      double dth = (hi - lo) / (o.n_fiber_shadow - 1);
      double avg = 0;
      for (int l = 0; l < o.n_fiber_shadow; ++l) {
        double th = lo + l * dth;
        Vec v(2);
        v << y * std::cos(th), y * std::sin(th);
        Vec Y = y_field(c, x, v, o.S, o.h_orbit, 8, nullptr, &o.support_center,
                        o.support_radius);
        double wt = (l == 0 || l == o.n_fiber_shadow - 1) ? 0.5 : 1.0;
        avg += Y.dot(G * n_out) * wt * dth / (2 * M_PI);
      }
      y_flux += avg * std::sinh(rb) * 2 * M_PI / o.n_boundary;
    }
    rep.div_y_boundary = -y_flux;
  }
  // the assembled value pairs the divergence term in its boundary-flux form
  // when the support is declared: the two are equal by the divergence theorem
  // (the interior pairing of Y with the kernel gradient vanishes pointwise),
  // and the flux form carries no radial quadrature of the peaked integrand
  double div_term = o.support_radius > 0 ? rep.div_y_boundary : rep.div_y;
  rep.total = rep.grad_trace + rep.norm_var_div + rep.norm_var_transport + div_term;
  return rep;
}

// Half the window integral of trace X: the lambda-derivative of the window
// volume along the curve. Cheap polar quadrature, used to balance
// volume-preserving combinations.
inline double volume_derivative(const MetricCurve& c, const Vec& center, double radius,
                                int n_rad = 80, int n_ang = 64) {
  const Metric& M = *c.g0;
  require(M.m == 2, "window quadrature is two-dimensional");
  double dr = radius / n_rad, dphi = 2 * M_PI / n_ang, yc = center[1];
  double acc = 0;
  for (int i = 0; i < n_rad; ++i) {
    double r = (i + 0.5) * dr;
    for (int j = 0; j < n_ang; ++j) {
      double phi = j * dphi;
      Vec x = center;
      Vec dir(2);
      dir << r * yc * std::cos(phi), r * yc * std::sin(phi);
      exp_map(M, x, dir, (Mat*)nullptr, 0.02);
      Mat G, X;
      M.g(x, G);
      c.tangent(x, X);
      acc += std::sinh(r) * dr * dphi * 0.5 * (G.inverse() * X).trace();
    }
  }
  return acc;
}

struct EntropyDerivativeReport {
  double grad_trace = 0;  // window average of -1/2 <grad trace X, Zbar>
  double div_term = 0;    // window average of Div(X(Zbar))
  double value = 0;       // their sum: the entropy derivative
  double raw_integral = 0;
  double window_volume = 0;
  double vol_derivative = 0;
};

// Entropy first variation at the locally symmetric base, where the
// second-order corrector vanishes and Zbar reduces to (m-1) times the
// forward field. Leafwise objects use the half-space boundary geometry.
inline EntropyDerivativeReport entropy_derivative_symmetric(const MetricCurve& c,
                                                            const Vec& center,
                                                            double radius, int n_rad = 48,
                                                            int n_ang = 48,
                                                            int n_fiber = 32,
                                                            double fd_scale = 1e-4) {
  const Metric& M = *c.g0;
  require(M.constant_curvature == -1, "base must be the curvature -1 model");
  int m = M.m;
  double ell = double(m - 1);
  EntropyDerivativeReport rep;
  double dr = radius / n_rad;
  double yc = center[m - 1];
  int n_ang_eff = m == 2 ? n_ang : n_ang * n_ang / 2;
  double g1 = 0, g2 = 0;
  for (int i = 0; i < n_rad; ++i) {
    double r = (i + 0.5) * dr;
    double area = m == 2 ? std::sinh(r) : std::sinh(r) * std::sinh(r);
    for (int j = 0; j < n_ang_eff; ++j) {
      // base direction grid: circle for m = 2, theta-phi product for m = 3
      Vec u(m);
      double wt_dir;
      if (m == 2) {
        double phi = 2 * M_PI * j / n_ang;
        u << std::cos(phi), std::sin(phi);
        wt_dir = 2 * M_PI / n_ang;
      } else {
        int a = j / n_ang, b = j % n_ang;
        double th = M_PI * (a + 0.5) / (n_ang / 2), ph = 2 * M_PI * b / n_ang;
        u << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th);
        wt_dir = std::sin(th) * (M_PI / (n_ang / 2)) * (2 * M_PI / n_ang);
      }
      double w_r = area * dr * wt_dir;
      Vec x = center;
      Vec dirv = (r * yc) * u;
      exp_map(M, x, dirv, (Mat*)nullptr, 0.02);
      Mat G, Gi, X;
      Ten3 DX, dGb;
      M.g(x, G);
      Gi = G.inverse();
      c.tangent(x, X);
      c.dtangent(x, DX);
      M.dg(x, dGb);
      double tr = (Gi * X).trace();
      Vec dtr(m);
      for (int k = 0; k < m; ++k)
        dtr[k] = (-Gi * dGb[k] * Gi * X + Gi * DX[k]).trace();
      double f1 = detail_fiber::average(m, x, n_fiber, [&](const Vec& v) {
        return -0.5 * ell * v.dot(dtr);
      });
      double f2 = detail_fiber::average(m, x, n_fiber, [&](const Vec& v) {
        BoundaryPoint bp = forward_boundary_point(x, v);
        double hs = fd_scale * x[m - 1];
        double acc = 0;
        for (int k = 0; k < m; ++k) {
          Vec xp = x, xm = x;
          xp[k] += hs;
          xm[k] -= hs;
          Mat Gp, Xp, Gm2, Xm2;
          M.g(xp, Gp);
          c.tangent(xp, Xp);
          M.g(xm, Gm2);
          c.tangent(xm, Xm2);
          Vec Wp = ell * (Gp.inverse() * Xp * leaf_direction(xp, bp));
          Vec Wm = ell * (Gm2.inverse() * Xm2 * leaf_direction(xm, bp));
          acc += (sqrt_det_g(M, xp) * Wp[k] - sqrt_det_g(M, xm) * Wm[k]) / (2 * hs);
        }
        return acc / sqrt_det_g(M, x);
      });
      g1 += w_r * f1;
      g2 += w_r * f2;
      rep.vol_derivative += w_r * 0.5 * tr;
      rep.window_volume += w_r;
    }
  }
  rep.grad_trace = g1 / rep.window_volume;
  rep.div_term = g2 / rep.window_volume;
  rep.value = rep.grad_trace + rep.div_term;
  rep.raw_integral = g1 + g2;
  return rep;
}

}  // namespace lab
