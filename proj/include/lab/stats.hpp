#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>
#include "lab/types.hpp"

namespace lab {

// Pairwise (tree) summation in a fixed order: the reduction is associative by
// construction, so results do not depend on how work was scheduled.
template <class S>
S pairwise_sum(const S* a, size_t n) {
  if (n == 0) return S(0);
  if (n <= 8) {
    S s = a[0];
    for (size_t i = 1; i < n; ++i) s += a[i];
    return s;
  }
  size_t h = n / 2;
  return pairwise_sum(a, h) + pairwise_sum(a + h, n - h);
}

template <class S>
S pairwise_sum(const std::vector<S>& a) {
  return pairwise_sum(a.data(), a.size());
}

template <class S>
struct MeanSE {
  S mean = 0;
  S se = 0;  // sample std / sqrt(n)
  size_t n = 0;
};

template <class S>
MeanSE<S> mean_se(const std::vector<S>& a) {
  MeanSE<S> r;
  r.n = a.size();
  if (r.n == 0) return r;
  r.mean = pairwise_sum(a) / S(r.n);
  if (r.n < 2) return r;
  std::vector<S> d2(r.n);
  for (size_t i = 0; i < r.n; ++i) d2[i] = (a[i] - r.mean) * (a[i] - r.mean);
  r.se = std::sqrt(pairwise_sum(d2) / S(r.n - 1) / S(r.n));
  return r;
}

// Regularized incomplete gamma P(a, x) by series, Q(a, x) by continued
// fraction; the usual split at x = a + 1 keeps both rapidly convergent.
template <class S>
S gamma_p(S a, S x) {
  if (x <= 0) return 0;
  if (x < a + 1) {
    S ap = a, sum = 1 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * S(1e-16)) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  // Lentz continued fraction for Q
  S tiny = S(1e-300);
  S b = x + 1 - a, c = 1 / tiny, d = 1 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    S an = -S(i) * (S(i) - a);
    b += 2;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1 / d;
    S del = d * c;
    h *= del;
    if (std::abs(del - 1) < S(1e-16)) break;
  }
  return 1 - std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

template <class S>
S gamma_q(S a, S x) {
  return 1 - gamma_p(a, x);
}

// Survival function of chi-square with k degrees of freedom.
template <class S>
S chi2_sf(S x, int k) {
  return gamma_q(S(k) / 2, x / 2);
}

// Chi-square uniformity statistic for equiprobable bins.
template <class S>
S chi2_uniform_stat(const std::vector<int>& counts) {
  S n = 0;
  for (int c : counts) n += S(c);
  S e = n / S(counts.size()), stat = 0;
  for (int c : counts) stat += (S(c) - e) * (S(c) - e) / e;
  return stat;
}

// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 l^2).
template <class S>
S kolmogorov_sf(S lam) {
  if (lam < S(1e-3)) return 1;
  S sum = 0, sign = 1;
  for (int j = 1; j <= 100; ++j) {
    S term = std::exp(-2 * S(j) * S(j) * lam * lam);
    sum += sign * term;
    if (term < S(1e-16)) break;
    sign = -sign;
  }
  return std::min<S>(1, std::max<S>(0, 2 * sum));
}

template <class S>
struct KsResult {
  S d = 0;  // sup-norm statistic
  S p = 1;  // asymptotic p-value with the small-sample correction
};

// One-sample test against a CDF (any callable double -> double).
template <class S, class Cdf>
KsResult<S> ks_one_sample(std::vector<S> x, Cdf cdf) {
  std::sort(x.begin(), x.end());
  size_t n = x.size();
  KsResult<S> r;
  for (size_t i = 0; i < n; ++i) {
    S f = cdf(x[i]);
    r.d = std::max(r.d, std::max<S>(S(i + 1) / S(n) - f, f - S(i) / S(n)));
  }
  S sq = std::sqrt(S(n));
  r.p = kolmogorov_sf((sq + S(0.12) + S(0.11) / sq) * r.d);
  return r;
}

template <class S>
KsResult<S> ks_two_sample(std::vector<S> a, std::vector<S> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  size_t i = 0, j = 0;
  KsResult<S> r;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) ++i;
    else ++j;
    r.d = std::max(r.d, std::abs(S(i) / S(a.size()) - S(j) / S(b.size())));
  }
  S ne = std::sqrt(S(a.size()) * S(b.size()) / S(a.size() + b.size()));
  r.p = kolmogorov_sf((ne + S(0.12) + S(0.11) / ne) * r.d);
  return r;
}

// Fixed-width histogram; out-of-range samples clamp into the edge bins.
template <class S>
std::vector<int> histogram(const std::vector<S>& x, S lo, S hi, int nbins) {
  std::vector<int> counts(nbins, 0);
  for (S v : x) {
    int b = int((v - lo) / (hi - lo) * S(nbins));
    counts[std::min(nbins - 1, std::max(0, b))]++;
  }
  return counts;
}

}  // namespace lab
