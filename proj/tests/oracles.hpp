#pragma once

// Reference computations written independently of the library code paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// P(a = n, x) for integer n via the Poisson sum.
inline double gamma_p_int(int n, double x) {
  double term = std::exp(-x), sum = 0.0;
  for (int k = 0; k < n; ++k) {
    sum += term;
    term *= x / (k + 1);
  }
  return 1.0 - sum;
}

inline double chisq1_sf(double x) { return std::erfc(std::sqrt(x / 2.0)); }

inline double bisect(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Exponential p-value: n*ybar/theta ~ Gamma(n, 1), statistic a function of z - 1 - log z.
inline double exponential_pvalue(int n, double ybar, double theta) {
  const double z = ybar / theta;
  const auto h = [](double u) { return u - 1.0 - std::log(u); };
  const double level = h(z);
  if (level == 0.0) return 1.0;
  double lo = z, hi = z;
  if (z < 1.0) {
    hi = bisect([&](double u) { return h(u) - level; }, 1.0, 1e3);
  } else {
    lo = bisect([&](double u) { return h(u) - level; }, 1e-300, 1.0);
  }
  return gamma_p_int(n, n * lo) + (1.0 - gamma_p_int(n, n * hi));
}

// Binomial p-value by enumeration: sum of pmf over outcomes at least as extreme.
inline double binomial_pvalue(int n, int y, double theta) {
  const auto loglik = [&](int k, double t) {
    const double a = k == 0 ? 0.0 : k * std::log(t);
    const double b = k == n ? 0.0 : (n - k) * std::log1p(-t);
    return a + b;
  };
  const auto lr = [&](int k) { return loglik(k, static_cast<double>(k) / n) - loglik(k, theta); };
  const double obs = lr(y);
  double p = 0.0;
  for (int k = 0; k <= n; ++k) {
    if (lr(k) >= obs - 1e-12 * (1.0 + obs)) {
      p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + loglik(k, theta));
    }
  }
  return std::min(p, 1.0);
}

// Two-sample Kolmogorov-Smirnov distance.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace oracle
