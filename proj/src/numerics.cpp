#include "pvalfn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pvalfn/errors.hpp"

namespace pvalfn::numerics {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;
constexpr int kSeriesMaxTerms = 10000;

// Series for P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int k = 0; k < kSeriesMaxTerms; ++k) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x), valid for x >= a + 1.
double gamma_q_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kSeriesMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void check_gamma_args(double a, double x) {
  if (!(a > 0.0)) throw DomainError("incomplete gamma: shape must be positive");
  if (!(x >= 0.0)) throw DomainError("incomplete gamma: argument must be nonnegative");
}

}  // namespace

Bracket make_bracket(const std::function<double(double)>& f, double lo, double hi) {
  if (!(lo < hi)) throw BracketError("bracket requires lo < hi");
  Bracket b{lo, hi, f(lo), f(hi)};
  if (std::isnan(b.f_lo) || std::isnan(b.f_hi)) throw BracketError("bracket endpoint evaluates to NaN");
  if (b.f_lo * b.f_hi > 0.0) throw BracketError("no sign change in bracket");
  return b;
}

void validate(const OptimizerSettings& s) {
  if (s.max_iters < 1 || !(s.x_tol > 0.0) || !(s.f_tol > 0.0)) {
    throw DomainError("optimizer settings must be strictly positive");
  }
}

double gamma_p(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_continued_fraction(a, x);
}

double gamma_q(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_continued_fraction(a, x);
}

double chisq1_cdf(double x) {
  if (!(x >= 0.0)) throw DomainError("chisq1_cdf: x must be nonnegative");
  return gamma_p(0.5, 0.5 * x);
}

double chisq1_sf(double x) {
  if (!(x >= 0.0)) throw DomainError("chisq1_sf: x must be nonnegative");
  return gamma_q(0.5, 0.5 * x);
}

double beta_n1_cdf(double x, int n) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("beta_n1_cdf: x must lie in [0, 1]");
  if (n < 1) throw DomainError("beta_n1_cdf: n must be at least 1");
  return std::pow(x, n);
}

double beta_n1_quantile(double p, int n) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("beta_n1_quantile: p must lie in [0, 1]");
  if (n < 1) throw DomainError("beta_n1_quantile: n must be at least 1");
  return std::pow(p, 1.0 / n);
}

double gamma_cdf(double x, double shape, double scale) {
  if (!(scale > 0.0)) throw DomainError("gamma_cdf: scale must be positive");
  return gamma_p(shape, x / scale);
}

double gamma_sf(double x, double shape, double scale) {
  if (!(scale > 0.0)) throw DomainError("gamma_sf: scale must be positive");
  return gamma_q(shape, x / scale);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double find_root(const std::function<double(double)>& f, const Bracket& bracket,
                 const OptimizerSettings& settings) {
  validate(settings);
  if (!(bracket.lo < bracket.hi)) throw BracketError("bracket requires lo < hi");
  double a = bracket.lo, b = bracket.hi;
  double fa = bracket.f_lo, fb = bracket.f_hi;
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (fa * fb > 0.0) throw BracketError("no sign change in bracket");

  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < settings.max_iters; ++iter) {
    if (fb * fc > 0.0) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = 2.0 * kEps * std::fabs(b) + 0.5 * settings.x_tol * (1.0 + std::fabs(b));
    const double m = 0.5 * (c - b);
    if (std::fabs(m) <= tol || fb == 0.0 || std::fabs(fb) <= settings.f_tol) return b;

    if (std::fabs(e) >= tol && std::fabs(fa) > std::fabs(fb)) {
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        const double qa = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
        q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::fabs(p);
      if (2.0 * p < std::min(3.0 * m * q - std::fabs(tol * q), std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += (std::fabs(d) > tol) ? d : (m > 0.0 ? tol : -tol);
    fb = f(b);
    if (std::isnan(fb)) throw NumericalError("find_root: function returned NaN");
  }
  return b;
}

Minimum1d minimize_1d(const std::function<double(double)>& f, double lo, double hi,
                      const OptimizerSettings& settings) {
  validate(settings);
  if (!(lo < hi)) throw DomainError("minimize_1d: requires lo < hi");
  const double golden = 0.5 * (3.0 - std::sqrt(5.0));

  Minimum1d best{lo, f(lo)};
  auto consider = [&best](double x, double fx) {
    if (fx < best.min || std::isnan(best.min)) best = {x, fx};
  };
  consider(hi, f(hi));

  double a = lo, b = hi;
  double x = a + golden * (b - a);
  double w = x, v = x;
  double fx = f(x);
  consider(x, fx);
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  for (int iter = 0; iter < settings.max_iters; ++iter) {
    const double xm = 0.5 * (a + b);
    const double tol1 = 0.5 * settings.x_tol * (1.0 + std::fabs(x)) + 1e-3 * kEps;
    const double tol2 = 2.0 * tol1;
    if (std::fabs(x - xm) <= tol2 - 0.5 * (b - a)) break;

    bool golden_step = true;
    if (std::fabs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::fabs(q);
      const double etemp = e;
      e = d;
      if (std::fabs(p) < std::fabs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (xm - x >= 0.0) ? tol1 : -tol1;
        golden_step = false;
      }
    }
    if (golden_step) {
      e = (x >= xm) ? a - x : b - x;
      d = golden * e;
    }
    const double u = (std::fabs(d) >= tol1) ? x + d : x + (d >= 0.0 ? tol1 : -tol1);
    const double fu = f(u);
    consider(u, fu);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return best;
}

namespace {

struct Simplex {
  std::vector<std::vector<double>> vertices;
  std::vector<double> values;
};

double finite_or_inf(double v) { return std::isnan(v) ? std::numeric_limits<double>::infinity() : v; }

Simplex initial_simplex(const std::function<double(std::span<const double>)>& f,
                        std::span<const double> start, int& evals) {
  const std::size_t n = start.size();
  Simplex s;
  s.vertices.emplace_back(start.begin(), start.end());
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(start.begin(), start.end());
    v[i] += std::fabs(v[i]) > 1e-8 ? 0.1 * std::fabs(v[i]) : 0.1;
    s.vertices.push_back(std::move(v));
  }
  for (const auto& v : s.vertices) {
    s.values.push_back(finite_or_inf(f(v)));
    ++evals;
  }
  return s;
}

// One Nelder-Mead run; returns true when it stopped on tolerance.
bool nelder_mead_run(const std::function<double(std::span<const double>)>& f, Simplex& s,
                     const OptimizerSettings& settings, int& evals) {
  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
  const std::size_t n = s.vertices.size() - 1;
  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);

  for (int iter = 0; iter < settings.max_iters; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return s.values[i] < s.values[j]; });
    const auto& best = s.vertices[order.front()];
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[n - 1];

    double x_spread = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      const auto& v = s.vertices[order[k]];
      for (std::size_t i = 0; i < n; ++i) {
        x_spread = std::max(x_spread, std::fabs(v[i] - best[i]) / (1.0 + std::fabs(best[i])));
      }
    }
    const double f_spread = s.values[worst] - s.values[order.front()];
    if (x_spread <= settings.x_tol && f_spread <= settings.f_tol) return true;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& v = s.vertices[order[k]];
      for (std::size_t i = 0; i < n; ++i) centroid[i] += v[i] / static_cast<double>(n);
    }
    const auto& xw = s.vertices[worst];
    for (std::size_t i = 0; i < n; ++i) trial[i] = centroid[i] + kReflect * (centroid[i] - xw[i]);
    const double fr = finite_or_inf(f(trial));
    ++evals;

    if (fr < s.values[order.front()]) {
      for (std::size_t i = 0; i < n; ++i) trial2[i] = centroid[i] + kExpand * (trial[i] - centroid[i]);
      const double fe = finite_or_inf(f(trial2));
      ++evals;
      if (fe < fr) {
        s.vertices[worst] = trial2;
        s.values[worst] = fe;
      } else {
        s.vertices[worst] = trial;
        s.values[worst] = fr;
      }
      continue;
    }
    if (fr < s.values[second_worst]) {
      s.vertices[worst] = trial;
      s.values[worst] = fr;
      continue;
    }
    // Contraction: outside if the reflection improved on the worst, else inside.
    const bool outside = fr < s.values[worst];
    for (std::size_t i = 0; i < n; ++i) {
      trial2[i] = outside ? centroid[i] + kContract * (trial[i] - centroid[i])
                          : centroid[i] + kContract * (xw[i] - centroid[i]);
    }
    const double fc = finite_or_inf(f(trial2));
    ++evals;
    if (fc < (outside ? fr : s.values[worst])) {
      s.vertices[worst] = trial2;
      s.values[worst] = fc;
      continue;
    }
    const auto best_copy = s.vertices[order.front()];
    for (std::size_t k = 1; k <= n; ++k) {
      auto& v = s.vertices[order[k]];
      for (std::size_t i = 0; i < n; ++i) v[i] = best_copy[i] + kShrink * (v[i] - best_copy[i]);
      s.values[order[k]] = finite_or_inf(f(v));
      ++evals;
    }
  }
  return false;
}

}  // namespace

MinimumNd minimize_nd(const std::function<double(std::span<const double>)>& f,
                      std::span<const double> start, const OptimizerSettings& settings) {
  validate(settings);
  if (start.empty()) throw DomainError("minimize_nd: empty start vector");
  const double f0 = f(start);
  if (!std::isfinite(f0)) throw DomainError("minimize_nd: objective is not finite at the start point");

  int evals = 1;
  auto best_of = [](const Simplex& s) {
    const auto it = std::min_element(s.values.begin(), s.values.end());
    const auto idx = static_cast<std::size_t>(it - s.values.begin());
    return MinimumNd{s.vertices[idx], *it, 0};
  };

  Simplex s = initial_simplex(f, start, evals);
  nelder_mead_run(f, s, settings, evals);
  MinimumNd result = best_of(s);

  // Restart once from the best vertex to escape a collapsed simplex.
  Simplex restart = initial_simplex(f, result.argmin, evals);
  nelder_mead_run(f, restart, settings, evals);
  MinimumNd second = best_of(restart);
  if (second.min < result.min) result = std::move(second);

  if (!(result.min <= f0)) result = {std::vector<double>(start.begin(), start.end()), f0, 0};
  result.evaluations = evals;
  return result;
}

}  // namespace pvalfn::numerics
