#pragma once

// Numerical kernels: distribution functions, bracketed root finding and
// low-dimensional derivative-free minimization.

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace pvalfn::numerics {

struct Bracket {
  double lo;
  double hi;
  double f_lo;
  double f_hi;
};

/// Build a bracket by evaluating f at both ends. Throws BracketError when
/// the ends do not straddle a root.
Bracket make_bracket(const std::function<double(double)>& f, double lo, double hi);

struct OptimizerSettings {
  int max_iters = 200;
  double x_tol = 1e-8;   // scaled by (1 + |x|) where applicable
  double f_tol = 1e-10;
};

void validate(const OptimizerSettings& s);

// ---------------------------------------------------------------------------
// Special functions

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed directly.
double gamma_q(double a, double x);

double chisq1_cdf(double x);
/// Upper tail 1 - chisq1_cdf(x) without cancellation.
double chisq1_sf(double x);

/// Beta(n, 1) distribution function, x^n.
double beta_n1_cdf(double x, int n);
/// Inverse of beta_n1_cdf: p^(1/n).
double beta_n1_quantile(double p, int n);

double gamma_cdf(double x, double shape, double scale);
double gamma_sf(double x, double shape, double scale);

double normal_cdf(double z);
double normal_quantile(double p);

// ---------------------------------------------------------------------------
// Root finding and minimization

/// Root of f inside the bracket. Brent-style inverse quadratic steps with
/// bisection fallback; converges for any continuous f, and for step
/// functions locates the jump.
double find_root(const std::function<double(double)>& f, const Bracket& bracket,
                 const OptimizerSettings& settings = {});

struct Minimum1d {
  double argmin;
  double min;
};

/// Bounded Brent minimization on [lo, hi]. Both endpoints are evaluated and
/// the best point seen is returned, so boundary minima are found as well.
Minimum1d minimize_1d(const std::function<double(double)>& f, double lo, double hi,
                      const OptimizerSettings& settings = {});

struct MinimumNd {
  std::vector<double> argmin;
  double min;
  int evaluations;
};

/// Nelder-Mead simplex search (reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5) with one restart from the best vertex when the first run stalls.
MinimumNd minimize_nd(const std::function<double(std::span<const double>)>& f,
                      std::span<const double> start, const OptimizerSettings& settings = {});

}  // namespace pvalfn::numerics
