#pragma once

// Tests, confidence regions and point estimates derived from the p-value
// function, evaluated exactly, by Monte Carlo, or by the Wilks approximation.

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pvalfn/mc_engine.hpp"
#include "pvalfn/model.hpp"
#include "pvalfn/numerics.hpp"

namespace pvalfn {

enum class Method { exact, mc, wilks };

std::string_view to_string(Method m) noexcept;

struct PValue {
  double p = 0.0;
  double std_err = 0.0;
  Method method = Method::exact;
};

struct InferenceOptions {
  std::optional<mc::MonteCarloPlan> plan;
  numerics::OptimizerSettings root{200, 1e-8, 1e-10};
  /// Relative endpoint tolerance when the p-value function is a Monte Carlo
  /// step function; finer resolution is below the simulation noise.
  double mc_x_tol = 1e-5;
  /// First outward step from the maximum-p point when bracketing endpoints.
  std::optional<double> initial_step;
  /// Search box for sup-over-nuisance marginal p-values.
  std::optional<std::vector<ParamInterval>> nuisance_box;
  int sup_grid_points = 101;
  /// Grid resolution for stair-step (discrete-model) curves.
  int discrete_grid_points = 2001;
};

/// Sampled p-value function. For models with a nuisance parameter the grid
/// holds interest values and p is the marginal p-value.
struct PValueCurve {
  std::vector<ParamPoint> grid;
  std::vector<double> p;
  std::vector<double> std_err;
  Method method = Method::exact;
  std::size_t datasets_simulated = 0;
};

struct Segment {
  double lo;
  double hi;
  bool lo_closed = false;
  bool hi_closed = false;
  double lo_std_err = 0.0;  // Monte Carlo endpoint uncertainty
  double hi_std_err = 0.0;

  bool contains(double x) const noexcept {
    return (x > lo || (lo_closed && x == lo)) && (x < hi || (hi_closed && x == hi));
  }
  bool lo_unbounded() const noexcept { return lo == -std::numeric_limits<double>::infinity(); }
  bool hi_unbounded() const noexcept { return hi == std::numeric_limits<double>::infinity(); }
};

/// {theta : p(theta) > alpha}. Scalar parameters are described by ordered
/// disjoint segments; higher-dimensional ones by the grid points retained.
struct ConfidenceRegion {
  double level = 0.95;
  std::vector<Segment> segments;
  std::vector<ParamPoint> grid_points;
  Method method = Method::exact;

  bool contains(double x) const noexcept;
};

/// A subset of the parameter space: either a box or a finite set of points.
struct ParamRegion {
  std::vector<ParamInterval> box;
  std::vector<ParamPoint> points;

  static ParamRegion point(std::vector<double> values);
  static ParamRegion from_box(std::vector<ParamInterval> box);
  bool is_points() const noexcept { return !points.empty(); }
  std::size_t dim() const noexcept;
  bool empty() const noexcept { return points.empty() && box.empty(); }
};

struct TestResult {
  ParamRegion null_region;
  double p_value;
  double std_err;
  double alpha;
  bool reject;
  Method method;
};

struct NamedInterval {
  std::string name;
  double lo;
  double hi;
};

/// p-value at a full parameter value.
PValue pvalue(const Model& model, const ParamPoint& theta, const DataSet& y, Method method,
              const InferenceOptions& opts = {});

/// 1 - G_d(2 log T), G_d the chi-square distribution function with d the
/// interest dimension; 0 when the statistic is infinite.
double wilks_pvalue(const Model& model, const ParamPoint& interest, const DataSet& y);

/// p-value function of the interest parameter: the ordinary p-value when the
/// model has no nuisance, else the marginal p-value (pivot path for
/// nuisance-free models, sup over opts.nuisance_box otherwise).
PValue interest_pvalue(const Model& model, const ParamPoint& psi, const DataSet& y, Method method,
                       const InferenceOptions& opts = {});

/// sup of pvalue over a region of the full parameter space.
PValue composite_pvalue(const Model& model, const ParamRegion& null_region, const DataSet& y, Method method,
                        const InferenceOptions& opts = {});

/// sup of interest_pvalue over a region of the interest space.
PValue interest_composite_pvalue(const Model& model, const ParamRegion& null_region, const DataSet& y,
                                 Method method, const InferenceOptions& opts = {});

/// sup over lambda in the box of pvalue((psi, lambda)).
PValue marginal_pvalue_sup(const Model& model, const ParamPoint& psi, const DataSet& y, Method method,
                           std::span<const ParamInterval> lambda_box, const InferenceOptions& opts = {});

TestResult test(const Model& model, const ParamRegion& null_region, const DataSet& y, double alpha,
                Method method, const InferenceOptions& opts = {});

PValueCurve pvalue_curve(const Model& model, std::span<const ParamPoint> grid, const DataSet& y, Method method,
                         const InferenceOptions& opts = {});

/// Region for a scalar parameter (param_dim == 1).
ConfidenceRegion confidence_region(const Model& model, const DataSet& y, double alpha, Method method,
                                   const InferenceOptions& opts = {});

/// Region for a scalar interest parameter under the marginal p-value function.
ConfidenceRegion marginal_confidence_region(const Model& model, const DataSet& y, double alpha, Method method,
                                            const InferenceOptions& opts = {});

/// Grid points of a sampled curve with p > alpha (any dimension).
ConfidenceRegion region_from_curve(const PValueCurve& curve, double alpha);

/// The maximizer of the p-value function, which for the likelihood-ratio
/// statistic is the maximum likelihood estimate.
ParamPoint max_pvalue_estimate(const Model& model, const DataSet& y);

/// Classical intervals for side-by-side reporting: Wald (binomial),
/// Fisher z (bivariate normal correlation), z-interval (normal mean).
std::vector<NamedInterval> comparison_intervals(const Model& model, const DataSet& y, double alpha);

/// Invert a scalar p-value function: bracket outward from `center`
/// geometrically and solve p = alpha on each side. Exposed for testing.
ConfidenceRegion invert_scalar(const std::function<PValue(double)>& p_of, double center,
                               const ParamInterval& domain, double alpha, Method method,
                               const InferenceOptions& opts);

/// Stair-step inversion: scan a grid over [lo, hi] and widen every run of
/// points with p > alpha to the neighbouring grid points.
ConfidenceRegion invert_on_grid(const std::function<PValue(double)>& p_of, const ParamInterval& domain,
                                double lo, double hi, int points, double alpha, Method method);

}  // namespace pvalfn
