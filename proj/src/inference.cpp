#include "pvalfn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pvalfn/errors.hpp"
#include "pvalfn/statistic.hpp"

namespace pvalfn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const mc::MonteCarloPlan& require_plan(const InferenceOptions& opts) {
  if (!opts.plan) throw ContractError("method mc requires a Monte Carlo plan");
  return *opts.plan;
}

void check_interest(const Model& model, std::span<const double> psi) {
  if (psi.size() != model.interest_dim()) {
    throw DomainError(std::string(model.name()) + ": interest value has dimension " + std::to_string(psi.size()) +
                      ", expected " + std::to_string(model.interest_dim()));
  }
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (!model.domain()[i].contains(psi[i])) {
      throw DomainError(std::string(model.name()) + ": " + model.labels()[i] + " = " + std::to_string(psi[i]) +
                        " is outside the parameter space");
    }
  }
}

ParamPoint interest_point(const Model& model, std::vector<double> values) {
  std::vector<std::string> labels(model.labels().begin(),
                                  model.labels().begin() + static_cast<std::ptrdiff_t>(values.size()));
  return ParamPoint(std::move(values), std::move(labels));
}

// Move a point that sits on an excluded boundary slightly inside the domain.
double nudge_inside(double x, const ParamInterval& domain) {
  if (domain.contains(x)) return x;
  const double eps = 1e-9 * (1.0 + std::fabs(x));
  if (x <= domain.lo) return domain.lo + eps;
  if (x >= domain.hi) return domain.hi - eps;
  return x;
}

struct ClippedBox {
  std::vector<double> lo;
  std::vector<double> hi;
};

// Finite search box: intersect with the model domain and replace infinite
// ends by a wide window around the maximum-p point.
ClippedBox clip_box(std::span<const ParamInterval> box, std::span<const ParamInterval> domain,
                    std::span<const double> center) {
  ClippedBox out;
  for (std::size_t i = 0; i < box.size(); ++i) {
    double lo = std::max(box[i].lo, domain[i].lo);
    double hi = std::min(box[i].hi, domain[i].hi);
    if (lo > hi) throw DomainError("region does not intersect the parameter space");
    const double c = center[i];
    if (std::isinf(lo) && std::isinf(hi)) {
      lo = c - 10.0 * (1.0 + std::fabs(c));
      hi = c + 10.0 * (1.0 + std::fabs(c));
    } else if (std::isinf(lo)) {
      const double anchor = std::min(hi, c);
      lo = anchor - 10.0 * (1.0 + std::fabs(c) + std::fabs(hi - c));
    } else if (std::isinf(hi)) {
      const double anchor = std::max(lo, c);
      hi = anchor + 10.0 * (1.0 + std::fabs(c) + std::fabs(lo - c));
    }
    out.lo.push_back(nudge_inside(lo, domain[i]));
    out.hi.push_back(nudge_inside(hi, domain[i]));
  }
  return out;
}

// sup of f over a region: grid scan, then one golden-section polish per coordinate.
PValue maximize_over_region(const std::function<PValue(std::span<const double>)>& f, const ParamRegion& region,
                            std::span<const ParamInterval> domain, std::span<const double> center,
                            int points_per_dim) {
  if (region.empty()) throw DomainError("empty null region");
  if (region.is_points()) {
    PValue best{-1.0, 0.0, Method::exact};
    for (const auto& pt : region.points) {
      const PValue v = f(pt.values);
      if (v.p > best.p) best = v;
    }
    return best;
  }

  const std::size_t d = region.box.size();
  const ClippedBox clipped = clip_box(region.box, domain, center);
  std::vector<int> counts(d);
  for (std::size_t i = 0; i < d; ++i) counts[i] = clipped.lo[i] == clipped.hi[i] ? 1 : std::max(points_per_dim, 2);

  PValue best{-1.0, 0.0, Method::exact};
  std::vector<double> best_x(d);
  const auto consider = [&](const std::vector<double>& x) {
    const PValue v = f(x);
    if (v.p > best.p) {
      best = v;
      best_x = x;
    }
  };

  bool center_inside = true;
  for (std::size_t i = 0; i < d; ++i) {
    center_inside = center_inside && center[i] >= clipped.lo[i] && center[i] <= clipped.hi[i];
  }
  if (center_inside) consider(std::vector<double>(center.begin(), center.end()));

  std::vector<int> idx(d, 0);
  std::vector<double> x(d);
  while (true) {
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = counts[i] == 1 ? clipped.lo[i]
                            : clipped.lo[i] + (clipped.hi[i] - clipped.lo[i]) * idx[i] / (counts[i] - 1);
    }
    consider(x);
    std::size_t k = 0;
    while (k < d && ++idx[k] == counts[k]) idx[k++] = 0;
    if (k == d) break;
  }

  for (std::size_t i = 0; i < d; ++i) {
    if (counts[i] == 1) continue;
    const double h = (clipped.hi[i] - clipped.lo[i]) / (counts[i] - 1);
    const double a = std::max(clipped.lo[i], best_x[i] - h);
    const double b = std::min(clipped.hi[i], best_x[i] + h);
    if (!(a < b)) continue;
    std::vector<double> probe = best_x;
    const auto neg = [&](double t) {
      probe[i] = t;
      return -f(probe).p;
    };
    const auto m = numerics::minimize_1d(neg, a, b, {60, 1e-7, 1e-12});
    if (-m.min > best.p) {
      probe[i] = m.argmin;
      consider(probe);
    }
  }
  return best;
}

double endpoint_std_err(const std::function<PValue(double)>& p_of, double root, double center, double side,
                        const ParamInterval& domain, double alpha, std::size_t replicates) {
  const double h = std::max(0.02 * std::fabs(root - center), 1e-6 * (1.0 + std::fabs(root)));
  const double inner = root - side * h;
  double outer = root + side * h;
  if (!domain.contains(outer)) outer = nudge_inside(outer, domain);
  if (!domain.contains(outer) || outer == root) return 0.0;
  const double slope = std::fabs(p_of(inner).p - p_of(outer).p) / std::fabs(outer - inner);
  if (!(slope > 0.0)) return kInf;
  return std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(replicates)) / slope;
}

}  // namespace

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::exact: return "exact";
    case Method::mc: return "mc";
    case Method::wilks: return "wilks";
  }
  return "unknown";
}

bool ConfidenceRegion::contains(double x) const noexcept {
  return std::any_of(segments.begin(), segments.end(), [x](const Segment& s) { return s.contains(x); });
}

ParamRegion ParamRegion::point(std::vector<double> values) {
  ParamRegion r;
  r.points.emplace_back(std::move(values));
  return r;
}

ParamRegion ParamRegion::from_box(std::vector<ParamInterval> box) {
  ParamRegion r;
  r.box = std::move(box);
  return r;
}

std::size_t ParamRegion::dim() const noexcept { return is_points() ? points.front().size() : box.size(); }

PValue pvalue(const Model& model, const ParamPoint& theta, const DataSet& y, Method method,
              const InferenceOptions& opts) {
  model.check_theta(theta.values);
  switch (method) {
    case Method::exact: {
      const auto p = model.analytic_pvalue(theta.values, y);
      if (!p) throw ContractError(std::string(model.name()) + ": no exact p-value evaluator; use mc or wilks");
      return {*p, 0.0, Method::exact};
    }
    case Method::wilks: {
      std::vector<double> interest(theta.values.begin(),
                                   theta.values.begin() + static_cast<std::ptrdiff_t>(model.interest_dim()));
      return {wilks_pvalue(model, interest_point(model, std::move(interest)), y), 0.0, Method::wilks};
    }
    case Method::mc: {
      const auto e = mc::mc_pvalue(model, theta, y, require_plan(opts));
      return {e.p_hat, e.std_err, Method::mc};
    }
  }
  throw ContractError("unknown method");
}

double wilks_pvalue(const Model& model, const ParamPoint& interest, const DataSet& y) {
  check_interest(model, interest.values);
  const double log_t = log_test_stat(model, interest.values, y);
  if (std::isinf(log_t)) return 0.0;
  const double dof = static_cast<double>(model.interest_dim());
  return numerics::gamma_q(0.5 * dof, log_t);
}

PValue interest_pvalue(const Model& model, const ParamPoint& psi, const DataSet& y, Method method,
                       const InferenceOptions& opts) {
  if (!model.has_nuisance()) return pvalue(model, psi, y, method, opts);
  check_interest(model, psi.values);
  switch (method) {
    case Method::exact:
      throw ContractError(std::string(model.name()) + ": no exact marginal p-value; use mc or wilks");
    case Method::wilks:
      return {wilks_pvalue(model, psi, y), 0.0, Method::wilks};
    case Method::mc: {
      if (opts.nuisance_box) return marginal_pvalue_sup(model, psi, y, method, *opts.nuisance_box, opts);
      const auto e = mc::marginal_mc_pvalue(model, psi, y, require_plan(opts));
      return {e.p_hat, e.std_err, Method::mc};
    }
  }
  throw ContractError("unknown method");
}

PValue composite_pvalue(const Model& model, const ParamRegion& null_region, const DataSet& y, Method method,
                        const InferenceOptions& opts) {
  if (null_region.empty()) throw DomainError("empty null region");
  if (null_region.dim() != model.param_dim()) throw DomainError("null region dimension does not match the model");
  const std::vector<double> center = mle(model, y).values;
  const auto f = [&](std::span<const double> theta) {
    return pvalue(model, ParamPoint(std::vector<double>(theta.begin(), theta.end())), y, method, opts);
  };
  return maximize_over_region(f, null_region, model.domain(), center, opts.sup_grid_points);
}

PValue interest_composite_pvalue(const Model& model, const ParamRegion& null_region, const DataSet& y,
                                 Method method, const InferenceOptions& opts) {
  if (!model.has_nuisance()) return composite_pvalue(model, null_region, y, method, opts);
  if (null_region.empty()) throw DomainError("empty null region");
  if (null_region.dim() != model.interest_dim()) {
    throw DomainError("null region dimension does not match the interest parameter");
  }
  const std::vector<double> hat = mle(model, y).values;
  const std::span<const double> center(hat.data(), model.interest_dim());
  const std::span<const ParamInterval> domain(model.domain().data(), model.interest_dim());
  const auto f = [&](std::span<const double> psi) {
    return interest_pvalue(model, interest_point(model, std::vector<double>(psi.begin(), psi.end())), y, method,
                           opts);
  };
  return maximize_over_region(f, null_region, domain, center, opts.sup_grid_points);
}

PValue marginal_pvalue_sup(const Model& model, const ParamPoint& psi, const DataSet& y, Method method,
                           std::span<const ParamInterval> lambda_box, const InferenceOptions& opts) {
  if (!model.has_nuisance()) return pvalue(model, psi, y, method, opts);
  check_interest(model, psi.values);
  const std::size_t k = model.param_dim() - model.interest_dim();
  if (lambda_box.size() != k) throw DomainError("nuisance box has the wrong dimension");
  for (const auto& iv : lambda_box) {
    if (iv.lo > iv.hi) throw DomainError("empty nuisance box");
  }
  const std::vector<double> hat = mle(model, y).values;
  const std::span<const double> center(hat.data() + model.interest_dim(), k);
  const std::span<const ParamInterval> domain(model.domain().data() + model.interest_dim(), k);
  const auto f = [&](std::span<const double> lambda) {
    return pvalue(model, make_point(model, model.join(psi.values, lambda)), y, method, opts);
  };
  const ParamRegion region = ParamRegion::from_box({lambda_box.begin(), lambda_box.end()});
  return maximize_over_region(f, region, domain, center, opts.sup_grid_points);
}

TestResult test(const Model& model, const ParamRegion& null_region, const DataSet& y, double alpha, Method method,
                const InferenceOptions& opts) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  const PValue p = null_region.dim() == model.interest_dim()
                       ? interest_composite_pvalue(model, null_region, y, method, opts)
                       : composite_pvalue(model, null_region, y, method, opts);
  return {null_region, p.p, p.std_err, alpha, p.p <= alpha, method};
}

PValueCurve pvalue_curve(const Model& model, std::span<const ParamPoint> grid, const DataSet& y, Method method,
                         const InferenceOptions& opts) {
  if (grid.empty()) throw DomainError("pvalue_curve: empty grid");
  PValueCurve curve;
  curve.method = method;
  curve.grid.assign(grid.begin(), grid.end());

  if (method == Method::mc && !opts.nuisance_box) {
    const auto& plan = require_plan(opts);
    mc::CurveEstimate est = model.has_nuisance() ? mc::marginal_mc_pvalue_curve(model, grid, y, plan)
                                                 : mc::mc_pvalue_curve(model, grid, y, plan);
    for (const auto& e : est.points) {
      curve.p.push_back(e.p_hat);
      curve.std_err.push_back(e.std_err);
    }
    curve.datasets_simulated = est.datasets_simulated;
    return curve;
  }
  for (const auto& g : grid) {
    const PValue v = interest_pvalue(model, g, y, method, opts);
    curve.p.push_back(v.p);
    curve.std_err.push_back(v.std_err);
  }
  if (method == Method::mc) curve.datasets_simulated = 0;  // sup path: not tracked per grid point
  return curve;
}

ConfidenceRegion invert_scalar(const std::function<PValue(double)>& p_of, double center,
                               const ParamInterval& domain, double alpha, Method method,
                               const InferenceOptions& opts) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  ConfidenceRegion region;
  region.level = 1.0 - alpha;
  region.method = method;
  if (!(p_of(center).p > alpha)) return region;

  numerics::OptimizerSettings settings = opts.root;
  if (method == Method::mc) settings.x_tol = std::max(settings.x_tol, opts.mc_x_tol);
  const double step0 = opts.initial_step.value_or(0.1 * (1.0 + std::fabs(center)));
  const std::size_t replicates = opts.plan ? opts.plan->replicates : 0;

  Segment seg{center, center, true, true};
  for (const double side : {-1.0, 1.0}) {
    const double bound = side < 0 ? domain.lo : domain.hi;
    const bool bound_closed = side < 0 ? domain.lo_closed : domain.hi_closed;
    double& end = side < 0 ? seg.lo : seg.hi;
    bool& closed = side < 0 ? seg.lo_closed : seg.hi_closed;
    double& end_se = side < 0 ? seg.lo_std_err : seg.hi_std_err;

    double inside = center;
    std::optional<double> outside;
    if (center != bound) {
      double step = step0;
      bool approaching_bound = false;
      for (int k = 0; k < 80 && !outside; ++k) {
        double x;
        if (!approaching_bound && (std::isinf(bound) || step < 0.5 * std::fabs(bound - center))) {
          x = center + side * step;
          step *= 2.0;
        } else {
          approaching_bound = true;
          x = bound - 0.5 * (bound - inside);
          if (x == inside || x == bound) break;
        }
        if (p_of(x).p > alpha) {
          inside = x;
        } else {
          outside = x;
        }
      }
    }

    if (!outside) {
      // No crossing before the domain boundary: the segment reaches it.
      end = bound;
      closed = bound_closed && !std::isinf(bound) && p_of(bound).p > alpha;
      continue;
    }
    const auto g = [&](double x) { return p_of(x).p - alpha; };
    const double lo = std::min(inside, *outside), hi = std::max(inside, *outside);
    const numerics::Bracket bracket{lo, hi, g(lo), g(hi)};
    double root = numerics::find_root(g, bracket, settings);
    // Monte Carlo curves step by 1/M everywhere, so only a jump well above
    // the noise counts as a discontinuity.
    const double jump_floor =
        replicates > 0 && method == Method::mc ? 3.0 * std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(replicates))
                                               : 1e-6;
    if (std::fabs(g(root)) > jump_floor) {
      // A jump across alpha: bisect down to adjacent doubles and keep the
      // side with p > alpha, which then belongs to the region.
      double in = inside, out = *outside;
      while (true) {
        const double mid = 0.5 * (in + out);
        if (mid == in || mid == out) break;
        (g(mid) > 0.0 ? in : out) = mid;
      }
      end = in;
      closed = true;
    } else {
      // Continuous crossing: p(root) = alpha is excluded.
      end = root;
      closed = false;
    }
    if (method == Method::mc && replicates > 0) {
      end_se = endpoint_std_err(p_of, end, center, side, domain, alpha, replicates);
    }
  }
  region.segments.push_back(seg);
  return region;
}

ConfidenceRegion invert_on_grid(const std::function<PValue(double)>& p_of, const ParamInterval& domain, double lo,
                                double hi, int points, double alpha, Method method) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (points < 2 || !(lo < hi)) throw DomainError("invert_on_grid: need at least two grid points on lo < hi");
  ConfidenceRegion region;
  region.level = 1.0 - alpha;
  region.method = method;

  const auto n = static_cast<std::size_t>(points);
  std::vector<double> xs(n);
  std::vector<char> above(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    const double x = nudge_inside(xs[i], domain);
    if (domain.contains(x)) above[i] = p_of(x).p > alpha;
  }

  std::size_t i = 0;
  while (i < n) {
    if (!above[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && above[j + 1]) ++j;
    Segment s{};
    if (i == 0) {
      s.lo = xs[0];
      s.lo_closed = domain.contains(xs[0]);
    } else {
      s.lo = xs[i - 1];
      s.lo_closed = false;
    }
    if (j == n - 1) {
      s.hi = xs[n - 1];
      s.hi_closed = domain.contains(xs[n - 1]);
    } else {
      s.hi = xs[j + 1];
      s.hi_closed = false;
    }
    // Conservative widening can make neighbouring runs touch: merge them.
    if (!region.segments.empty() && region.segments.back().hi >= s.lo) {
      region.segments.back().hi = s.hi;
      region.segments.back().hi_closed = s.hi_closed;
    } else {
      region.segments.push_back(s);
    }
    i = j + 1;
  }
  return region;
}

ConfidenceRegion confidence_region(const Model& model, const DataSet& y, double alpha, Method method,
                                   const InferenceOptions& opts) {
  if (model.interest_dim() != 1) throw ContractError("confidence_region needs a scalar interest parameter");
  if (model.has_nuisance()) return marginal_confidence_region(model, y, alpha, method, opts);
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  const ParamInterval& domain = model.domain()[0];

  if (method == Method::exact) {
    if (auto closed = model.exact_region(y, alpha)) {
      ConfidenceRegion region;
      region.level = 1.0 - alpha;
      region.method = method;
      region.segments.push_back({closed->first, closed->second, true, false});
      return region;
    }
  }

  const auto p_of = [&](double x) { return pvalue(model, make_point(model, {x}), y, method, opts); };
  if (model.discrete()) {
    if (std::isinf(domain.lo) || std::isinf(domain.hi)) {
      throw ContractError("stair-step inversion needs a bounded parameter space");
    }
    return invert_on_grid(p_of, domain, domain.lo, domain.hi, opts.discrete_grid_points, alpha, method);
  }
  const double center = mle(model, y)[0];
  return invert_scalar(p_of, center, domain, alpha, method, opts);
}

ConfidenceRegion marginal_confidence_region(const Model& model, const DataSet& y, double alpha, Method method,
                                            const InferenceOptions& opts) {
  if (model.interest_dim() != 1) throw ContractError("marginal_confidence_region needs a scalar interest parameter");
  if (!model.has_nuisance()) return confidence_region(model, y, alpha, method, opts);
  const double center = mle(model, y)[0];
  const auto p_of = [&](double x) { return interest_pvalue(model, interest_point(model, {x}), y, method, opts); };
  return invert_scalar(p_of, center, model.domain()[0], alpha, method, opts);
}

ConfidenceRegion region_from_curve(const PValueCurve& curve, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  ConfidenceRegion region;
  region.level = 1.0 - alpha;
  region.method = curve.method;
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    if (curve.p[i] > alpha) region.grid_points.push_back(curve.grid[i]);
  }
  return region;
}

ParamPoint max_pvalue_estimate(const Model& model, const DataSet& y) { return mle(model, y); }

std::vector<NamedInterval> comparison_intervals(const Model& model, const DataSet& y, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  const double z = numerics::normal_quantile(1.0 - 0.5 * alpha);
  const std::string_view name = model.name();
  if (name == "binomial") {
    const double n = *model.constants().n_trials;
    const double p = y.obs[0] / n;
    const double half = z * std::sqrt(p * (1.0 - p) / n);
    return {{"wald", p - half, p + half}};
  }
  if (name == "bivariate-normal-corr") {
    const double r = mle(model, y)[0];
    const double half = z / std::sqrt(static_cast<double>(y.rows) - 3.0);
    const double center = std::atanh(r);
    return {{"fisher-z", std::tanh(center - half), std::tanh(center + half)}};
  }
  if (name == "normal-known-var") {
    const double m = mle(model, y)[0];
    const double half = z / std::sqrt(static_cast<double>(y.rows));
    return {{"z", m - half, m + half}};
  }
  throw ContractError(std::string(name) + ": no classical comparison interval");
}

}  // namespace pvalfn
