#include "pvalfn/mc_engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>

#include "pvalfn/errors.hpp"
#include "pvalfn/statistic.hpp"

namespace pvalfn::mc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// An exception escaping an OpenMP region terminates the process, so worker
// threads park the first one here and the caller rethrows it after the join.
class FirstError {
 public:
  template <class F>
  void run(F&& f) noexcept {
    try {
      f();
    } catch (...) {
#pragma omp critical(pvalfn_first_error)
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
};

std::span<const double> interest_of(const Model& model, std::span<const double> theta) {
  return theta.first(model.interest_dim());
}

double observed_log_stat(const Model& model, std::span<const double> interest, const DataSet& y) {
  const double t = log_test_stat(model, interest, y);
  if (std::isnan(t)) throw NumericalError(std::string(model.name()) + ": statistic is NaN on the observed data");
  return t;
}

PValueEstimate from_count(std::size_t count, std::size_t replicates, Estimator e) {
  const double m = static_cast<double>(replicates);
  const double p = static_cast<double>(count) / m;
  return {p, std::sqrt(p * (1.0 - p) / m), replicates, e, std::nullopt};
}

std::size_t count_exceedances(const Model& model, std::span<const double> theta_sim,
                              std::span<const double> interest, std::size_t n_obs, double log_t_obs,
                              std::uint64_t seed, std::size_t replicates, ExecPolicy exec) {
  return exec == ExecPolicy::serial
             ? count_exceedances_serial(model, theta_sim, interest, n_obs, log_t_obs, seed, replicates)
             : count_exceedances_parallel(model, theta_sim, interest, n_obs, log_t_obs, seed, replicates);
}

// Per-replicate importance terms I{T >= t_obs} * w and the weights w.
void importance_terms(const Model& model, std::span<const double> theta, std::span<const double> proposal,
                      const std::vector<DataSet>& draws, double log_t_obs, std::vector<double>& terms,
                      std::vector<double>& weights, ExecPolicy exec) {
  const auto interest = interest_of(model, theta);
  const auto n = static_cast<std::ptrdiff_t>(draws.size());
  terms.assign(draws.size(), 0.0);
  weights.assign(draws.size(), 0.0);
  bool bad_weight = false;
  // Returns true when the weight is undefined.
  const auto body = [&](std::ptrdiff_t m) {
    const DataSet& d = draws[static_cast<std::size_t>(m)];
    const double target = model.log_likelihood(theta, d);
    const double prop = model.log_likelihood(proposal, d);
    if (prop == -kInf) return target != -kInf;
    const double w = std::exp(target - prop);
    weights[static_cast<std::size_t>(m)] = w;
    if (w > 0.0 && log_test_stat(model, interest, d) >= log_t_obs) terms[static_cast<std::size_t>(m)] = w;
    return false;
  };
  if (exec == ExecPolicy::serial) {
    for (std::ptrdiff_t m = 0; m < n; ++m) bad_weight = body(m) || bad_weight;
  } else {
    FirstError err;
#pragma omp parallel for schedule(static) reduction(|| : bad_weight)
    for (std::ptrdiff_t m = 0; m < n; ++m) err.run([&] { bad_weight = body(m) || bad_weight; });
    err.rethrow();
  }
  if (bad_weight) throw NumericalError("importance proposal has zero density where the target is positive");
}

std::vector<DataSet> draw_all(const Model& model, std::span<const double> theta, std::size_t n_obs,
                              std::uint64_t seed, std::size_t replicates, ExecPolicy exec) {
  std::vector<DataSet> draws(replicates);
  const auto n = static_cast<std::ptrdiff_t>(replicates);
  if (exec == ExecPolicy::serial) {
    for (std::ptrdiff_t m = 0; m < n; ++m) {
      ReplicateRng rng(seed, static_cast<std::uint64_t>(m));
      model.sample_into(theta, rng, n_obs, draws[static_cast<std::size_t>(m)]);
    }
  } else {
    FirstError err;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t m = 0; m < n; ++m) {
      err.run([&] {
        ReplicateRng rng(seed, static_cast<std::uint64_t>(m));
        model.sample_into(theta, rng, n_obs, draws[static_cast<std::size_t>(m)]);
      });
    }
    err.rethrow();
  }
  return draws;
}

PValueEstimate weighted_estimate(const std::vector<double>& terms, const std::vector<double>& weights) {
  // Serial sums keep the result independent of the thread count.
  const double m = static_cast<double>(terms.size());
  double s = 0.0, s2 = 0.0, w = 0.0, w2 = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    s += terms[i];
    s2 += terms[i] * terms[i];
    w += weights[i];
    w2 += weights[i] * weights[i];
  }
  const double mean = s / m;
  const double var = std::max(s2 / m - mean * mean, 0.0);
  const double wmean = w / m;
  const double wvar = std::max(w2 / m - wmean * wmean, 0.0);
  PValueEstimate e;
  e.p_hat = std::clamp(mean, 0.0, 1.0);
  e.std_err = std::sqrt(var / m);
  e.replicates = terms.size();
  e.estimator = Estimator::importance;
  e.weights = WeightSummary{wmean, std::sqrt(wvar / m)};
  return e;
}

// Weights only see points drawn from the proposal, so a target with mass
// outside the proposal's support would go unnoticed. Probe it with a short
// pilot sample from the target.
void check_proposal_support(const Model& model, std::span<const double> theta, std::span<const double> proposal,
                            std::size_t n_obs, std::uint64_t seed) {
  DataSet pilot;
  for (std::uint64_t m = 0; m < 64; ++m) {
    ReplicateRng rng(mix64(seed ^ 0x5bd1e995ULL), m);
    model.sample_into(theta, rng, n_obs, pilot);
    if (model.log_likelihood(proposal, pilot) == -kInf) {
      throw NumericalError("importance proposal has zero density where the target is positive");
    }
  }
}

std::vector<double> proposal_for(const Model& model, const DataSet& y, const MonteCarloPlan& plan) {
  if (plan.proposal) return *plan.proposal;
  return mle(model, y).values;
}

}  // namespace

std::string_view to_string(Estimator e) noexcept {
  switch (e) {
    case Estimator::plain: return "plain";
    case Estimator::pivot_reuse: return "pivot-reuse";
    case Estimator::importance: return "importance";
  }
  return "unknown";
}

void MonteCarloPlan::validate() const {
  if (replicates < 100) throw ConfigError("Monte Carlo plan needs at least 100 replicates");
}

std::size_t count_exceedances_serial(const Model& model, std::span<const double> theta_sim,
                                     std::span<const double> interest, std::size_t n_obs, double log_t_obs,
                                     std::uint64_t seed, std::size_t replicates) {
  std::size_t count = 0;
  DataSet buffer;
  for (std::size_t m = 0; m < replicates; ++m) {
    ReplicateRng rng(seed, m);
    model.sample_into(theta_sim, rng, n_obs, buffer);
    if (log_test_stat(model, interest, buffer) >= log_t_obs) ++count;
  }
  return count;
}

std::size_t count_exceedances_parallel(const Model& model, std::span<const double> theta_sim,
                                       std::span<const double> interest, std::size_t n_obs, double log_t_obs,
                                       std::uint64_t seed, std::size_t replicates) {
  std::size_t count = 0;
  const auto n = static_cast<std::ptrdiff_t>(replicates);
  FirstError err;
#pragma omp parallel reduction(+ : count)
  {
    DataSet buffer;
#pragma omp for schedule(static)
    for (std::ptrdiff_t m = 0; m < n; ++m) {
      err.run([&] {
        ReplicateRng rng(seed, static_cast<std::uint64_t>(m));
        model.sample_into(theta_sim, rng, n_obs, buffer);
        if (log_test_stat(model, interest, buffer) >= log_t_obs) ++count;
      });
    }
  }
  err.rethrow();
  return count;
}

std::vector<double> simulate_log_stats(const Model& model, std::span<const double> theta_sim,
                                       std::span<const double> interest, std::size_t n_obs, std::uint64_t seed,
                                       std::size_t replicates, ExecPolicy exec) {
  std::vector<double> out(replicates);
  const auto n = static_cast<std::ptrdiff_t>(replicates);
  if (exec == ExecPolicy::serial) {
    DataSet buffer;
    for (std::ptrdiff_t m = 0; m < n; ++m) {
      ReplicateRng rng(seed, static_cast<std::uint64_t>(m));
      model.sample_into(theta_sim, rng, n_obs, buffer);
      out[static_cast<std::size_t>(m)] = log_test_stat(model, interest, buffer);
    }
    return out;
  }
  FirstError err;
#pragma omp parallel
  {
    DataSet buffer;
#pragma omp for schedule(static)
    for (std::ptrdiff_t m = 0; m < n; ++m) {
      err.run([&] {
        ReplicateRng rng(seed, static_cast<std::uint64_t>(m));
        model.sample_into(theta_sim, rng, n_obs, buffer);
        out[static_cast<std::size_t>(m)] = log_test_stat(model, interest, buffer);
      });
    }
  }
  err.rethrow();
  return out;
}

PValueEstimate mc_pvalue(const Model& model, const ParamPoint& theta, const DataSet& y,
                         const MonteCarloPlan& plan) {
  plan.validate();
  model.check_theta(theta.values);
  if (plan.estimator == Estimator::importance) return is_pvalue(model, theta, y, plan);
  if (plan.estimator == Estimator::pivot_reuse) {
    const ParamPoint grid[1] = {theta};
    return mc_pvalue_curve(model, grid, y, plan).points.front();
  }
  const auto interest = interest_of(model, theta.values);
  const double t_obs = observed_log_stat(model, interest, y);
  const std::size_t count =
      count_exceedances(model, theta.values, interest, y.rows, t_obs, plan.base_seed, plan.replicates, plan.exec);
  return from_count(count, plan.replicates, Estimator::plain);
}

CurveEstimate mc_pvalue_curve(const Model& model, std::span<const ParamPoint> grid, const DataSet& y,
                              const MonteCarloPlan& plan) {
  plan.validate();
  if (grid.empty()) throw DomainError("mc_pvalue_curve: empty grid");
  for (const auto& g : grid) model.check_theta(g.values);
  if (plan.estimator == Estimator::importance) return is_pvalue_curve(model, grid, y, plan);

  CurveEstimate curve;
  if (plan.estimator == Estimator::pivot_reuse && model.pivot() == PivotKind::full) {
    // T_theta(Y) under P_theta has one distribution for all theta: simulate it
    // once at the reference value and compare every grid point against it.
    const std::vector<double> ref = model.pivot_reference();
    std::vector<double> stats =
        simulate_log_stats(model, ref, interest_of(model, ref), y.rows, plan.base_seed, plan.replicates, plan.exec);
    std::sort(stats.begin(), stats.end());
    curve.datasets_simulated = plan.replicates;
    curve.estimator_used = Estimator::pivot_reuse;
    for (const auto& g : grid) {
      const double t_obs = observed_log_stat(model, interest_of(model, g.values), y);
      const auto first = std::lower_bound(stats.begin(), stats.end(), t_obs);
      const auto count = static_cast<std::size_t>(stats.end() - first);
      curve.points.push_back(from_count(count, plan.replicates, Estimator::pivot_reuse));
    }
    return curve;
  }

  curve.estimator_used = Estimator::plain;
  for (const auto& g : grid) {
    const auto interest = interest_of(model, g.values);
    const double t_obs = observed_log_stat(model, interest, y);
    const std::size_t count =
        count_exceedances(model, g.values, interest, y.rows, t_obs, plan.base_seed, plan.replicates, plan.exec);
    curve.points.push_back(from_count(count, plan.replicates, Estimator::plain));
    curve.datasets_simulated += plan.replicates;
  }
  return curve;
}

PValueEstimate is_pvalue(const Model& model, const ParamPoint& theta, const DataSet& y,
                         const MonteCarloPlan& plan) {
  const ParamPoint grid[1] = {theta};
  return is_pvalue_curve(model, grid, y, plan).points.front();
}

CurveEstimate is_pvalue_curve(const Model& model, std::span<const ParamPoint> grid, const DataSet& y,
                              const MonteCarloPlan& plan) {
  plan.validate();
  if (grid.empty()) throw DomainError("is_pvalue_curve: empty grid");
  const std::vector<double> proposal = proposal_for(model, y, plan);
  model.check_theta(proposal);

  const std::vector<DataSet> draws = draw_all(model, proposal, y.rows, plan.base_seed, plan.replicates, plan.exec);
  CurveEstimate curve;
  curve.datasets_simulated = plan.replicates;
  curve.estimator_used = Estimator::importance;
  std::vector<double> terms, weights;
  for (const auto& g : grid) {
    model.check_theta(g.values);
    check_proposal_support(model, g.values, proposal, y.rows, plan.base_seed);
    const double t_obs = observed_log_stat(model, interest_of(model, g.values), y);
    importance_terms(model, g.values, proposal, draws, t_obs, terms, weights, plan.exec);
    curve.points.push_back(weighted_estimate(terms, weights));
  }
  return curve;
}

PValueEstimate marginal_mc_pvalue(const Model& model, const ParamPoint& psi, const DataSet& y,
                                  const MonteCarloPlan& plan) {
  const ParamPoint grid[1] = {psi};
  return marginal_mc_pvalue_curve(model, grid, y, plan).points.front();
}

CurveEstimate marginal_mc_pvalue_curve(const Model& model, std::span<const ParamPoint> psi_grid,
                                       const DataSet& y, const MonteCarloPlan& plan) {
  plan.validate();
  if (model.pivot() != PivotKind::nuisance_free) {
    throw ContractError(std::string(model.name()) +
                        ": profile statistic is not declared nuisance-free; use the sup-over-nuisance p-value");
  }
  if (psi_grid.empty()) throw DomainError("marginal_mc_pvalue_curve: empty grid");
  const std::vector<double> lambda_ref = model.nuisance_reference();
  CurveEstimate curve;
  curve.estimator_used = Estimator::plain;
  for (const auto& psi : psi_grid) {
    const std::vector<double> theta = model.join(psi.values, lambda_ref);
    model.check_theta(theta);
    const double t_obs = observed_log_stat(model, psi.values, y);
    const std::size_t count =
        count_exceedances(model, theta, psi.values, y.rows, t_obs, plan.base_seed, plan.replicates, plan.exec);
    curve.points.push_back(from_count(count, plan.replicates, Estimator::plain));
    curve.datasets_simulated += plan.replicates;
  }
  return curve;
}

}  // namespace pvalfn::mc
