#pragma once

// Monte Carlo estimation of the p-value function.
//
// Replicate m of every simulation draws from the stream (base_seed, m), so
// the same plan evaluated at two parameter values uses common random
// numbers, and results do not depend on thread count or scheduling. Each
// replicate loop has a serial reference kernel and an OpenMP kernel that
// must agree bit-for-bit.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pvalfn/model.hpp"

namespace pvalfn::mc {

enum class Estimator { plain, pivot_reuse, importance };
enum class ExecPolicy { serial, parallel };

std::string_view to_string(Estimator e) noexcept;

struct MonteCarloPlan {
  std::size_t replicates = 10000;
  std::uint64_t base_seed = 0;
  Estimator estimator = Estimator::plain;
  /// Sampling parameter of the importance proposal (full theta).
  std::optional<std::vector<double>> proposal;
  ExecPolicy exec = ExecPolicy::parallel;

  void validate() const;
};

struct WeightSummary {
  double mean_weight;
  double std_err;
};

struct PValueEstimate {
  double p_hat = 0.0;
  double std_err = 0.0;
  std::size_t replicates = 0;
  Estimator estimator = Estimator::plain;
  std::optional<WeightSummary> weights;

  /// Resolution floor: a zero estimate only says p < 1/M.
  double resolution() const noexcept { return replicates ? 1.0 / static_cast<double>(replicates) : 1.0; }
};

struct CurveEstimate {
  std::vector<PValueEstimate> points;
  /// Datasets drawn from the model sampler for the whole curve.
  std::size_t datasets_simulated = 0;
  Estimator estimator_used = Estimator::plain;
};

// ---------------------------------------------------------------------------
// Kernels

/// Number of replicates m < M with log T(Y_m) >= log_t_obs, where Y_m is drawn
/// under theta_sim and T is the test statistic at `interest`.
std::size_t count_exceedances_serial(const Model& model, std::span<const double> theta_sim,
                                     std::span<const double> interest, std::size_t n_obs, double log_t_obs,
                                     std::uint64_t seed, std::size_t replicates);
std::size_t count_exceedances_parallel(const Model& model, std::span<const double> theta_sim,
                                       std::span<const double> interest, std::size_t n_obs, double log_t_obs,
                                       std::uint64_t seed, std::size_t replicates);

/// log T(Y_m) for every replicate, in replicate order.
std::vector<double> simulate_log_stats(const Model& model, std::span<const double> theta_sim,
                                       std::span<const double> interest, std::size_t n_obs, std::uint64_t seed,
                                       std::size_t replicates, ExecPolicy exec = ExecPolicy::parallel);

// ---------------------------------------------------------------------------
// Estimators

/// Plain estimator: fraction of datasets simulated under theta whose
/// statistic is at least the observed one (ties count). For models with a
/// nuisance parameter the statistic is the profile ratio at theta's interest part.
PValueEstimate mc_pvalue(const Model& model, const ParamPoint& theta, const DataSet& y,
                         const MonteCarloPlan& plan);

/// Curve over a grid with common random numbers. With the pivot-reuse
/// estimator on a full-pivot model, one sample set of size M is simulated at
/// the model's reference value and reused at every grid point.
CurveEstimate mc_pvalue_curve(const Model& model, std::span<const ParamPoint> grid, const DataSet& y,
                              const MonteCarloPlan& plan);

/// Importance-sampling estimator with weights p_theta(Y) / f(Y), Y ~ f where
/// f is the model at plan.proposal.
PValueEstimate is_pvalue(const Model& model, const ParamPoint& theta, const DataSet& y,
                         const MonteCarloPlan& plan);

/// Importance-sampling curve: one proposal sample reused at every grid point.
CurveEstimate is_pvalue_curve(const Model& model, std::span<const ParamPoint> grid, const DataSet& y,
                              const MonteCarloPlan& plan);

/// Marginal p-value for an interest value of a model whose profile statistic
/// has a nuisance-free distribution: simulate at (psi, reference nuisance).
PValueEstimate marginal_mc_pvalue(const Model& model, const ParamPoint& psi, const DataSet& y,
                                  const MonteCarloPlan& plan);

CurveEstimate marginal_mc_pvalue_curve(const Model& model, std::span<const ParamPoint> psi_grid,
                                       const DataSet& y, const MonteCarloPlan& plan);

}  // namespace pvalfn::mc
