#pragma once

// Likelihood-ratio statistics in the reciprocal convention
// T = L(theta_hat) / L(theta) >= 1, large values being evidence against theta.

#include <compare>
#include <limits>
#include <span>

#include "pvalfn/model.hpp"

namespace pvalfn {

/// A statistic value held on the log scale; e^500 and the off-support
/// infinity both stay representable.
class StatValue {
 public:
  constexpr StatValue() = default;
  static constexpr StatValue from_log(double log_value) noexcept {
    StatValue s;
    s.log_ = log_value < 0.0 ? 0.0 : log_value;
    return s;
  }
  static constexpr StatValue infinite() noexcept {
    return from_log(std::numeric_limits<double>::infinity());
  }

  constexpr double log() const noexcept { return log_; }
  double linear() const noexcept;
  constexpr bool is_infinite() const noexcept { return log_ == std::numeric_limits<double>::infinity(); }
  /// True when the statistic sits at its lower bound 1.
  constexpr bool at_mle() const noexcept { return log_ == 0.0; }

  constexpr auto operator<=>(const StatValue& o) const noexcept { return log_ <=> o.log_; }
  constexpr bool operator==(const StatValue& o) const noexcept = default;

 private:
  double log_ = 0.0;
};

struct ProfileResult {
  ParamPoint psi;
  ParamPoint lambda_hat;
  double profiled_loglik;
};

/// Maximum likelihood estimate: the model's direct routine when present,
/// else a simplex search from the model's moment-based start.
ParamPoint mle(const Model& model, const DataSet& y);

/// Always the generic simplex search on the negative log-likelihood.
ParamPoint numeric_mle(const Model& model, const DataSet& y);

StatValue lr_stat(const Model& model, const ParamPoint& theta, const DataSet& y);

/// sup over the nuisance at fixed psi (closed form when the model has one).
ProfileResult profile(const Model& model, const ParamPoint& psi, const DataSet& y);

StatValue profile_lr_stat(const Model& model, const ParamPoint& psi, const DataSet& y);

/// Closed-form likelihood ratio for the shifted exponential, theta = (mu, beta):
/// {(n beta)^-1 sum(y_i - y_(1))}^-n exp{beta^-1 sum(y_i - mu) - n}, or
/// infinity when mu > y_(1).
StatValue shifted_exp_stat(const ParamPoint& theta, const DataSet& y);

/// log of the statistic a p-value for `interest` is built on: the plain
/// likelihood ratio when the model has no nuisance, else the profile ratio.
/// `interest` holds the first interest_dim() components.
double log_test_stat(const Model& model, std::span<const double> interest, const DataSet& y);

/// log sup over the nuisance at fixed interest value.
double profile_loglik(const Model& model, std::span<const double> interest, const DataSet& y,
                      std::vector<double>* lambda_hat = nullptr);

}  // namespace pvalfn
