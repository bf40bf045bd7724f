#include "pvalfn/statistic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pvalfn/errors.hpp"
#include "pvalfn/numerics.hpp"

namespace pvalfn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const numerics::OptimizerSettings kMleSettings{20000, 1e-10, 1e-12};

double max_loglik(const Model& model, const DataSet& y) {
  const ParamPoint hat = mle(model, y);
  return model.log_likelihood(hat.values, y);
}

}  // namespace

double StatValue::linear() const noexcept { return std::exp(log_); }

ParamPoint numeric_mle(const Model& model, const DataSet& y) {
  const auto objective = [&](std::span<const double> theta) {
    if (!model.in_domain(theta)) return kInf;
    return -model.log_likelihood(theta, y);
  };
  const std::vector<double> start = model.mle_start(y);
  try {
    auto result = numerics::minimize_nd(objective, start, kMleSettings);
    return make_point(model, std::move(result.argmin));
  } catch (const DomainError&) {
    throw NumericalError(std::string(model.name()) + ": likelihood is not finite at the starting point");
  }
}

ParamPoint mle(const Model& model, const DataSet& y) {
  if (auto direct = model.direct_mle(y)) return make_point(model, std::move(*direct));
  return numeric_mle(model, y);
}

StatValue lr_stat(const Model& model, const ParamPoint& theta, const DataSet& y) {
  model.check_theta(theta.values);
  const double ll = model.log_likelihood(theta.values, y);
  if (ll == -kInf) return StatValue::infinite();
  return StatValue::from_log(max_loglik(model, y) - ll);
}

double profile_loglik(const Model& model, std::span<const double> interest, const DataSet& y,
                      std::vector<double>* lambda_hat) {
  if (interest.size() != model.interest_dim()) throw DomainError("interest value has the wrong dimension");
  if (!model.has_nuisance()) {
    if (lambda_hat != nullptr) lambda_hat->clear();
    return model.log_likelihood(interest, y);
  }
  if (auto closed = model.profile_log_likelihood(interest, y, lambda_hat)) return *closed;

  // Numerical inner maximization over the nuisance, started at the MLE's nuisance.
  const ParamPoint hat = mle(model, y);
  const std::vector<double> start(hat.values.begin() + static_cast<std::ptrdiff_t>(model.interest_dim()),
                                  hat.values.end());
  std::vector<double> theta(model.param_dim());
  std::copy(interest.begin(), interest.end(), theta.begin());
  const auto objective = [&](std::span<const double> lambda) {
    std::copy(lambda.begin(), lambda.end(), theta.begin() + static_cast<std::ptrdiff_t>(interest.size()));
    if (!model.in_domain(theta)) return kInf;
    return -model.log_likelihood(theta, y);
  };
  numerics::MinimumNd best;
  try {
    best = numerics::minimize_nd(objective, start, kMleSettings);
  } catch (const DomainError&) {
    throw NumericalError(std::string(model.name()) + ": profile inner optimization has no finite start");
  }
  if (lambda_hat != nullptr) *lambda_hat = best.argmin;
  return -best.min;
}

ProfileResult profile(const Model& model, const ParamPoint& psi, const DataSet& y) {
  std::vector<double> lambda;
  const double ll = profile_loglik(model, psi.values, y, &lambda);
  std::vector<std::string> psi_labels(model.labels().begin(),
                                      model.labels().begin() + static_cast<std::ptrdiff_t>(model.interest_dim()));
  std::vector<std::string> lambda_labels(model.labels().begin() + static_cast<std::ptrdiff_t>(model.interest_dim()),
                                         model.labels().end());
  return {ParamPoint(psi.values, std::move(psi_labels)), ParamPoint(std::move(lambda), std::move(lambda_labels)),
          ll};
}

StatValue profile_lr_stat(const Model& model, const ParamPoint& psi, const DataSet& y) {
  if (model.interest_dim() < 1) throw ContractError("profile statistic needs an interest parameter");
  for (std::size_t i = 0; i < psi.size() && i < model.interest_dim(); ++i) {
    if (!model.domain()[i].contains(psi[i])) throw DomainError("interest value outside its domain");
  }
  return StatValue::from_log(log_test_stat(model, psi.values, y));
}

StatValue shifted_exp_stat(const ParamPoint& theta, const DataSet& y) {
  if (theta.size() != 2) throw DomainError("shifted_exp_stat: theta must be (mu, beta)");
  const double mu = theta[0], beta = theta[1];
  if (!(beta > 0.0)) throw DomainError("shifted_exp_stat: beta must be positive");
  const double lo = *std::min_element(y.obs.begin(), y.obs.end());
  if (lo < mu) return StatValue::infinite();
  const double n = static_cast<double>(y.rows);
  double excess = 0.0, shifted = 0.0;
  for (double v : y.obs) {
    excess += v - lo;
    shifted += v - mu;
  }
  return StatValue::from_log(-n * std::log(excess / (n * beta)) + shifted / beta - n);
}

double log_test_stat(const Model& model, std::span<const double> interest, const DataSet& y) {
  const double denominator = profile_loglik(model, interest, y);
  if (denominator == -kInf) return kInf;
  const double numerator = max_loglik(model, y);
  if (!std::isfinite(numerator)) throw NumericalError(std::string(model.name()) + ": maximized likelihood is not finite");
  return std::max(numerator - denominator, 0.0);
}

}  // namespace pvalfn
