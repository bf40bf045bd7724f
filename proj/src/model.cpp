#include "pvalfn/model.hpp"

#include <cmath>
#include <string>

#include "pvalfn/errors.hpp"

namespace pvalfn {

DataSet DataSet::univariate(std::vector<double> values) {
  DataSet d;
  d.rows = values.size();
  d.cols = 1;
  d.obs = std::move(values);
  return d;
}

DataSet DataSet::bivariate(std::span<const double> first, std::span<const double> second) {
  if (first.size() != second.size()) throw ConfigError("bivariate data columns differ in length");
  DataSet d;
  d.rows = first.size();
  d.cols = 2;
  d.obs.reserve(2 * d.rows);
  for (std::size_t i = 0; i < d.rows; ++i) {
    d.obs.push_back(first[i]);
    d.obs.push_back(second[i]);
  }
  return d;
}

void DataSet::validate() const {
  if (rows < 1) throw ConfigError("dataset must contain at least one observation");
  if (cols < 1 || obs.size() != rows * cols) throw ConfigError("dataset shape does not match its values");
  if (!meta.empty() && meta.size() != rows) throw ConfigError("metadata length must equal the number of rows");
  for (double v : obs) {
    if (!std::isfinite(v)) throw ConfigError("dataset contains a non-finite value");
  }
}

Model::Model(std::vector<std::string> labels, std::vector<ParamInterval> domain, std::size_t interest_dim,
             ModelConstants constants)
    : labels_(std::move(labels)),
      domain_(std::move(domain)),
      interest_dim_(interest_dim),
      constants_(std::move(constants)) {}

std::optional<double> Model::analytic_pvalue(std::span<const double>, const DataSet&) const {
  return std::nullopt;
}

std::optional<std::vector<double>> Model::direct_mle(const DataSet&) const { return std::nullopt; }

std::optional<double> Model::profile_log_likelihood(std::span<const double>, const DataSet&,
                                                    std::vector<double>*) const {
  return std::nullopt;
}

std::vector<double> Model::pivot_reference() const {
  throw ContractError(std::string(name()) + " is not a full pivot model");
}

std::vector<double> Model::nuisance_reference() const {
  throw ContractError(std::string(name()) + " does not declare a nuisance-free pivot");
}

std::optional<std::pair<double, double>> Model::exact_region(const DataSet&, double) const {
  return std::nullopt;
}

bool Model::in_domain(std::span<const double> theta) const noexcept {
  if (theta.size() != domain_.size()) return false;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (!domain_[i].contains(theta[i])) return false;
  }
  return true;
}

void Model::check_theta(std::span<const double> theta) const {
  if (theta.size() != domain_.size()) {
    throw DomainError(std::string(name()) + ": parameter has dimension " + std::to_string(theta.size()) +
                      ", expected " + std::to_string(domain_.size()));
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (!domain_[i].contains(theta[i])) {
      throw DomainError(std::string(name()) + ": parameter " + labels_[i] + " = " + std::to_string(theta[i]) +
                        " is outside the parameter space");
    }
  }
}

void Model::check_data(const DataSet& y) const {
  y.validate();
  if (y.cols != data_columns().size()) {
    throw ConfigError(std::string(name()) + ": expected " + std::to_string(data_columns().size()) +
                      " data column(s)");
  }
}

std::vector<double> Model::join(std::span<const double> psi, std::span<const double> lambda) const {
  if (psi.size() != interest_dim_ || psi.size() + lambda.size() != param_dim()) {
    throw DomainError(std::string(name()) + ": interest/nuisance sizes do not match the model");
  }
  std::vector<double> theta(psi.begin(), psi.end());
  theta.insert(theta.end(), lambda.begin(), lambda.end());
  return theta;
}

double log_likelihood(const Model& model, const ParamPoint& theta, const DataSet& y) {
  if (theta.size() != model.param_dim()) {
    throw DomainError(std::string(model.name()) + ": parameter dimension mismatch");
  }
  return model.log_likelihood(theta.values, y);
}

std::vector<DataSet> sample(const Model& model, const ParamPoint& theta, std::uint64_t seed,
                            std::size_t n_replicates, std::size_t n_obs) {
  model.check_theta(theta.values);
  std::vector<DataSet> out(n_replicates);
  for (std::size_t m = 0; m < n_replicates; ++m) {
    ReplicateRng rng(seed, m);
    model.sample_into(theta.values, rng, n_obs, out[m]);
  }
  return out;
}

ParamPoint make_point(const Model& model, std::vector<double> values) {
  return ParamPoint(std::move(values), model.labels());
}

}  // namespace pvalfn
