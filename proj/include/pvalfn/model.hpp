#pragma once

// Parametric sampling models and the built-in catalogue.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pvalfn/rng.hpp"

namespace pvalfn {

/// A point in the parameter space. For models with nuisance parameters the
/// components are ordered (interest, nuisance).
struct ParamPoint {
  std::vector<double> values;
  std::vector<std::string> labels;

  ParamPoint() = default;
  explicit ParamPoint(std::vector<double> v, std::vector<std::string> l = {})
      : values(std::move(v)), labels(std::move(l)) {}

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  operator std::span<const double>() const noexcept { return values; }
};

/// Observations as an n x d row-major matrix, plus optional per-row known
/// constants (e.g. the known standard errors of a random-effects model).
struct DataSet {
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::vector<double> obs;
  std::vector<double> meta;

  static DataSet univariate(std::vector<double> values);
  static DataSet bivariate(std::span<const double> first, std::span<const double> second);

  double at(std::size_t r, std::size_t c = 0) const { return obs[r * cols + c]; }
  std::span<const double> values() const noexcept { return obs; }

  /// Throws ConfigError when the shape invariants do not hold.
  void validate() const;

  bool operator==(const DataSet&) const = default;
};

/// Interval component of a box-shaped parameter domain.
struct ParamInterval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_closed = false;
  bool hi_closed = false;

  bool contains(double x) const noexcept {
    return (x > lo || (lo_closed && x == lo)) && (x < hi || (hi_closed && x == hi));
  }
};

enum class PivotKind {
  full,           // distribution of T_theta(Y) under P_theta is theta-free
  nuisance_free,  // distribution of T_psi(Y) is lambda-free for fixed psi
  none,
};

struct ModelConstants {
  std::optional<int> n_trials;  // binomial
  std::vector<double> sigma;    // random-effects known standard errors
};

/// A parametric sampling model. Implementations are immutable once built,
/// so a single instance may be shared across threads.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string_view name() const noexcept = 0;
  std::size_t param_dim() const noexcept { return domain_.size(); }
  std::size_t interest_dim() const noexcept { return interest_dim_; }
  bool has_nuisance() const noexcept { return interest_dim_ < domain_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<ParamInterval>& domain() const noexcept { return domain_; }
  const ModelConstants& constants() const noexcept { return constants_; }

  /// Log of the joint density; -infinity off the support.
  virtual double log_likelihood(std::span<const double> theta, const DataSet& y) const = 0;

  /// Overwrite `out` with one dataset of `n` observations drawn under theta.
  virtual void sample_into(std::span<const double> theta, ReplicateRng& rng, std::size_t n,
                           DataSet& out) const = 0;

  /// Smallest dataset with the same likelihood-ratio statistic as y.
  virtual DataSet sufficient_reduce(const DataSet& y) const { return y; }

  /// Exact p-value function where a closed form or exact enumeration exists.
  virtual std::optional<double> analytic_pvalue(std::span<const double> theta, const DataSet& y) const;

  /// Model-specific maximum likelihood routine (closed form or a reduced
  /// search). Empty when the generic simplex search must be used.
  virtual std::optional<std::vector<double>> direct_mle(const DataSet& y) const;

  /// Starting point for the generic numerical MLE.
  virtual std::vector<double> mle_start(const DataSet& y) const = 0;

  /// sup over nuisance of the log-likelihood at fixed interest value, with
  /// the maximizing nuisance written to `lambda_hat` when non-null. Empty
  /// when no closed form is available.
  virtual std::optional<double> profile_log_likelihood(std::span<const double> psi, const DataSet& y,
                                                       std::vector<double>* lambda_hat) const;

  virtual PivotKind pivot() const noexcept { return PivotKind::none; }
  /// Parameter value used to simulate a full pivot once.
  virtual std::vector<double> pivot_reference() const;
  /// Nuisance value used to simulate a nuisance-free pivot.
  virtual std::vector<double> nuisance_reference() const;

  /// True for models with a discrete sample space (stair-step p-value curves).
  virtual bool discrete() const noexcept { return false; }

  /// Closed-form exact region [first, second) for the scalar parameter,
  /// when the p-value function has a single crossing with a known inverse.
  virtual std::optional<std::pair<double, double>> exact_region(const DataSet& y, double alpha) const;

  /// Columns expected in data files, in order.
  virtual std::vector<std::string> data_columns() const { return {"y"}; }

  /// Throws DomainError unless theta has the right size and lies in the domain.
  void check_theta(std::span<const double> theta) const;
  bool in_domain(std::span<const double> theta) const noexcept;
  /// Throws ConfigError when y is unusable for this model.
  virtual void check_data(const DataSet& y) const;

  /// Full parameter assembled from an interest value and a nuisance value.
  std::vector<double> join(std::span<const double> psi, std::span<const double> lambda) const;

 protected:
  Model(std::vector<std::string> labels, std::vector<ParamInterval> domain, std::size_t interest_dim,
        ModelConstants constants = {});

 private:
  std::vector<std::string> labels_;
  std::vector<ParamInterval> domain_;
  std::size_t interest_dim_;
  ModelConstants constants_;
};

using ModelPtr = std::shared_ptr<const Model>;

/// Names accepted by builtin_model.
const std::vector<std::string>& builtin_model_names();

/// One of: normal-known-var, uniform, exponential, binomial,
/// shifted-exponential, normal-random-effects, bivariate-normal-corr.
/// Throws ConfigError for unknown names or missing constants.
ModelPtr builtin_model(std::string_view name, const ModelConstants& constants = {});

double log_likelihood(const Model& model, const ParamPoint& theta, const DataSet& y);

/// n_replicates datasets of size n_obs drawn under theta; replicate m uses
/// the stream (seed, m), so the result is reproducible.
std::vector<DataSet> sample(const Model& model, const ParamPoint& theta, std::uint64_t seed,
                            std::size_t n_replicates, std::size_t n_obs);

ParamPoint make_point(const Model& model, std::vector<double> values);

}  // namespace pvalfn
