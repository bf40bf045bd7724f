#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "pvalfn/errors.hpp"
#include "pvalfn/model.hpp"
#include "pvalfn/numerics.hpp"

namespace pvalfn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

ParamInterval real_line() { return {}; }
ParamInterval positive() { return {0.0, kInf, false, false}; }

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void resize_univariate(DataSet& out, std::size_t n) {
  out.rows = n;
  out.cols = 1;
  out.obs.resize(n);
  out.meta.clear();
}

// ---------------------------------------------------------------------------
// N(theta, 1)

class NormalKnownVariance final : public Model {
 public:
  NormalKnownVariance() : Model({"theta"}, {real_line()}, 1) {}

  std::string_view name() const noexcept override { return "normal-known-var"; }

  double log_likelihood(std::span<const double> theta, const DataSet& y) const override {
    double ss = 0.0;
    for (double v : y.obs) ss += (v - theta[0]) * (v - theta[0]);
    return -0.5 * static_cast<double>(y.rows) * kLog2Pi - 0.5 * ss;
  }

  void sample_into(std::span<const double> theta, ReplicateRng& rng, std::size_t n,
                   DataSet& out) const override {
    resize_univariate(out, n);
    for (auto& v : out.obs) v = theta[0] + rng.normal();
  }

  DataSet sufficient_reduce(const DataSet& y) const override {
    return DataSet::univariate(std::vector<double>(y.rows, mean_of(y.obs)));
  }

  std::optional<double> analytic_pvalue(std::span<const double> theta, const DataSet& y) const override {
    const double d = mean_of(y.obs) - theta[0];
    return numerics::chisq1_sf(static_cast<double>(y.rows) * d * d);
  }

  std::optional<std::vector<double>> direct_mle(const DataSet& y) const override {
    return std::vector<double>{mean_of(y.obs)};
  }
  std::vector<double> mle_start(const DataSet& y) const override { return {mean_of(y.obs)}; }

  PivotKind pivot() const noexcept override { return PivotKind::full; }
  std::vector<double> pivot_reference() const override { return {0.0}; }
};

// ---------------------------------------------------------------------------
// Unif(0, theta)

class Uniform final : public Model {
 public:
  Uniform() : Model({"theta"}, {positive()}, 1) {}

  std::string_view name() const noexcept override { return "uniform"; }

  double log_likelihood(std::span<const double> theta, const DataSet& y) const override {
    const auto [lo, hi] = std::minmax_element(y.obs.begin(), y.obs.end());
    if (*lo < 0.0 || theta[0] < *hi) return -kInf;
    return -static_cast<double>(y.rows) * std::log(theta[0]);
  }

  void sample_into(std::span<const double> theta, ReplicateRng& rng, std::size_t n,
                   DataSet& out) const override {
    resize_univariate(out, n);
    for (auto& v : out.obs) v = theta[0] * rng.uniform();
  }

  DataSet sufficient_reduce(const DataSet& y) const override {
    return DataSet::univariate(std::vector<double>(y.rows, max_of(y)));
  }

  std::optional<double> analytic_pvalue(std::span<const double> theta, const DataSet& y) const override {
    const double top = max_of(y);
    if (theta[0] < top) return 0.0;
    return numerics::beta_n1_cdf(top / theta[0], static_cast<int>(y.rows));
  }

  std::optional<std::vector<double>> direct_mle(const DataSet& y) const override {
    return std::vector<double>{max_of(y)};
  }
  std::vector<double> mle_start(const DataSet& y) const override { return {max_of(y)}; }

  PivotKind pivot() const noexcept override { return PivotKind::full; }
  std::vector<double> pivot_reference() const override { return {1.0}; }

  // p(theta) = (y_(n)/theta)^n is continuous and strictly decreasing above
  // y_(n), so {p > alpha} = [y_(n), y_(n) / F_n^{-1}(alpha)).
  std::optional<std::pair<double, double>> exact_region(const DataSet& y, double alpha) const override {
    const double top = max_of(y);
    return std::pair{top, top / numerics::beta_n1_quantile(alpha, static_cast<int>(y.rows))};
  }

  void check_data(const DataSet& y) const override {
    Model::check_data(y);
    if (max_of(y) <= 0.0) throw ConfigError("uniform: sample maximum must be positive");
  }

 private:
  static double max_of(const DataSet& y) { return *std::max_element(y.obs.begin(), y.obs.end()); }
};

// ---------------------------------------------------------------------------
// Exponential with mean theta

class Exponential final : public Model {
 public:
  Exponential() : Model({"theta"}, {positive()}, 1) {}

  std::string_view name() const noexcept override { return "exponential"; }

  double log_likelihood(std::span<const double> theta, const DataSet& y) const override {
    double sum = 0.0;
    for (double v : y.obs) {
      if (v < 0.0) return -kInf;
      sum += v;
    }
    return -static_cast<double>(y.rows) * std::log(theta[0]) - sum / theta[0];
  }

  void sample_into(std::span<const double> theta, ReplicateRng& rng, std::size_t n,
                   DataSet& out) const override {
    resize_univariate(out, n);
    for (auto& v : out.obs) v = theta[0] * rng.exponential();
  }

  DataSet sufficient_reduce(const DataSet& y) const override {
    return DataSet::univariate(std::vector<double>(y.rows, mean_of(y.obs)));
  }

  // With z = ybar / theta, log T = n (z - 1 - log z) and n z ~ Gamma(n, 1).
  // The level set {log T >= c} is z <= z_lo or z >= z_hi; the observed z is
  // one of the two boundaries and the other is found by bisection.
  std::optional<double> analytic_pvalue(std::span<const double> theta, const DataSet& y) const override {
    const double n = static_cast<double>(y.rows);
    const double z_obs = mean_of(y.obs) / theta[0];
    const auto h = [](double z) { return z - 1.0 - std::log(z); };
    const double c = h(z_obs);
    if (!(c > 0.0)) return 1.0;

    numerics::OptimizerSettings tight{400, 1e-15, 1e-300};
    double z_lo = z_obs, z_hi = z_obs;
    const auto g = [&](double z) { return h(z) - c; };
    if (z_obs < 1.0) {
      z_hi = numerics::find_root(g, numerics::make_bracket(g, 1.0, 2.0 * (c + 1.0)), tight);
    } else {
      z_lo = numerics::find_root(g, numerics::make_bracket(g, std::exp(-(c + 1.0)), 1.0), tight);
    }
    const double p = numerics::gamma_p(n, n * z_lo) + numerics::gamma_q(n, n * z_hi);
    return std::clamp(p, 0.0, 1.0);
  }

  std::optional<std::vector<double>> direct_mle(const DataSet& y) const override {
    return std::vector<double>{mean_of(y.obs)};
  }
  std::vector<double> mle_start(const DataSet& y) const override { return {mean_of(y.obs)}; }

  PivotKind pivot() const noexcept override { return PivotKind::full; }
  std::vector<double> pivot_reference() const override { return {1.0}; }

  void check_data(const DataSet& y) const override {
    Model::check_data(y);
    if (*std::min_element(y.obs.begin(), y.obs.end()) < 0.0) {
      throw ConfigError("exponential: observations must be nonnegative");
    }
    if (mean_of(y.obs) <= 0.0) throw ConfigError("exponential: sample mean must be positive");
  }
};

// ---------------------------------------------------------------------------
// Bin(n_trials, theta); the dataset holds the single count y.

class Binomial final : public Model {
 public:
  explicit Binomial(ModelConstants c)
      : Model({"theta"}, {ParamInterval{0.0, 1.0, true, true}}, 1, std::move(c)),
        trials_(*constants().n_trials),
        log_choose_(static_cast<std::size_t>(trials_) + 1) {
    for (int k = 0; k <= trials_; ++k) {
      log_choose_[static_cast<std::size_t>(k)] =
          std::lgamma(trials_ + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials_ - k + 1.0);
    }
  }

  std::string_view name() const noexcept override { return "binomial"; }

  double log_likelihood(std::span<const double> theta, const DataSet& y) const override {
    const int k = static_cast<int>(y.obs[0]);
    if (k < 0 || k > trials_) return -kInf;
    return log_pmf(k, theta[0]);
  }

  void sample_into(std::span<const double> theta, ReplicateRng& rng, std::size_t,
                   DataSet& out) const override {
    resize_univariate(out, 1);
    const double u = rng.uniform();
    double cumulative = 0.0;
    int k = 0;
    for (; k < trials_; ++k) {
      cumulative += std::exp(log_pmf(k, theta[0]));
      if (u <= cumulative) break;
    }
    out.obs[0] = static_cast<double>(k);
  }

  // Enumerate the sample space and add the mass of every count whose
  // statistic is at least the observed one.
  std::optional<double> analytic_pvalue(std::span<const double> theta, const DataSet& y) const override {
    const int observed = static_cast<int>(y.obs[0]);
    const double t_obs = log_stat(observed, theta[0]);
    double p = 0.0;
    for (int k = 0; k <= trials_; ++k) {
      if (log_stat(k, theta[0]) >= t_obs) p += std::exp(log_pmf(k, theta[0]));
    }
    return std::clamp(p, 0.0, 1.0);
  }

  std::optional<std::vector<double>> direct_mle(const DataSet& y) const override {
    return std::vector<double>{y.obs[0] / trials_};
  }
  std::vector<double> mle_start(const DataSet& y) const override {
    return {std::clamp(y.obs[0] / trials_, 0.01, 0.99)};
  }

  bool discrete() const noexcept override { return true; }

  void check_data(const DataSet& y) const override {
    y.validate();
    if (y.rows != 1 || y.cols != 1) throw ConfigError("binomial: data must be a single count");
    const double k = y.obs[0];
    if (k != std::floor(k) || k < 0 || k > trials_) {
      throw ConfigError("binomial: count must be an integer in [0, n_trials]");
    }
  }

  std::vector<std::string> data_columns() const override { return {"y"}; }

 private:
  static double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

  double log_pmf(int k, double theta) const {
    return log_choose_[static_cast<std::size_t>(k)] + xlogy(k, theta) + xlogy(trials_ - k, 1.0 - theta);
  }

  // log T_theta(k) with 0 log 0 = 0.
  double log_stat(int k, double theta) const {
    const double n = trials_;
    const double a = k == 0 ? 0.0 : k * std::log(k / (n * theta));
    const double b = k == trials_ ? 0.0 : (n - k) * std::log((n - k) / (n * (1.0 - theta)));
    return a + b;
  }

  int trials_;
  std::vector<double> log_choose_;
};

// ---------------------------------------------------------------------------
// Shifted exponential, density beta^-1 exp(-(y - mu)/beta) on y >= mu.

class ShiftedExponential final : public Model {
 public:
  ShiftedExponential() : Model({"mu", "beta"}, {real_line(), positive()}, 2) {}

  std::string_view name() const noexcept override { return "shifted-exponential"; }

  double log_likelihood(std::span<const double> theta, const DataSet& y) const override {
    double sum = 0.0;
    for (double v : y.obs) {
      if (v < theta[0]) return -kInf;
      sum += v - theta[0];
    }
    return -static_cast<double>(y.rows) * std::log(theta[1]) - sum / theta[1];
  }

  void sample_into(std::span<const double> theta, ReplicateRng& rng, std::size_t n,
                   DataSet& out) const override {
    resize_univariate(out, n);
    for (auto& v : out.obs) v = theta[0] + theta[1] * rng.exponential();
  }

  // Keeps the minimum and the sum, which determine the statistic.
  DataSet sufficient_reduce(const DataSet& y) const override {
    if (y.rows < 2) return y;
    const double lo = *std::min_element(y.obs.begin(), y.obs.end());
    double excess = 0.0;
    for (double v : y.obs) excess += v - lo;
    std::vector<double> v(y.rows, lo + excess / static_cast<double>(y.rows - 1));
    v[0] = lo;
    return DataSet::univariate(std::move(v));
  }

  std::optional<std::vector<double>> direct_mle(const DataSet& y) const override {
    const double lo = *std::min_element(y.obs.begin(), y.obs.end());
    double excess = 0.0;
    for (double v : y.obs) excess += v - lo;
    return std::vector<double>{lo, excess / static_cast<double>(y.rows)};
  }
  std::vector<double> mle_start(const DataSet& y) const override { return *direct_mle(y); }

  PivotKind pivot() const noexcept override { return PivotKind::full; }
  std::vector<double> pivot_reference() const override { return {0.0, 1.0}; }

  void check_data(const DataSet& y) const override {
    Model::check_data(y);
    if (y.rows < 2) throw ConfigError("shifted-exponential: need at least two observations");
    const auto [lo, hi] = std::minmax_element(y.obs.begin(), y.obs.end());
    if (*lo == *hi) throw ConfigError("shifted-exponential: degenerate data (all observations equal)");
  }
};

// ---------------------------------------------------------------------------
// Normal random effects in non-hierarchical form: Y_i ~ N(lambda, sigma_i^2 + psi^2).

class NormalRandomEffects final : public Model {
 public:
  explicit NormalRandomEffects(ModelConstants c)
      : Model({"psi", "lambda"}, {ParamInterval{0.0, kInf, true, false}, real_line()}, 1, std::move(c)) {
    for (double s : constants().sigma) var_.push_back(s * s);
  }

  std::string_view name() const noexcept override { return "normal-random-effects"; }

  double log_likelihood(std::span<const double> theta, const DataSet& y) const override {
    const double psi2 = theta[0] * theta[0];
    double ll = 0.0;
    for (std::size_t i = 0; i < y.rows; ++i) {
      const double v = var_[i] + psi2;
      const double r = y.obs[i] - theta[1];
      ll += -0.5 * (kLog2Pi + std::log(v)) - 0.5 * r * r / v;
    }
    return ll;
  }

  void sample_into(std::span<const double> theta, ReplicateRng& rng, std::size_t n,
                   DataSet& out) const override {
    resize_univariate(out, n);
    const double psi2 = theta[0] * theta[0];
    for (std::size_t i = 0; i < n; ++i) out.obs[i] = theta[1] + std::sqrt(var_[i] + psi2) * rng.normal();
  }

  // Inner maximizer is the precision-weighted mean.
  std::optional<double> profile_log_likelihood(std::span<const double> psi, const DataSet& y,
                                               std::vector<double>* lambda_hat) const override {
    const double psi2 = psi[0] * psi[0];
    double sw = 0.0, swy = 0.0;
    for (std::size_t i = 0; i < y.rows; ++i) {
      const double w = 1.0 / (var_[i] + psi2);
      sw += w;
      swy += w * y.obs[i];
    }
    const double lambda = swy / sw;
    if (lambda_hat != nullptr) *lambda_hat = {lambda};
    double ll = 0.0;
    for (std::size_t i = 0; i < y.rows; ++i) {
      const double v = var_[i] + psi2;
      const double r = y.obs[i] - lambda;
      ll += -0.5 * (kLog2Pi + std::log(v)) - 0.5 * r * r / v;
    }
    return ll;
  }

  // The score in psi^2 is negative once psi^2 exceeds every squared residual,
  // and residuals about the weighted mean are bounded by the data range, so
  // the maximizer lies in [0, range(y)].
  std::optional<std::vector<double>> direct_mle(const DataSet& y) const override {
    const auto [lo, hi] = std::minmax_element(y.obs.begin(), y.obs.end());
    const double upper = *hi - *lo;
    const auto neg = [&](double psi) {
      const double p[1] = {psi};
      return -*profile_log_likelihood(p, y, nullptr);
    };
    double best_psi = 0.0;
    if (upper > 0.0) {
      // Coarse scan guards against a local optimum, then Brent polishes.
      constexpr int kScan = 16;
      double best = neg(0.0);
      int best_k = 0;
      for (int k = 1; k <= kScan; ++k) {
        const double f = neg(upper * k / kScan);
        if (f < best) {
          best = f;
          best_k = k;
        }
      }
      const double a = upper * std::max(best_k - 1, 0) / kScan;
      const double b = upper * std::min(best_k + 1, kScan) / kScan;
      const auto m = numerics::minimize_1d(neg, a, b, {100, 1e-9, 1e-12});
      best_psi = m.min <= best ? m.argmin : upper * best_k / kScan;
    }
    std::vector<double> lambda;
    const double p[1] = {best_psi};
    profile_log_likelihood(p, y, &lambda);
    return std::vector<double>{best_psi, lambda[0]};
  }

  std::vector<double> mle_start(const DataSet& y) const override {
    const double m = mean_of(y.obs);
    double ss = 0.0;
    for (double v : y.obs) ss += (v - m) * (v - m);
    return {std::sqrt(ss / static_cast<double>(y.rows)) + 1.0, m};
  }

  PivotKind pivot() const noexcept override { return PivotKind::nuisance_free; }
  std::vector<double> nuisance_reference() const override { return {0.0}; }

  void check_data(const DataSet& y) const override {
    Model::check_data(y);
    if (y.rows != var_.size()) {
      throw ConfigError("normal-random-effects: number of observations must equal the number of sigma values");
    }
  }

 private:
  std::vector<double> var_;
};

// ---------------------------------------------------------------------------
// Bivariate normal, theta = (rho, mu1, mu2, sigma1, sigma2).

struct Moments {
  double m1, m2, s11, s22, s12;
  double r() const { return s12 / std::sqrt(s11 * s22); }
};

Moments moments_of(const DataSet& y) {
  const double n = static_cast<double>(y.rows);
  Moments m{0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < y.rows; ++i) {
    m.m1 += y.at(i, 0);
    m.m2 += y.at(i, 1);
  }
  m.m1 /= n;
  m.m2 /= n;
  for (std::size_t i = 0; i < y.rows; ++i) {
    const double a = y.at(i, 0) - m.m1, b = y.at(i, 1) - m.m2;
    m.s11 += a * a;
    m.s22 += b * b;
    m.s12 += a * b;
  }
  m.s11 /= n;
  m.s22 /= n;
  m.s12 /= n;
  return m;
}

class BivariateNormalCorrelation final : public Model {
 public:
  BivariateNormalCorrelation()
      : Model({"rho", "mu1", "mu2", "sigma1", "sigma2"},
              {ParamInterval{-1.0, 1.0, false, false}, real_line(), real_line(), positive(), positive()}, 1) {}

  std::string_view name() const noexcept override { return "bivariate-normal-corr"; }

  double log_likelihood(std::span<const double> theta, const DataSet& y) const override {
    const double rho = theta[0], s1 = theta[3], s2 = theta[4];
    const double one_m = 1.0 - rho * rho;
    double q = 0.0;
    for (std::size_t i = 0; i < y.rows; ++i) {
      const double a = (y.at(i, 0) - theta[1]) / s1;
      const double b = (y.at(i, 1) - theta[2]) / s2;
      q += a * a + b * b - 2.0 * rho * a * b;
    }
    const double n = static_cast<double>(y.rows);
    return -n * (kLog2Pi + std::log(s1) + std::log(s2) + 0.5 * std::log(one_m)) - 0.5 * q / one_m;
  }

  void sample_into(std::span<const double> theta, ReplicateRng& rng, std::size_t n,
                   DataSet& out) const override {
    out.rows = n;
    out.cols = 2;
    out.obs.resize(2 * n);
    out.meta.clear();
    const double rho = theta[0];
    const double c = std::sqrt(1.0 - rho * rho);
    for (std::size_t i = 0; i < n; ++i) {
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      out.obs[2 * i] = theta[1] + theta[3] * z1;
      out.obs[2 * i + 1] = theta[2] + theta[4] * (rho * z1 + c * z2);
    }
  }

  // At fixed rho the means are the sample means and
  // sigma_j^2 = s_jj (1 - rho r) / (1 - rho^2).
  std::optional<double> profile_log_likelihood(std::span<const double> psi, const DataSet& y,
                                               std::vector<double>* lambda_hat) const override {
    const Moments m = moments_of(y);
    const double rho = psi[0];
    const double scale = (1.0 - rho * m.r()) / (1.0 - rho * rho);
    const std::vector<double> lambda{m.m1, m.m2, std::sqrt(m.s11 * scale), std::sqrt(m.s22 * scale)};
    const std::vector<double> theta{rho, lambda[0], lambda[1], lambda[2], lambda[3]};
    if (lambda_hat != nullptr) *lambda_hat = lambda;
    return log_likelihood(theta, y);
  }

  std::optional<std::vector<double>> direct_mle(const DataSet& y) const override {
    const Moments m = moments_of(y);
    return std::vector<double>{m.r(), m.m1, m.m2, std::sqrt(m.s11), std::sqrt(m.s22)};
  }

  std::vector<double> mle_start(const DataSet& y) const override {
    const Moments m = moments_of(y);
    return {0.0, m.m1, m.m2, std::sqrt(m.s11), std::sqrt(m.s22)};
  }

  PivotKind pivot() const noexcept override { return PivotKind::nuisance_free; }
  std::vector<double> nuisance_reference() const override { return {0.0, 0.0, 1.0, 1.0}; }

  void check_data(const DataSet& y) const override {
    Model::check_data(y);
    if (y.rows < 3) throw ConfigError("bivariate-normal-corr: need at least three observations");
    const Moments m = moments_of(y);
    if (!(m.s11 > 0.0 && m.s22 > 0.0) || !(std::fabs(m.r()) < 1.0)) {
      throw ConfigError("bivariate-normal-corr: degenerate data (zero variance or perfect correlation)");
    }
  }

  std::vector<std::string> data_columns() const override { return {"y1", "y2"}; }
};

}  // namespace

const std::vector<std::string>& builtin_model_names() {
  static const std::vector<std::string> names{"normal-known-var",    "uniform",
                                              "exponential",         "binomial",
                                              "shifted-exponential", "normal-random-effects",
                                              "bivariate-normal-corr"};
  return names;
}

ModelPtr builtin_model(std::string_view name, const ModelConstants& constants) {
  if (name == "normal-known-var") return std::make_shared<NormalKnownVariance>();
  if (name == "uniform") return std::make_shared<Uniform>();
  if (name == "exponential") return std::make_shared<Exponential>();
  if (name == "binomial") {
    if (!constants.n_trials) throw ConfigError("binomial: missing constant n_trials");
    if (*constants.n_trials < 1) throw ConfigError("binomial: n_trials must be at least 1");
    return std::make_shared<Binomial>(constants);
  }
  if (name == "shifted-exponential") return std::make_shared<ShiftedExponential>();
  if (name == "normal-random-effects") {
    if (constants.sigma.empty()) throw ConfigError("normal-random-effects: missing constant sigma");
    for (double s : constants.sigma) {
      if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("normal-random-effects: sigma values must be positive");
    }
    return std::make_shared<NormalRandomEffects>(constants);
  }
  if (name == "bivariate-normal-corr") return std::make_shared<BivariateNormalCorrelation>();
  throw ConfigError("unknown model: " + std::string(name));
}

}  // namespace pvalfn
