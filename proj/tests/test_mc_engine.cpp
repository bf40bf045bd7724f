#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pvalfn/errors.hpp"
#include "pvalfn/mc_engine.hpp"
#include "pvalfn/statistic.hpp"

using namespace pvalfn;
using namespace pvalfn::mc;

namespace {

const DataSet kExp = DataSet::univariate({3, 5, 6, 7, 7, 7, 8, 8, 9, 10});

MonteCarloPlan plan(std::size_t m, std::uint64_t seed, Estimator e = Estimator::plain,
                    ExecPolicy exec = ExecPolicy::parallel) {
  MonteCarloPlan p;
  p.replicates = m;
  p.base_seed = seed;
  p.estimator = e;
  p.exec = exec;
  return p;
}

}  // namespace

TEST_CASE("plan validation") {
  CHECK_THROWS_AS(plan(99, 0).validate(), ConfigError);
  CHECK_NOTHROW(plan(100, 0).validate());
}

TEST_CASE("serial and parallel kernels agree exactly") {
  const auto e = builtin_model("exponential");
  const std::vector<double> theta{5.0};
  const double t_obs = log_test_stat(*e, theta, kExp);
  CHECK(count_exceedances_serial(*e, theta, theta, 10, t_obs, 11, 3000) ==
        count_exceedances_parallel(*e, theta, theta, 10, t_obs, 11, 3000));
  CHECK(simulate_log_stats(*e, theta, theta, 10, 11, 500, ExecPolicy::serial) ==
        simulate_log_stats(*e, theta, theta, 10, 11, 500, ExecPolicy::parallel));

  const auto b = builtin_model("bivariate-normal-corr");
  const std::vector<double> th{-0.5, 0.0, 0.0, 1.0, 1.0};
  CHECK(simulate_log_stats(*b, th, std::vector{-0.5}, 16, 3, 400, ExecPolicy::serial) ==
        simulate_log_stats(*b, th, std::vector{-0.5}, 16, 3, 400, ExecPolicy::parallel));
}

TEST_CASE("p-value estimates are deterministic in the seed") {
  const auto e = builtin_model("exponential");
  const auto a = mc_pvalue(*e, ParamPoint({5.0}), kExp, plan(2000, 1));
  const auto b = mc_pvalue(*e, ParamPoint({5.0}), kExp, plan(2000, 1, Estimator::plain, ExecPolicy::serial));
  const auto c = mc_pvalue(*e, ParamPoint({5.0}), kExp, plan(2000, 2));
  CHECK(a.p_hat == b.p_hat);
  CHECK(a.p_hat != c.p_hat);
  CHECK(a.std_err == doctest::Approx(std::sqrt(a.p_hat * (1 - a.p_hat) / 2000)));
  CHECK(a.resolution() == doctest::Approx(1.0 / 2000));
}

TEST_CASE("ties count as exceedances: p = 1 at the MLE") {
  const auto e = builtin_model("exponential");
  CHECK(mc_pvalue(*e, ParamPoint({7.0}), kExp, plan(500, 0)).p_hat == 1.0);
  ModelConstants c;
  c.n_trials = 20;
  const auto b = builtin_model("binomial", c);
  CHECK(mc_pvalue(*b, ParamPoint({0.65}), DataSet::univariate({13.0}), plan(500, 0)).p_hat == 1.0);
}

TEST_CASE("infinite observed statistic gives p = 0") {
  const auto u = builtin_model("uniform");
  const auto est = mc_pvalue(*u, ParamPoint({3.0}), DataSet::univariate({1.0, 4.0}), plan(500, 0));
  CHECK(est.p_hat == 0.0);
}

TEST_CASE("Monte Carlo agrees with the exact p-value") {
  const auto e = builtin_model("exponential");
  for (double theta : {4.0, 5.0, 9.0, 12.0}) {
    const auto est = mc_pvalue(*e, ParamPoint({theta}), kExp, plan(20000, 5));
    const double exact = oracle::exponential_pvalue(10, 7.0, theta);
    CHECK(std::fabs(est.p_hat - exact) <= 4.0 * est.std_err + 1e-4);
  }
}

TEST_CASE("pivot reuse draws M datasets for the whole curve") {
  const auto s = builtin_model("shifted-exponential");
  const DataSet y = DataSet::univariate({7.5, 9.0, 7.1, 12.0, 8.4, 10.2, 7.9, 8.8});
  std::vector<ParamPoint> grid;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) grid.emplace_back(std::vector{6.0 + 0.2 * i, 1.0 + 0.5 * j});
  }
  const auto reuse = mc_pvalue_curve(*s, grid, y, plan(1000, 3, Estimator::pivot_reuse));
  CHECK(reuse.datasets_simulated == 1000);
  CHECK(reuse.estimator_used == Estimator::pivot_reuse);
  const auto plain = mc_pvalue_curve(*s, grid, y, plan(1000, 3));
  CHECK(plain.datasets_simulated == 1000 * grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(std::fabs(reuse.points[i].p_hat - plain.points[i].p_hat) <=
          4.0 * std::hypot(reuse.points[i].std_err, plain.points[i].std_err) + 2e-3);
  }

  // Without a full pivot the estimator falls back to plain CRN evaluation.
  ModelConstants c;
  c.n_trials = 20;
  const auto b = builtin_model("binomial", c);
  const std::vector<ParamPoint> g{ParamPoint({0.5}), ParamPoint({0.6})};
  CHECK(mc_pvalue_curve(*b, g, DataSet::univariate({13.0}), plan(200, 0, Estimator::pivot_reuse)).estimator_used ==
        Estimator::plain);
}

TEST_CASE("importance sampling") {
  const auto e = builtin_model("exponential");
  SUBCASE("proposal equal to the target reproduces the plain estimate") {
    auto p = plan(3000, 9, Estimator::importance);
    p.proposal = std::vector{5.0};
    const auto is = mc_pvalue(*e, ParamPoint({5.0}), kExp, p);
    const auto plain = mc_pvalue(*e, ParamPoint({5.0}), kExp, plan(3000, 9));
    CHECK(is.p_hat == doctest::Approx(plain.p_hat).epsilon(1e-12));
    REQUIRE(is.weights);
    CHECK(is.weights->mean_weight == doctest::Approx(1.0));
  }
  SUBCASE("one proposal sample serves a curve") {
    std::vector<ParamPoint> grid;
    // Proposal at the MLE (7); targets with much heavier tails than the
    // proposal give infinite-variance weights, so the grid stays below 2 * 7.
    for (double t : {4.5, 6.0, 9.0}) grid.emplace_back(std::vector{t});
    auto p = plan(20000, 4, Estimator::importance);
    const auto curve = is_pvalue_curve(*e, grid, kExp, p);
    CHECK(curve.datasets_simulated == 20000);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double exact = oracle::exponential_pvalue(10, 7.0, grid[i][0]);
      CHECK(std::fabs(curve.points[i].p_hat - exact) <= 5.0 * curve.points[i].std_err + 2e-3);
    }
  }
  SUBCASE("zero proposal density under a positive target is an error") {
    const auto u = builtin_model("uniform");
    auto p = plan(200, 0, Estimator::importance);
    p.proposal = std::vector{1.0};
    CHECK_THROWS_AS(mc_pvalue(*u, ParamPoint({5.0}), DataSet::univariate({0.5, 0.9}), p), NumericalError);
  }
}

TEST_CASE("marginal p-values need a nuisance-free statistic") {
  const auto s = builtin_model("shifted-exponential");
  const DataSet y = DataSet::univariate({7.5, 9.0, 7.1});
  CHECK_THROWS_AS(marginal_mc_pvalue(*s, ParamPoint({7.0}), y, plan(200, 0)), ContractError);

  const auto b = builtin_model("bivariate-normal-corr");
  const std::vector<double> a{1.0, 2.0, 3.5, 4.0, 2.2, 0.3}, c{2.0, 2.5, 2.0, 5.0, 1.0, 0.0};
  const auto est = marginal_mc_pvalue(*b, ParamPoint({0.2}), DataSet::bivariate(a, c), plan(2000, 0));
  CHECK(est.p_hat > 0.0);
  CHECK(est.p_hat <= 1.0);
}
