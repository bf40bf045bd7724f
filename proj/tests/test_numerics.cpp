#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pvalfn/errors.hpp"
#include "pvalfn/numerics.hpp"

using namespace pvalfn;
using namespace pvalfn::numerics;

TEST_CASE("chi-square(1) tail against erfc") {
  for (double x : {0.0, 1e-8, 0.1, 1.0, 3.841458820694124, 10.0, 40.0, 200.0}) {
    CHECK(chisq1_sf(x) == doctest::Approx(oracle::chisq1_sf(x)).epsilon(1e-12));
    CHECK(chisq1_cdf(x) + chisq1_sf(x) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(chisq1_cdf(3.841458820694124) == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(chisq1_cdf(10.0) == doctest::Approx(0.998434597741997).epsilon(1e-12));
  CHECK_THROWS_AS(chisq1_sf(-1.0), DomainError);
}

TEST_CASE("incomplete gamma against the Poisson sum") {
  for (int n : {1, 2, 5, 10, 30}) {
    for (double x : {0.01, 0.5, 3.0, 9.9, 10.0, 25.0, 60.0}) {
      CHECK(gamma_p(n, x) == doctest::Approx(oracle::gamma_p_int(n, x)).epsilon(1e-11));
      CHECK(gamma_p(n, x) + gamma_q(n, x) == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
  CHECK(gamma_cdf(10.0, 10.0, 1.0) == doctest::Approx(0.5420702855281478).epsilon(1e-12));
  CHECK(gamma_sf(6.0, 3.0, 2.0) == doctest::Approx(1.0 - oracle::gamma_p_int(3, 3.0)).epsilon(1e-12));
  // Far tail is computed directly, not as 1 - P.
  CHECK(gamma_q(0.5, 400.0) > 0.0);
  CHECK(gamma_q(0.5, 400.0) == doctest::Approx(std::erfc(20.0)).epsilon(1e-10));
}

TEST_CASE("Beta(n, 1) closed forms") {
  CHECK(beta_n1_cdf(7.0 / 8.0, 10) == doctest::Approx(std::pow(7.0 / 8.0, 10)).epsilon(1e-14));
  CHECK(beta_n1_cdf(7.0 / 8.0, 10) == doctest::Approx(0.26307).epsilon(1e-5));
  CHECK(beta_n1_quantile(0.05, 10) == doctest::Approx(std::pow(0.05, 0.1)).epsilon(1e-14));
  CHECK(beta_n1_cdf(1.0, 7) == 1.0);
  CHECK(beta_n1_cdf(0.5, 1) == 0.5);
  CHECK_THROWS_AS(beta_n1_cdf(1.5, 4), DomainError);
  CHECK_THROWS_AS(beta_n1_cdf(-0.5, 4), DomainError);
}

TEST_CASE("normal quantile inverts the normal cdf") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-13));
  for (double p : {1e-12, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.999, 1 - 1e-9}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(normal_cdf(0.0) == 0.5);
}

TEST_CASE("find_root") {
  const auto f = [](double x) { return x * x - 2.0; };
  const double r = find_root(f, make_bracket(f, 0.0, 2.0), {100, 1e-14, 1e-300});
  CHECK(r == doctest::Approx(std::numbers::sqrt2).epsilon(1e-13));
  CHECK_THROWS_AS(make_bracket(f, 2.0, 3.0), BracketError);

  SUBCASE("step function converges to the jump") {
    const auto g = [](double x) { return x < 0.3 ? 1.0 : -1.0; };
    const double j = find_root(g, make_bracket(g, 0.0, 1.0), {200, 1e-12, 1e-300});
    CHECK(j == doctest::Approx(0.3).epsilon(1e-10));
  }
}

TEST_CASE("minimize_1d") {
  const auto m = minimize_1d([](double x) { return (x - 1.3) * (x - 1.3) + 2.0; }, -4.0, 5.0, {200, 1e-10, 1e-14});
  CHECK(m.argmin == doctest::Approx(1.3).epsilon(1e-7));
  CHECK(m.min == doctest::Approx(2.0));

  // Minimum on the boundary is found, since the endpoints are evaluated.
  const auto b = minimize_1d([](double x) { return x; }, 0.0, 1.0, {200, 1e-10, 1e-14});
  CHECK(b.argmin == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("Nelder-Mead") {
  SUBCASE("quadratic bowl") {
    const auto bowl = [](std::span<const double> x) {
      return (x[0] - 1.0) * (x[0] - 1.0) + 4.0 * (x[1] + 2.0) * (x[1] + 2.0);
    };
    const std::vector<double> start{5.0, 5.0};
    const auto m = minimize_nd(bowl, start, {5000, 1e-12, 1e-16});
    CHECK(m.argmin[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(m.argmin[1] == doctest::Approx(-2.0).epsilon(1e-6));
  }
  SUBCASE("Rosenbrock") {
    const auto rosen = [](std::span<const double> x) {
      return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    const std::vector<double> start{-1.2, 1.0};
    const auto m = minimize_nd(rosen, start, {20000, 1e-12, 1e-18});
    CHECK(m.argmin[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(m.argmin[1] == doctest::Approx(1.0).epsilon(1e-4));
  }
  SUBCASE("non-finite start") {
    const auto bad = [](std::span<const double>) { return std::nan(""); };
    const std::vector<double> start{0.0};
    CHECK_THROWS_AS(minimize_nd(bad, start, {}), DomainError);
  }
}

TEST_CASE("optimizer settings are validated") {
  CHECK_THROWS(validate(OptimizerSettings{0, 1e-8, 1e-10}));
  CHECK_THROWS(validate(OptimizerSettings{10, -1.0, 1e-10}));
  CHECK_NOTHROW(validate(OptimizerSettings{}));
}
