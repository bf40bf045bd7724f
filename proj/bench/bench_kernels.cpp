// Serial reference kernel vs OpenMP kernel: wall time and agreement.
//
//   bench_kernels [replicates]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <algorithm>
#include <cstdlib>
#include <string>

#include "pvalfn/mc_engine.hpp"
#include "pvalfn/statistic.hpp"

using namespace pvalfn;

namespace {

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Case {
  const char* label;
  ModelPtr model;
  std::vector<double> theta;
  std::size_t n_obs;
};

}  // namespace

int main(int argc, char** argv) {
  const std::size_t replicates = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 100000;
  ModelConstants re;
  re.sigma = {14.9, 10.2, 16.3, 11.0, 9.4, 11.4, 10.4, 17.6};
  const Case cases[] = {
      {"exponential n=10", builtin_model("exponential"), {7.0}, 10},
      {"shifted-exponential n=25", builtin_model("shifted-exponential"), {7.0, 3.0}, 25},
      {"bivariate-normal-corr n=16", builtin_model("bivariate-normal-corr"), {-0.6, 0.0, 0.0, 1.0, 1.0}, 16},
      {"normal-random-effects n=8", builtin_model("normal-random-effects", re), {10.0, 0.0}, 8},
  };

  std::printf("replicates: %zu, threads: %d, processors: %d\n", replicates, omp_get_max_threads(),
              omp_get_num_procs());
  std::printf("%-28s %10s %10s %8s  %s\n", "kernel", "serial s", "omp s", "speedup", "counts");
  bool all_equal = true;
  for (const auto& c : cases) {
    const std::vector<double> interest(c.theta.begin(),
                                       c.theta.begin() + static_cast<std::ptrdiff_t>(c.model->interest_dim()));
    // Threshold near the median so the count is informative.
    const auto pilot = mc::simulate_log_stats(*c.model, c.theta, interest, c.n_obs, 1, 101, mc::ExecPolicy::serial);
    std::vector<double> sorted = pilot;
    std::nth_element(sorted.begin(), sorted.begin() + 50, sorted.end());
    const double t_obs = sorted[50];

    std::size_t serial = 0, parallel = 0;
    const double ts = seconds([&] {
      serial = mc::count_exceedances_serial(*c.model, c.theta, interest, c.n_obs, t_obs, 7, replicates);
    });
    const double tp = seconds([&] {
      parallel = mc::count_exceedances_parallel(*c.model, c.theta, interest, c.n_obs, t_obs, 7, replicates);
    });
    all_equal = all_equal && serial == parallel;
    std::printf("%-28s %10.3f %10.3f %8.2f  %zu %s %zu\n", c.label, ts, tp, ts / tp, serial,
                serial == parallel ? "==" : "!=", parallel);
  }
  return all_equal ? 0 : 1;
}
