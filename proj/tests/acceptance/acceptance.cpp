// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <omp.h>

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "pvalfn/cli.hpp"
#include "pvalfn/inference.hpp"
#include "pvalfn/io.hpp"
#include "pvalfn/mc_engine.hpp"
#include "pvalfn/statistic.hpp"

using namespace pvalfn;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& what, double seconds) {
  std::printf("[%s] %2d  %s  (%.2f s)\n", pass ? "PASS" : "FAIL", id, what.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string num(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string show(const Segment& s, int digits = 4) {
  return std::string(s.lo_closed ? "[" : "(") + num(s.lo, digits) + ", " + num(s.hi, digits) + (s.hi_closed ? "]" : ")");
}

template <class F>
void criterion(int id, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string what;
  bool pass = false;
  try {
    pass = body(what);
  } catch (const std::exception& e) {
    what += std::string(" threw: ") + e.what();
  }
  report(id, pass, what, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

InferenceOptions mc_opts(std::size_t m, std::uint64_t seed) {
  InferenceOptions o;
  o.plan = mc::MonteCarloPlan{};
  o.plan->replicates = m;
  o.plan->base_seed = seed;
  return o;
}

DataSet load(const std::string& file, const std::vector<std::string>& columns, io::Table* table = nullptr) {
  const io::Table t = io::read_table_file(std::string(PVALFN_DATA_DIR) + "/" + file);
  if (table != nullptr) *table = t;
  return io::to_dataset(t, columns);
}

// Wraps a model and counts sampler calls.
class CountingModel final : public Model {
 public:
  explicit CountingModel(ModelPtr inner)
      : Model(inner->labels(), inner->domain(), inner->interest_dim(), inner->constants()), inner_(std::move(inner)) {}

  std::size_t draws() const { return draws_.load(); }

  std::string_view name() const noexcept override { return inner_->name(); }
  double log_likelihood(std::span<const double> theta, const DataSet& y) const override {
    return inner_->log_likelihood(theta, y);
  }
  void sample_into(std::span<const double> theta, ReplicateRng& rng, std::size_t n, DataSet& out) const override {
    ++draws_;
    inner_->sample_into(theta, rng, n, out);
  }
  DataSet sufficient_reduce(const DataSet& y) const override { return inner_->sufficient_reduce(y); }
  std::optional<double> analytic_pvalue(std::span<const double> theta, const DataSet& y) const override {
    return inner_->analytic_pvalue(theta, y);
  }
  std::optional<std::vector<double>> direct_mle(const DataSet& y) const override { return inner_->direct_mle(y); }
  std::vector<double> mle_start(const DataSet& y) const override { return inner_->mle_start(y); }
  std::optional<double> profile_log_likelihood(std::span<const double> psi, const DataSet& y,
                                               std::vector<double>* lambda_hat) const override {
    return inner_->profile_log_likelihood(psi, y, lambda_hat);
  }
  PivotKind pivot() const noexcept override { return inner_->pivot(); }
  std::vector<double> pivot_reference() const override { return inner_->pivot_reference(); }
  std::vector<double> nuisance_reference() const override { return inner_->nuisance_reference(); }
  bool discrete() const noexcept override { return inner_->discrete(); }
  std::vector<std::string> data_columns() const override { return inner_->data_columns(); }

 private:
  ModelPtr inner_;
  mutable std::atomic<std::size_t> draws_{0};
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  const DataSet normal10 = load("normal_n10.csv", {"y"});
  const DataSet exp10 = load("exponential_n10.csv", {"y"});
  const DataSet unif10 = load("uniform_n10.csv", {"y"});

  criterion(1, [&](std::string& what) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = confidence_region(*builtin_model("exponential"), exp10, 0.05, Method::exact);
    const double secs = elapsed_since(t0);
    const auto& s = r.segments.at(0);
    what = "exponential n=10 ybar=7 exact 95%: " + show(s) + " vs (3.98, 14.07) +-0.02, " + num(secs, 3) + " s < 1 s";
    return r.segments.size() == 1 && std::fabs(s.lo - 3.98) <= 0.02 && std::fabs(s.hi - 14.07) <= 0.02 && secs < 1.0;
  });

  criterion(2, [&](std::string& what) {
    ModelConstants c;
    c.n_trials = 20;
    const auto b = builtin_model("binomial", c);
    const DataSet y = DataSet::univariate({13.0});
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = confidence_region(*b, y, 0.05, Method::exact);
    const double secs = elapsed_since(t0);
    const auto wald = comparison_intervals(*b, y, 0.05).at(0);
    const double lo = r.segments.front().lo, hi = r.segments.back().hi;
    what = "binomial n=20 y=13: p-value interval (" + num(lo) + ", " + num(hi) + ") vs (0.42, 0.86) +-0.01; Wald (" +
           num(wald.lo) + ", " + num(wald.hi) + ") vs (0.44, 0.86) +-0.005; " + num(secs, 3) + " s";
    return std::fabs(lo - 0.42) <= 0.01 && std::fabs(hi - 0.86) <= 0.01 && std::fabs(wald.lo - 0.44) <= 0.005 &&
           std::fabs(wald.hi - 0.86) <= 0.005 && secs < 1.0;
  });

  criterion(3, [&](std::string& what) {
    const auto r = confidence_region(*builtin_model("uniform"), unif10, 0.05, Method::exact);
    const double closed_form = 7.0 / numerics::beta_n1_quantile(0.05, 10);
    const auto& s = r.segments.at(0);
    what = "uniform n=10 max=7: " + show(s, 6) + " vs [7, " + num(closed_form, 6) + ") +-1e-4";
    return r.segments.size() == 1 && s.lo == 7.0 && s.lo_closed && !s.hi_closed &&
           std::fabs(s.hi - closed_form) <= 1e-4 && std::fabs(s.hi - 9.4450) <= 1e-4;
  });

  criterion(4, [&](std::string& what) {
    const auto n = builtin_model("normal-known-var");
    const auto r = confidence_region(*n, normal10, 0.05, Method::exact);
    const double half = numerics::normal_quantile(0.975) / std::sqrt(10.0);
    const auto& s = r.segments.at(0);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const double t = 5.5 + 3.0 * i / 199.0;
      const double e = pvalue(*n, ParamPoint({t}), normal10, Method::exact).p;
      const double w = pvalue(*n, ParamPoint({t}), normal10, Method::wilks).p;
      worst = std::max(worst, std::fabs(e - w));
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1e", worst);
    what = "normal n=10 ybar=7: " + show(s) + " vs (" + num(7 - half, 4) + ", " + num(7 + half, 4) +
           ") +-0.001; max |exact - wilks| over 200 points = " + buf;
    return std::fabs(s.lo - 6.380) <= 0.001 && std::fabs(s.hi - 7.620) <= 0.001 && std::fabs(s.lo - (7 - half)) <= 1e-6 &&
           std::fabs(s.hi - (7 + half)) <= 1e-6 && worst <= 1e-12;
  });

  criterion(5, [&](std::string& what) {
    const auto b = builtin_model("bivariate-normal-corr");
    const DataSet y = load("levine_nea_fat.csv", {"y1", "y2"});
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = confidence_region(*b, y, 0.05, Method::mc, mc_opts(100000, 0));
    const double secs = elapsed_since(t0);
    const auto& s = r.segments.at(0);
    const auto fisher = comparison_intervals(*b, y, 0.05).at(0);
    what = "bivariate n=16 r=" + num(mle(*b, y)[0], 4) + " MC M=1e5: " + show(s) + " vs (-0.918, -0.461) +-0.01; Fisher (" +
           num(fisher.lo) + ", " + num(fisher.hi) + ") within 0.02; " + num(secs, 1) + " s < 30 s";
    return std::fabs(s.lo + 0.918) <= 0.01 && std::fabs(s.hi + 0.461) <= 0.01 && std::fabs(fisher.lo - s.lo) <= 0.02 &&
           std::fabs(fisher.hi - s.hi) <= 0.02 && secs < 30.0;
  });

  criterion(6, [&](std::string& what) {
    io::Table table;
    const DataSet y = load("rubin_sat_coaching.csv", {"y"}, &table);
    ModelConstants c;
    c.sigma = table.column(static_cast<std::size_t>(table.find("sigma")));
    const auto m = builtin_model("normal-random-effects", c);
    const auto t0 = std::chrono::steady_clock::now();
    const auto opts = mc_opts(100000, 0);
    const auto r = confidence_region(*m, y, 0.05, Method::mc, opts);
    const auto h0 = test(*m, ParamRegion::point({0.0}), y, 0.05, Method::mc, opts);
    const double secs = elapsed_since(t0);
    const auto& s = r.segments.at(0);
    what = "random effects (Rubin): " + show(s, 2) + " vs [0, 13.40) +-0.25; H0 psi=0 p=" + num(h0.p_value, 3) +
           (h0.reject ? " rejected" : " not rejected") + "; " + num(secs, 1) + " s < 60 s";
    return r.segments.size() == 1 && s.lo == 0.0 && s.lo_closed && !s.hi_closed && std::fabs(s.hi - 13.40) <= 0.25 &&
           !h0.reject && secs < 60.0;
  });

  criterion(7, [&](std::string& what) {
    const auto inner = builtin_model("shifted-exponential");
    const std::vector<double> a{7.0, 3.0}, b{0.0, 1.0};
    const auto ta = mc::simulate_log_stats(*inner, a, a, 25, 11, 10000);
    const auto tb = mc::simulate_log_stats(*inner, b, b, 25, 12, 10000);
    const double ks = oracle::ks_distance(ta, tb);

    // Simulated data of size 25 at (7, 3), then a 30 x 30 pivot-reuse curve.
    const DataSet y = sample(*inner, ParamPoint(a), 2024, 1, 25).front();
    const auto counting = std::make_shared<CountingModel>(inner);
    const ParamPoint hat = mle(*inner, y);
    std::vector<ParamPoint> grid;
    for (int i = 0; i < 30; ++i) {
      for (int j = 0; j < 30; ++j) {
        grid.emplace_back(std::vector{hat[0] - 1.5 + 1.5 * i / 29.0, 0.4 * hat[1] + 1.6 * hat[1] * j / 29.0});
      }
    }
    auto opts = mc_opts(10000, 3);
    opts.plan->estimator = mc::Estimator::pivot_reuse;
    const auto curve = pvalue_curve(*counting, grid, y, Method::mc, opts);
    what = "shifted exponential: KS(T | (7,3), T | (0,1)) = " + num(ks, 4) + " < 0.02 at M=1e4; 30x30 pivot-reuse grid drew " +
           std::to_string(counting->draws()) + " datasets (M = 10000)";
    return ks < 0.02 && counting->draws() == 10000 && curve.datasets_simulated == 10000;
  });

  criterion(8, [&](std::string& what) {
    const std::size_t n_rep = 2000;
    std::string detail;
    bool pass = true;
    // Continuous models: regions recomputed per replicate and p-value ECDF.
    for (const auto& [name, theta] : {std::pair{"normal-known-var", 0.0}, std::pair{"exponential", 7.0}}) {
      const auto m = builtin_model(name);
      const auto draws = sample(*m, ParamPoint({theta}), 8, n_rep, 10);
      std::size_t covered = 0;
      std::array<std::size_t, 3> below{};
      const std::array<double, 3> levels{0.01, 0.05, 0.1};
      for (const auto& d : draws) {
        covered += confidence_region(*m, d, 0.05, Method::exact).contains(theta);
        const double p = pvalue(*m, ParamPoint({theta}), d, Method::exact).p;
        for (std::size_t k = 0; k < 3; ++k) below[k] += p <= levels[k];
      }
      const double cov = static_cast<double>(covered) / n_rep;
      pass = pass && std::fabs(cov - 0.95) <= 0.015;
      detail += std::string(name) + " cover " + num(cov, 3) + ", P(p<=a) ";
      for (std::size_t k = 0; k < 3; ++k) {
        const double f = static_cast<double>(below[k]) / n_rep;
        pass = pass && f <= levels[k] + 0.02;
        detail += num(f, 3) + (k < 2 ? "/" : "; ");
      }
    }
    ModelConstants c;
    c.n_trials = 20;
    const auto b = builtin_model("binomial", c);
    for (double theta : {0.1, 0.5, 0.9}) {
      const auto draws = sample(*b, ParamPoint({theta}), 9, n_rep, 1);
      std::size_t covered = 0;
      for (const auto& d : draws) covered += confidence_region(*b, d, 0.05, Method::exact).contains(theta);
      const double cov = static_cast<double>(covered) / n_rep;
      pass = pass && cov >= 0.935;
      detail += "binomial(" + num(theta, 1) + ") " + num(cov, 3) + (theta < 0.9 ? ", " : "");
    }
    what = "coverage N=2000: " + detail;
    return pass;
  });

  criterion(9, [&](std::string& what) {
    std::size_t passed = 0, total = 0;
    for (const auto& [name, y] : {std::pair{"normal-known-var", normal10}, std::pair{"exponential", exp10}}) {
      const auto m = builtin_model(name);
      // Grid points with moderate p: ten on each side between the 0.1 and 0.9 crossings.
      const auto outer = confidence_region(*m, y, 0.1, Method::exact).segments.at(0);
      const auto inner = confidence_region(*m, y, 0.9, Method::exact).segments.at(0);
      std::vector<double> grid;
      for (int i = 0; i < 10; ++i) {
        grid.push_back(outer.lo + (inner.lo - outer.lo) * (i + 0.5) / 10.0);
        grid.push_back(inner.hi + (outer.hi - inner.hi) * (i + 0.5) / 10.0);
      }
      for (double t : grid) {
        const double exact = pvalue(*m, ParamPoint({t}), y, Method::exact).p;
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
          const auto est = pvalue(*m, ParamPoint({t}), y, Method::mc, mc_opts(1000, seed));
          passed += std::fabs(est.p - exact) <= 3.0 * est.std_err;
          ++total;
        }
      }
    }
    const double rate = static_cast<double>(passed) / static_cast<double>(total);
    what = "MC vs exact (normal, exponential; 20 points x 200 seeds, M=1000): " + std::to_string(passed) + "/" +
           std::to_string(total) + " within 3 std_err = " + num(100 * rate, 2) + "% >= 99%";
    return rate >= 0.99;
  });

  criterion(10, [&](std::string& what) {
    const auto dir = std::filesystem::temp_directory_path() / "pvalfn_acceptance";
    std::filesystem::create_directories(dir);
    const std::string data = std::string(PVALFN_DATA_DIR);
    const std::vector<std::vector<std::string>> commands{
        {"curve", "--model", "exponential", "--data", data + "/exponential_n10.csv", "--method", "mc", "--mc-samples",
         "2000", "--seed", "5", "--grid", "3:16:40"},
        {"curve", "--model", "shifted-exponential", "--inline", "7.5,9.0,7.1,12.0,8.4,10.2", "--method", "mc",
         "--estimator", "pivot-reuse", "--mc-samples", "2000", "--grid", "6:7:6,1:4:6", "--format", "json"},
        {"ci", "--model", "bivariate-normal-corr", "--data", data + "/levine_nea_fat.csv", "--mc-samples", "5000",
         "--seed", "9"},
        {"test", "--model", "normal-random-effects", "--data", data + "/rubin_sat_coaching.csv", "--null", "[0,5]",
         "--mc-samples", "2000", "--format", "json"},
        {"estimate", "--model", "binomial", "--trials", "20", "--inline", "13"},
        {"coverage", "--model", "exponential", "--theta", "7", "--n", "10", "--replicates", "200", "--method", "mc",
         "--mc-samples", "500", "--seed", "3"},
    };
    std::size_t identical = 0;
    const int threads = std::max(2, omp_get_num_procs());
    for (std::size_t i = 0; i < commands.size(); ++i) {
      std::vector<std::string> outputs;
      for (int run = 0; run < 3; ++run) {
        // Run 0 and 1 are plain repeats, run 2 changes the thread count.
        omp_set_num_threads(run == 2 ? threads : 1);
        auto args = commands[i];
        const auto path = dir / ("out_" + std::to_string(i) + "_" + std::to_string(run));
        args.insert(args.end(), {"--out", path.string()});
        std::ostringstream out, err;
        if (cli::run(args, out, err) != 0) throw std::runtime_error(commands[i][0] + ": " + err.str());
        outputs.push_back(slurp(path));
      }
      identical += !outputs[0].empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2];
    }
    omp_set_num_threads(omp_get_num_procs());
    what = "CLI determinism: " + std::to_string(identical) + "/" + std::to_string(commands.size()) +
           " commands byte-identical across repeats and 1 vs " + std::to_string(threads) + " threads";
    return identical == commands.size();
  });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
