#include "pvalfn/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pvalfn/errors.hpp"
#include "pvalfn/inference.hpp"
#include "pvalfn/io.hpp"
#include "pvalfn/statistic.hpp"

namespace pvalfn::cli {

namespace {

struct RunConfig {
  std::string command;
  std::string model;
  std::optional<int> trials;
  std::vector<double> sigma;
  std::string data_path;
  std::string inline_data;
  double alpha = 0.05;
  std::string method = "auto";
  std::optional<std::size_t> mc_samples;
  std::uint64_t seed = 0;
  std::string estimator = "plain";
  std::string grid;
  int grid_points = 201;
  std::string null_spec;
  std::string nuisance_box;
  std::string out_path;
  std::string format = "csv";
  std::vector<double> theta;
  std::size_t replicates = 2000;
  std::optional<std::size_t> n_obs;
};

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  return out;
}

double number(std::string text) {
  text.erase(0, text.find_first_not_of(" \t"));
  text.erase(text.find_last_not_of(" \t") + 1);
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + text + "'");
  }
  if (used != text.size()) throw ConfigError("not a number: '" + text + "'");
  return v;
}

// ---------------------------------------------------------------------------
// Configuration

void load_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "model") cfg.model = v.get<std::string>();
      else if (key == "trials") cfg.trials = v.get<int>();
      else if (key == "sigma") cfg.sigma = v.get<std::vector<double>>();
      else if (key == "data") cfg.data_path = v.get<std::string>();
      else if (key == "inline") cfg.inline_data = v.get<std::string>();
      else if (key == "alpha") cfg.alpha = v.get<double>();
      else if (key == "method") cfg.method = v.get<std::string>();
      else if (key == "mc_samples") cfg.mc_samples = v.get<std::size_t>();
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "estimator") cfg.estimator = v.get<std::string>();
      else if (key == "grid") cfg.grid = v.get<std::string>();
      else if (key == "grid_points") cfg.grid_points = v.get<int>();
      else if (key == "null") cfg.null_spec = v.get<std::string>();
      else if (key == "nuisance_box") cfg.nuisance_box = v.get<std::string>();
      else if (key == "out") cfg.out_path = v.get<std::string>();
      else if (key == "format") cfg.format = v.get<std::string>();
      else if (key == "theta") cfg.theta = v.get<std::vector<double>>();
      else if (key == "replicates") cfg.replicates = v.get<std::size_t>();
      else if (key == "n") cfg.n_obs = v.get<std::size_t>();
      else throw ConfigError("config file: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
}

void add_common_options(CLI::App& sub, RunConfig& cfg, std::string& config_path) {
  sub.add_option("--config", config_path, "JSON file with option values; flags override it");
  sub.add_option("--model", cfg.model, "Model name")->check(CLI::IsMember(builtin_model_names()));
  sub.add_option("--trials", cfg.trials, "Number of trials (binomial)");
  sub.add_option("--sigma", cfg.sigma, "Known standard errors (random effects)")->delimiter(',');
  sub.add_option("--data", cfg.data_path, "CSV data file");
  sub.add_option("--inline", cfg.inline_data, "Inline data: '1,2,3' or rows '1,2;3,4'");
  sub.add_option("--alpha", cfg.alpha, "Level alpha in (0, 1)");
  sub.add_option("--method", cfg.method, "exact|mc|wilks|auto")
      ->check(CLI::IsMember({"exact", "mc", "wilks", "auto"}));
  sub.add_option("--mc-samples", cfg.mc_samples, "Monte Carlo replicates M");
  sub.add_option("--seed", cfg.seed, "Base seed (default: $PVALFN_SEED or 0)");
  sub.add_option("--estimator", cfg.estimator, "plain|pivot-reuse|importance")
      ->check(CLI::IsMember({"plain", "pivot-reuse", "importance"}));
  sub.add_option("--null", cfg.null_spec, "Null region: '0', '7,3', '(-inf,6]', '[5,8]x[1,3]'");
  sub.add_option("--nuisance-box", cfg.nuisance_box, "Search box for the sup over nuisance values");
  sub.add_option("--out", cfg.out_path, "Output file");
  sub.add_option("--format", cfg.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
}

Method resolve_method(const RunConfig& cfg, const Model& model, const DataSet& y) {
  if (cfg.method == "exact") return Method::exact;
  if (cfg.method == "mc") return Method::mc;
  if (cfg.method == "wilks") return Method::wilks;
  if (!model.has_nuisance() && model.analytic_pvalue(mle(model, y).values, y)) return Method::exact;
  return Method::mc;
}

mc::Estimator parse_estimator(const std::string& s) {
  if (s == "pivot-reuse") return mc::Estimator::pivot_reuse;
  if (s == "importance") return mc::Estimator::importance;
  return mc::Estimator::plain;
}

ParamInterval parse_interval(const std::string& text) {
  if (text.size() < 5) throw ConfigError("malformed interval '" + text + "'");
  const char open = text.front(), close = text.back();
  if ((open != '[' && open != '(') || (close != ']' && close != ')')) {
    throw ConfigError("malformed interval '" + text + "': use [a,b], (a,b], ...");
  }
  const auto parts = split(text.substr(1, text.size() - 2), ',');
  if (parts.size() != 2) throw ConfigError("malformed interval '" + text + "'");
  ParamInterval iv{number(parts[0]), number(parts[1]), open == '[', close == ']'};
  if (iv.lo > iv.hi) throw ConfigError("interval '" + text + "' is empty");
  return iv;
}

std::vector<ParamInterval> parse_box(const std::string& text) {
  std::vector<ParamInterval> box;
  for (const auto& part : split(text, 'x')) box.push_back(parse_interval(part));
  return box;
}

ParamRegion parse_null(const std::string& text) {
  if (text.empty()) throw ConfigError("--null is required for the test command");
  if (text.find_first_of("[(") == std::string::npos) {
    std::vector<double> point;
    for (const auto& p : split(text, ',')) point.push_back(number(p));
    return ParamRegion::point(std::move(point));
  }
  return ParamRegion::from_box(parse_box(text));
}

struct Setup {
  ModelPtr model;
  DataSet data;
  bool has_data = false;
  Method method = Method::exact;
  InferenceOptions opts;
  std::string digest;
};

io::Table load_table(const RunConfig& cfg, const std::vector<std::string>& inline_columns) {
  if (!cfg.data_path.empty() && !cfg.inline_data.empty()) throw ConfigError("use either --data or --inline, not both");
  if (!cfg.data_path.empty()) return io::read_table_file(cfg.data_path);
  return io::parse_inline(cfg.inline_data, inline_columns);
}

Setup make_setup(const RunConfig& cfg, bool data_required, std::size_t default_samples) {
  if (cfg.model.empty()) throw ConfigError("--model is required");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("--alpha must lie in (0, 1)");
  Setup s;
  ModelConstants constants;
  constants.n_trials = cfg.trials;
  constants.sigma = cfg.sigma;

  std::optional<io::Table> table;
  if (!cfg.data_path.empty() || !cfg.inline_data.empty()) {
    std::vector<std::string> inline_columns{"y"};
    if (cfg.model == "bivariate-normal-corr") inline_columns = {"y1", "y2"};
    if (cfg.model == "normal-random-effects" && cfg.sigma.empty()) inline_columns = {"y", "sigma"};
    if (cfg.model == "binomial" && !cfg.trials && cfg.inline_data.find(';') != std::string::npos) {
      inline_columns = {"y", "trials"};
    }
    table = load_table(cfg, inline_columns);
    // Per-dataset constants may ride along as data columns.
    const auto column_or = [&](const std::string& name, std::size_t fallback) -> int {
      const int j = table->find(name);
      if (j >= 0) return j;
      return table->rows.front().size() > fallback ? static_cast<int>(fallback) : -1;
    };
    if (cfg.model == "normal-random-effects" && constants.sigma.empty()) {
      const int j = column_or("sigma", 1);
      if (j < 0) throw ConfigError("normal-random-effects needs --sigma or a sigma data column");
      constants.sigma = table->column(static_cast<std::size_t>(j));
    }
    if (cfg.model == "binomial" && !constants.n_trials) {
      const int j = column_or("trials", 1);
      if (j >= 0) constants.n_trials = static_cast<int>(table->rows.front()[static_cast<std::size_t>(j)]);
    }
  } else if (data_required) {
    throw ConfigError("--data or --inline is required");
  }

  s.model = builtin_model(cfg.model, constants);
  if (table) {
    s.data = io::to_dataset(*table, s.model->data_columns());
    s.model->check_data(s.data);
    s.has_data = true;
    s.digest = io::data_digest(s.data);
    s.method = resolve_method(cfg, *s.model, s.data);
  } else {
    s.method = cfg.method == "exact" ? Method::exact : cfg.method == "wilks" ? Method::wilks : Method::mc;
    if (cfg.method == "auto") s.method = s.model->has_nuisance() ? Method::mc : Method::exact;
  }
  if (s.method == Method::mc) {
    mc::MonteCarloPlan plan;
    plan.replicates = cfg.mc_samples.value_or(default_samples);
    plan.base_seed = cfg.seed;
    plan.estimator = parse_estimator(cfg.estimator);
    plan.validate();
    s.opts.plan = plan;
  }
  if (!cfg.nuisance_box.empty()) s.opts.nuisance_box = parse_box(cfg.nuisance_box);
  return s;
}

std::vector<std::pair<std::string, std::string>> metadata(const RunConfig& cfg, const Setup& s) {
  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("command", cfg.command);
  meta.emplace_back("model", cfg.model);
  if (s.model->constants().n_trials) meta.emplace_back("trials", std::to_string(*s.model->constants().n_trials));
  if (!s.model->constants().sigma.empty()) {
    std::string joined;
    for (double v : s.model->constants().sigma) joined += (joined.empty() ? "" : ",") + io::format_double(v);
    meta.emplace_back("sigma", joined);
  }
  meta.emplace_back("method", std::string(to_string(s.method)));
  meta.emplace_back("M", s.opts.plan ? std::to_string(s.opts.plan->replicates) : "none");
  meta.emplace_back("seed", std::to_string(cfg.seed));
  if (s.opts.plan) meta.emplace_back("estimator", std::string(mc::to_string(s.opts.plan->estimator)));
  meta.emplace_back("alpha", io::format_double(cfg.alpha));
  if (s.has_data) meta.emplace_back("data_sha256", s.digest);
  return meta;
}

void emit(const RunConfig& cfg, const io::CurveFile& file, std::ostream& out) {
  const auto write = [&](std::ostream& os) {
    if (cfg.format == "json") {
      io::write_curve_json(os, file);
    } else {
      io::write_curve_csv(os, file);
    }
  };
  if (cfg.out_path.empty()) {
    write(out);
    return;
  }
  std::ofstream f(cfg.out_path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + cfg.out_path + "'");
  write(f);
  if (!f) throw ConfigError("write to '" + cfg.out_path + "' failed");
}

// Records go to --out when given, or to stdout in JSON mode; the readable
// summary is printed otherwise.
bool record_to_stdout(const RunConfig& cfg) { return cfg.out_path.empty() && cfg.format == "json"; }

// ---------------------------------------------------------------------------
// Commands

std::vector<std::vector<double>> parse_grid(const std::string& spec) {
  std::vector<std::vector<double>> axes;
  for (const auto& dim : split(spec, ',')) {
    const auto parts = split(dim, ':');
    if (parts.size() != 3) throw ConfigError("grid '" + dim + "': use LO:HI:N");
    const double lo = number(parts[0]), hi = number(parts[1]);
    const double n = number(parts[2]);
    if (!(n >= 1) || n != std::floor(n)) throw ConfigError("grid '" + dim + "': N must be a positive integer");
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError("grid '" + dim + "': need LO <= HI");
    const auto count = static_cast<std::size_t>(n);
    std::vector<double> axis(count);
    for (std::size_t i = 0; i < count; ++i) {
      axis[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

// Span of the max-p point plus a margin, out to where p drops below 0.001.
std::vector<double> auto_axis(const RunConfig& cfg, const Setup& s) {
  if (s.model->interest_dim() != 1) throw ConfigError("--grid is required for models with more than one parameter");
  const Method scout = s.method == Method::mc ? Method::wilks : s.method;
  const ConfidenceRegion wide = confidence_region(*s.model, s.data, 0.001, scout, s.opts);
  const double center = mle(*s.model, s.data)[0];
  double lo = wide.segments.empty() ? center : wide.segments.front().lo;
  double hi = wide.segments.empty() ? center : wide.segments.back().hi;
  if (std::isinf(lo)) lo = center - 10.0 * (1.0 + std::fabs(center));
  if (std::isinf(hi)) hi = center + 10.0 * (1.0 + std::fabs(center));
  const double pad = 0.1 * std::max(hi - lo, 1e-3 * (1.0 + std::fabs(center)));
  const ParamInterval& dom = s.model->domain()[0];
  lo = std::max(lo - pad, dom.lo);
  hi = std::min(hi + pad, dom.hi);
  const int n = std::max(cfg.grid_points, 2);
  std::vector<double> axis(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = lo + (hi - lo) * i / (n - 1);
    if (!dom.contains(x)) x = i == 0 ? std::nextafter(x, hi) : std::nextafter(x, lo);
    axis[static_cast<std::size_t>(i)] = x;
  }
  return axis;
}

int cmd_curve(const RunConfig& cfg, std::ostream& out) {
  Setup s = make_setup(cfg, true, 10000);
  const Model& model = *s.model;
  std::vector<std::vector<double>> axes =
      cfg.grid.empty() ? std::vector<std::vector<double>>{auto_axis(cfg, s)} : parse_grid(cfg.grid);
  if (axes.size() != model.interest_dim()) {
    throw ConfigError("grid has " + std::to_string(axes.size()) + " dimension(s), the curve needs " +
                      std::to_string(model.interest_dim()));
  }

  std::vector<ParamPoint> grid;
  std::vector<std::size_t> idx(axes.size(), 0);
  std::vector<std::string> labels(model.labels().begin(),
                                  model.labels().begin() + static_cast<std::ptrdiff_t>(model.interest_dim()));
  while (true) {
    std::vector<double> v(axes.size());
    for (std::size_t d = 0; d < axes.size(); ++d) v[d] = axes[d][idx[d]];
    grid.emplace_back(std::move(v), labels);
    // Last dimension varies slowest so rows read naturally as (theta_1, theta_2).
    std::size_t d = 0;
    while (d < axes.size() && ++idx[d] == axes[d].size()) idx[d++] = 0;
    if (d == axes.size()) break;
  }

  const PValueCurve curve = pvalue_curve(model, grid, s.data, s.method, s.opts);
  io::CurveFile file;
  file.metadata = metadata(cfg, s);
  std::string grid_text = cfg.grid;
  if (grid_text.empty()) {
    grid_text = io::format_double(axes[0].front()) + ":" + io::format_double(axes[0].back()) + ":" +
                std::to_string(axes[0].size());
  }
  file.metadata.emplace_back("grid", grid_text);
  if (s.method == Method::mc) file.metadata.emplace_back("datasets_simulated", std::to_string(curve.datasets_simulated));
  file.columns = labels;
  file.columns.push_back("p");
  file.columns.push_back("std_err");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<double> row = grid[i].values;
    row.push_back(curve.p[i]);
    row.push_back(curve.std_err[i]);
    file.rows.push_back(std::move(row));
  }
  emit(cfg, file, out);
  return ok;
}

int cmd_ci(const RunConfig& cfg, std::ostream& out) {
  Setup s = make_setup(cfg, true, 100000);
  const Model& model = *s.model;
  if (model.interest_dim() != 1) throw ConfigError("ci needs a scalar interest parameter; use curve for regions");
  const ConfidenceRegion region = confidence_region(model, s.data, cfg.alpha, s.method, s.opts);

  io::CurveFile record;
  record.metadata = metadata(cfg, s);
  record.columns = {"lo", "hi", "lo_closed", "hi_closed", "lo_std_err", "hi_std_err"};
  for (const auto& seg : region.segments) {
    record.rows.push_back({seg.lo, seg.hi, seg.lo_closed ? 1.0 : 0.0, seg.hi_closed ? 1.0 : 0.0, seg.lo_std_err,
                           seg.hi_std_err});
  }
  if (record_to_stdout(cfg)) {
    emit(cfg, record, out);
    return ok;
  }

  const std::string label = model.labels()[0];
  out << "level: " << fmt(region.level) << "\n";
  out << "method: " << to_string(s.method);
  if (s.opts.plan) out << " (M=" << s.opts.plan->replicates << ", seed=" << cfg.seed << ")";
  out << "\n";
  if (region.segments.empty()) out << "region: empty\n";
  for (const auto& seg : region.segments) {
    out << label << ": " << (seg.lo_closed ? "[" : "(") << fmt(seg.lo) << ", " << fmt(seg.hi)
        << (seg.hi_closed ? "]" : ")") << "\n";
    if (seg.lo_unbounded()) out << "  lower side unbounded\n";
    if (seg.hi_unbounded()) out << "  upper side unbounded\n";
    if (s.method == Method::mc) {
      out << "  endpoint std_err: " << fmt(seg.lo_std_err) << ", " << fmt(seg.hi_std_err) << "\n";
    }
  }
  try {
    for (const auto& c : comparison_intervals(model, s.data, cfg.alpha)) {
      out << "comparison " << c.name << ": (" << fmt(c.lo) << ", " << fmt(c.hi) << ")\n";
    }
  } catch (const ContractError&) {
  }
  if (!cfg.out_path.empty()) emit(cfg, record, out);
  return ok;
}

int cmd_test(const RunConfig& cfg, std::ostream& out) {
  Setup s = make_setup(cfg, true, 10000);
  const ParamRegion null_region = parse_null(cfg.null_spec);
  const TestResult r = test(*s.model, null_region, s.data, cfg.alpha, s.method, s.opts);

  io::CurveFile record;
  record.metadata = metadata(cfg, s);
  record.metadata.emplace_back("null", cfg.null_spec);
  record.columns = {"p", "std_err", "alpha", "reject"};
  record.rows.push_back({r.p_value, r.std_err, r.alpha, r.reject ? 1.0 : 0.0});
  if (record_to_stdout(cfg)) {
    emit(cfg, record, out);
    return ok;
  }
  out << "null: " << cfg.null_spec << "\n";
  out << "method: " << to_string(s.method) << "\n";
  out << "p-value: " << fmt(r.p_value);
  if (s.method == Method::mc) out << " (std_err " << fmt(r.std_err) << ")";
  out << "\n";
  out << "alpha: " << fmt(r.alpha) << "\n";
  out << "decision: " << (r.reject ? "reject" : "do not reject") << "\n";
  if (!cfg.out_path.empty()) emit(cfg, record, out);
  return ok;
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out) {
  Setup s = make_setup(cfg, true, 10000);
  const ParamPoint hat = max_pvalue_estimate(*s.model, s.data);

  io::CurveFile record;
  record.metadata = metadata(cfg, s);
  record.columns = s.model->labels();
  record.rows.push_back(hat.values);
  if (record_to_stdout(cfg)) {
    emit(cfg, record, out);
    return ok;
  }
  for (std::size_t i = 0; i < hat.size(); ++i) out << s.model->labels()[i] << " = " << fmt(hat[i]) << "\n";
  if (!cfg.out_path.empty()) emit(cfg, record, out);
  return ok;
}

int cmd_coverage(const RunConfig& cfg, std::ostream& out) {
  Setup s = make_setup(cfg, false, 1000);
  const Model& model = *s.model;
  if (cfg.replicates < 100) throw ConfigError("--replicates must be at least 100");
  if (cfg.theta.empty()) throw ConfigError("--theta (true parameter value) is required");
  model.check_theta(cfg.theta);
  std::size_t n_obs = 0;
  if (cfg.n_obs) {
    n_obs = *cfg.n_obs;
  } else if (s.has_data) {
    n_obs = s.data.rows;
  } else if (model.name() == "binomial") {
    n_obs = 1;
  } else if (!model.constants().sigma.empty()) {
    n_obs = model.constants().sigma.size();
  } else {
    throw ConfigError("--n (sample size) or a dataset is required");
  }

  const std::vector<DataSet> draws = sample(model, make_point(model, cfg.theta), cfg.seed, cfg.replicates, n_obs);
  const std::vector<double> interest(cfg.theta.begin(),
                                     cfg.theta.begin() + static_cast<std::ptrdiff_t>(model.interest_dim()));
  const ParamPoint psi(interest, std::vector<std::string>(model.labels().begin(),
                                                          model.labels().begin() +
                                                              static_cast<std::ptrdiff_t>(model.interest_dim())));
  std::vector<double> pvals(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    InferenceOptions opts = s.opts;
    // Independent Monte Carlo streams per simulated dataset.
    if (opts.plan) opts.plan->base_seed = replicate_key(cfg.seed ^ 0xC0FFEEULL, i);
    pvals[i] = interest_pvalue(model, psi, draws[i], s.method, opts).p;
  }

  std::vector<double> levels{0.01, 0.05, 0.1};
  if (std::find(levels.begin(), levels.end(), cfg.alpha) == levels.end()) levels.push_back(cfg.alpha);
  std::sort(levels.begin(), levels.end());

  io::CurveFile record;
  record.metadata = metadata(cfg, s);
  std::string theta_text;
  for (double v : cfg.theta) theta_text += (theta_text.empty() ? "" : ",") + io::format_double(v);
  record.metadata.emplace_back("theta", theta_text);
  record.metadata.emplace_back("replicates", std::to_string(cfg.replicates));
  record.metadata.emplace_back("n", std::to_string(n_obs));
  record.columns = {"alpha", "ecdf", "coverage", "std_err"};
  const double n_rep = static_cast<double>(cfg.replicates);
  for (double a : levels) {
    const auto hits = std::count_if(pvals.begin(), pvals.end(), [a](double p) { return p <= a; });
    const double ecdf = static_cast<double>(hits) / n_rep;
    record.rows.push_back({a, ecdf, 1.0 - ecdf, std::sqrt(ecdf * (1.0 - ecdf) / n_rep)});
  }
  if (record_to_stdout(cfg)) {
    emit(cfg, record, out);
    return ok;
  }
  out << "replicates: " << cfg.replicates << ", n: " << n_obs << ", method: " << to_string(s.method) << "\n";
  for (const auto& row : record.rows) {
    out << "alpha " << fmt(row[0]) << ": coverage " << fmt(row[2]) << " (std_err " << fmt(row[3])
        << "), P(p <= alpha) = " << fmt(row[1]) << "\n";
  }
  if (!cfg.out_path.empty()) emit(cfg, record, out);
  return ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  if (const char* env = std::getenv("PVALFN_SEED")) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      err << "error: PVALFN_SEED is not an unsigned integer\n";
      return config_error;
    }
  }

  // The config file is applied first so that explicit flags win.
  for (std::size_t i = 0; i < args.size(); ++i) {
    try {
      if (args[i] == "--config" && i + 1 < args.size()) load_config_file(args[i + 1], cfg);
      if (args[i].rfind("--config=", 0) == 0) load_config_file(args[i].substr(9), cfg);
    } catch (const ConfigError& e) {
      err << "error: " << e.what() << "\n";
      return config_error;
    }
  }

  CLI::App app{"p-value functions from likelihood-ratio statistics"};
  app.name("pvalfn");
  app.require_subcommand(1, 1);
  std::string config_path;
  CLI::App* curve = app.add_subcommand("curve", "Evaluate the p-value function on a grid");
  CLI::App* ci = app.add_subcommand("ci", "Confidence region {theta : p > alpha}");
  CLI::App* test_cmd = app.add_subcommand("test", "Test a point or composite null");
  CLI::App* estimate = app.add_subcommand("estimate", "Maximum p-value (maximum likelihood) estimate");
  CLI::App* coverage = app.add_subcommand("coverage", "Coverage simulation at a true parameter value");
  for (CLI::App* sub : {curve, ci, test_cmd, estimate, coverage}) add_common_options(*sub, cfg, config_path);
  curve->add_option("--grid", cfg.grid, "LO:HI:N per dimension, comma separated");
  curve->add_option("--grid-points", cfg.grid_points, "Points for the automatic grid");
  coverage->add_option("--theta", cfg.theta, "True parameter value")->delimiter(',');
  coverage->add_option("--replicates", cfg.replicates, "Number of simulated datasets N");
  coverage->add_option("--n", cfg.n_obs, "Observations per simulated dataset");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return config_error;
  }

  for (CLI::App* sub : {curve, ci, test_cmd, estimate, coverage}) {
    if (sub->parsed()) cfg.command = sub->get_name();
  }
  try {
    if (cfg.command == "curve") return cmd_curve(cfg, out);
    if (cfg.command == "ci") return cmd_ci(cfg, out);
    if (cfg.command == "test") return cmd_test(cfg, out);
    if (cfg.command == "estimate") return cmd_estimate(cfg, out);
    return cmd_coverage(cfg, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return config_error;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return config_error;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return numerical_failure;
  }
}

}  // namespace pvalfn::cli
