// csb-ewma: command-line front end for the CSB-EWMA chart.
//
//   monitor            run the chart over a long-format t,stream,value CSV
//   arl0 / arl1        Monte Carlo run-length estimates
//   optimize           grid search for (lambda, L) hitting a target ARL0
//   cv                 ARL1 coefficient of variation across distributions
//   validate-variance  incremental vs direct exact variance, optional MC check
//
// Exit codes: 0 success, 2 input/validation error, 3 internal invariant violation.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "csb_ewma/csb_ewma.hpp"

namespace {

using namespace csb_ewma;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInvariant = 3;

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct RunConfig {
  // chart
  double lambda = kUnset;
  double limit = kUnset;
  int streams = 10;
  double p0 = 0.5;
  double median0 = 0.0;
  double r0 = 0.0;
  double target = 370.0;
  // simulation
  std::uint64_t reps = 0;  // 0: command default
  std::uint64_t cap = 0;   // 0: command default
  std::uint64_t seed = 42;
  unsigned workers = 0;
  std::vector<double> deltas;
  std::vector<std::string> families;
  // optimize grid
  double lambda_min = 0.10, lambda_max = 0.90, lambda_step = 0.025;
  double limit_min = 1.00, limit_max = 2.50, limit_step = 0.025;
  bool exhaustive = false;
  bool per_lambda = false;
  // validate-variance
  std::vector<double> lambdas{0.1, 0.2, 0.5, 0.9, 1.0};
  std::uint64_t t_max = 512;
  bool monte_carlo = false;
  // io
  std::string input;
  std::string output = "-";
  std::string cells_out;
  bool raw = false;
};

class ValidationError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Recommended defaults: (0.2, 1.4) for ARL0 370 and (0.15, 1.55) for ARL0 500.
void apply_target_defaults(RunConfig& cfg) {
  if (!std::isnan(cfg.lambda) && !std::isnan(cfg.limit)) return;
  double lambda = 0.0, limit = 0.0;
  if (cfg.target == 370.0) {
    lambda = 0.2;
    limit = 1.4;
  } else if (cfg.target == 500.0) {
    lambda = 0.15;
    limit = 1.55;
  } else {
    throw ValidationError("no default (lambda, L) for target " + format_number(cfg.target) +
                          "; pass --lambda and --limit");
  }
  if (std::isnan(cfg.lambda)) cfg.lambda = lambda;
  if (std::isnan(cfg.limit)) cfg.limit = limit;
}

ChartParams chart_params(const RunConfig& cfg) {
  ChartParams p;
  p.k = cfg.streams;
  p.lambda = cfg.lambda;
  p.limit_multiplier = cfg.limit;
  p.p0 = cfg.p0;
  p.median0 = cfg.median0;
  p.r0 = cfg.r0;
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  return p;
}

SimulationOptions sim_options(const RunConfig& cfg, std::uint64_t default_reps,
                              std::uint64_t default_cap) {
  SimulationOptions o;
  o.n_reps = cfg.reps ? cfg.reps : default_reps;
  o.cap = cfg.cap ? cfg.cap : default_cap;
  o.seed = cfg.seed;
  o.workers = cfg.workers;
  return o;
}

std::vector<Family> families_of(const RunConfig& cfg, std::vector<Family> fallback) {
  if (cfg.families.empty()) return fallback;
  std::vector<Family> out;
  for (const auto& token : cfg.families) {
    try {
      out.push_back(parse_family(token));
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
  }
  return out;
}

std::vector<double> deltas_of(const RunConfig& cfg) {
  std::vector<double> d = cfg.deltas.empty() ? make_grid(0.05, 0.50, 0.05) : cfg.deltas;
  for (double x : d)
    if (!(x >= 0.0 && x <= 1.0 - cfg.p0))
      throw ValidationError("delta " + format_number(x) + " outside [0, 1 - p0]");
  return d;
}

/// Opens --output ("-" is stdout).
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw ValidationError("cannot open output file '" + path + "'");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

int cmd_monitor(RunConfig cfg, bool streams_given) {
  apply_target_defaults(cfg);
  std::ifstream in(cfg.input);
  if (!in) throw ValidationError("cannot open input file '" + cfg.input + "'");
  const StreamTable table =
      read_long_csv(in, streams_given ? std::optional<int>(cfg.streams) : std::nullopt);
  cfg.streams = table.k();
  const auto records = run_monitor(table, chart_params(cfg));
  Output out(cfg.output);
  write_monitor_csv(out.stream(), records, cfg.raw);
  for (const auto& m : records) {
    if (m.signal) {
      std::cout << "signal at t=" << m.t << '\n';
      return kExitOk;
    }
  }
  std::cout << "no signal in " << records.size() << " periods\n";
  return kExitOk;
}

int cmd_arl(RunConfig cfg, bool in_control) {
  apply_target_defaults(cfg);
  const ChartParams params = chart_params(cfg);
  const std::vector<double> deltas = in_control ? std::vector<double>{0.0} : deltas_of(cfg);
  const auto families = families_of(cfg, {Family::direct});
  const SimulationOptions sim = in_control ? sim_options(cfg, 10'000, kDefaultArl0Cap)
                                           : sim_options(cfg, 50'000, kDefaultArl1Cap);
  std::vector<std::pair<std::pair<double, Family>, DistributionSpec>> jobs;
  for (double d : deltas) {
    for (Family f : families) {
      try {
        jobs.push_back({{d, f}, calibrate_shift(f, d, params.p0)});
      } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
      }
    }
  }
  Output out(cfg.output);
  out.stream() << kArlHeader << '\n';
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    SimulationOptions cell = sim;
    // A single cell keeps the user's seed; multi-cell tables derive one per cell.
    if (jobs.size() > 1) cell.seed = derive_seed(sim.seed, {i});
    const RunLengthSummary s = estimate_arl(params, jobs[i].second, cell);
    write_arl_row(out.stream(), params.lambda, params.limit_multiplier, params.k,
                  jobs[i].first.first, jobs[i].first.second, s, cfg.raw);
  }
  return kExitOk;
}

int cmd_optimize(const RunConfig& cfg) {
  if (!(cfg.target > 0.0)) throw ValidationError("--target must be positive");
  GridSearchOptions opt;
  opt.k = cfg.streams;
  opt.p0 = cfg.p0;
  opt.sim = sim_options(cfg, 10'000, kDefaultArl0Cap);
  opt.exhaustive = cfg.exhaustive;
  std::vector<double> lambdas, limits;
  try {
    lambdas = make_grid(cfg.lambda_min, cfg.lambda_max, cfg.lambda_step);
    limits = make_grid(cfg.limit_min, cfg.limit_max, cfg.limit_step);
    ChartParams probe;
    probe.k = cfg.streams;
    probe.p0 = cfg.p0;
    probe.lambda = lambdas.front();
    probe.limit_multiplier = limits.front();
    probe.validate();
    probe.lambda = lambdas.back();
    probe.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  const auto per_lambda = calibrate_all(cfg.target, lambdas, limits, opt);
  const auto rows = cfg.per_lambda ? per_lambda : select_per_bucket(per_lambda, opt.bucket_width);
  Output out(cfg.output);
  write_grid_csv(out.stream(), rows, cfg.streams, cfg.raw);
  return kExitOk;
}

int cmd_cv(RunConfig cfg) {
  apply_target_defaults(cfg);
  const ChartParams params = chart_params(cfg);
  if (params.p0 != 0.5) throw ValidationError("cv needs p0 = 0.5 (continuous families)");
  ProfileOptions opt;
  opt.k = params.k;
  opt.p0 = params.p0;
  opt.sim = sim_options(cfg, 50'000, kDefaultArl1Cap);
  const GridSearchRow row{params.lambda, params.limit_multiplier, 0.0, 0.0, cfg.target, {}};
  const std::vector<Family> families(kContinuousFamilies.begin(), kContinuousFamilies.end());
  const auto cells = arl1_profile({row}, deltas_of(cfg), families, opt);
  if (!cfg.cells_out.empty()) {
    Output cells_out(cfg.cells_out);
    write_arl1_csv(cells_out.stream(), cells, params.k, cfg.raw);
  }
  Output out(cfg.output);
  write_cv_csv(out.stream(), cv_across_distributions(cells), cfg.raw);
  return kExitOk;
}

int cmd_validate_variance(const RunConfig& cfg) {
  if (cfg.t_max < 1) throw ValidationError("--t-max must be >= 1");
  for (double l : cfg.lambdas)
    if (!(l > 0.0 && l <= 1.0)) throw ValidationError("lambda must lie in (0, 1]");
  bool ok = true;
  std::cout << "lambda,t_max,max_rel_error,bound_ok,var_at_t_max\n";
  for (double l : cfg.lambdas) {
    const VarianceSweep s = sweep_variance(l, cfg.t_max);
    const bool pass = s.max_rel_error <= 1e-10 && s.bound_ok;
    ok = ok && pass;
    std::cout << format_number(l, true) << ',' << s.t_max << ',' << format_number(s.max_rel_error)
              << ',' << (s.bound_ok ? 1 : 0) << ',' << format_number(s.last_direct, true) << '\n';
  }
  if (cfg.monte_carlo) {
    ChartParams p;
    p.k = cfg.streams;
    p.p0 = cfg.p0;
    p.r0 = cfg.r0;
    const std::uint64_t reps = cfg.reps ? cfg.reps : 200'000;
    std::vector<std::uint64_t> checkpoints;
    for (std::uint64_t t : {1, 5, 20, 100})
      if (t <= cfg.t_max) checkpoints.push_back(t);
    if (checkpoints.empty()) checkpoints.push_back(cfg.t_max);
    std::cout << "lambda,t,exact_var,empirical_var,rel_error,mean,mean_se\n";
    for (double l : cfg.lambdas) {
      p.lambda = l;
      for (const auto& m : monte_carlo_moments(p, checkpoints, reps, cfg.seed, cfg.workers)) {
        const bool pass = m.rel_error <= 0.03 && std::abs(m.mean - m.expected_mean) <= 4 * m.mean_se;
        ok = ok && pass;
        std::cout << format_number(l) << ',' << m.t << ',' << format_number(m.exact_var) << ','
                  << format_number(m.empirical_var) << ',' << format_number(m.rel_error) << ','
                  << format_number(m.mean) << ',' << format_number(m.mean_se) << '\n';
      }
    }
  }
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kExitOk : kExitInvariant;
}

/// Flat `key = value` file. '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string_view trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string_view::npos)
      throw InputError(no, "config: expected 'key = value'");
    std::string key(detail::trim(trimmed.substr(0, eq)));
    for (char& ch : key)
      if (ch == '_') ch = '-';
    out[key] = std::string(detail::trim(trimmed.substr(eq + 1)));
  }
  return out;
}

/// Fills options not given on the command line from the config file.
void apply_config(CLI::App& app, CLI::App& sub, const std::map<std::string, std::string>& config) {
  for (const auto& [key, value] : config) {
    CLI::Option* opt = nullptr;
    for (CLI::Option* o : sub.get_options())
      if (o->check_lname(key)) opt = o;
    if (opt == nullptr) {
      bool known = false;
      for (CLI::App* other : app.get_subcommands({}))
        for (CLI::Option* o : other->get_options()) known = known || o->check_lname(key);
      if (!known) throw ValidationError("config: unknown key '" + key + "'");
      continue;
    }
    if (opt->count() > 0) continue;  // command line wins
    std::istringstream items(value);
    std::string item;
    if (opt->get_expected_max() > 1) {
      std::string normalized = value;
      for (char& ch : normalized)
        if (ch == ',') ch = ' ';
      items = std::istringstream(normalized);
      while (items >> item) opt->add_result(item);
    } else {
      opt->add_result(value);
    }
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  std::string config_path;

  CLI::App app{"CSB-EWMA control chart for multiple binary streams: monitoring, ARL "
               "simulation and (lambda, L) calibration."};
  app.require_subcommand(1);
  app.add_option("--config", config_path,
                 "Flat 'key = value' file supplying option defaults; command-line flags win");

  auto chart_opts = [&](CLI::App* sub) {
    sub->add_option("--lambda", cfg.lambda,
                    "EWMA smoothing in (0, 1]; default 0.2 for --target 370, 0.15 for 500");
    sub->add_option("--limit", cfg.limit,
                    "Limit multiplier L; default 1.4 for --target 370, 1.55 for 500");
    sub->add_option("--target", cfg.target, "Target ARL0 selecting the (lambda, L) defaults")
        ->capture_default_str();
    sub->add_option("--p0", cfg.p0, "In-control exceedance probability")->capture_default_str();
    sub->add_option("--r0", cfg.r0, "EWMA start value")->capture_default_str();
    sub->add_flag("--raw", cfg.raw, "Full-precision numbers instead of 6 significant digits");
  };
  auto sim_opts = [&](CLI::App* sub, const std::string& reps_default,
                      const std::string& cap_default) {
    sub->add_option("--streams,-k", cfg.streams, "Number of streams k")->capture_default_str();
    sub->add_option("--reps", cfg.reps, "Monte Carlo replications")->default_str(reps_default);
    sub->add_option("--cap", cfg.cap, "Max periods per replication; censored runs count as cap")
        ->default_str(cap_default);
    sub->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    sub->add_option("--workers", cfg.workers, "Worker threads (0: all cores); never changes results")
        ->capture_default_str();
    sub->add_option("--output,-o", cfg.output, "Output CSV path ('-' for stdout)")
        ->capture_default_str();
  };

  auto* monitor = app.add_subcommand(
      "monitor", "Run the chart over a long-format CSV (header t,stream,value). Writes "
                 "t,c,q,w,r,var_r,lcl,ucl,signal and prints the first signal period");
  chart_opts(monitor);
  monitor->add_option("--input,-i", cfg.input, "Input CSV")->required();
  monitor->add_option("--output,-o", cfg.output, "Output CSV path ('-' for stdout)")->required();
  auto* monitor_streams =
      monitor->add_option("--streams,-k", cfg.streams, "Expected k (inferred from data if omitted)");
  monitor->add_option("--median0", cfg.median0, "In-control median")->capture_default_str();

  auto* arl0 = app.add_subcommand(
      "arl0", "In-control ARL. Columns: lambda,limit,k,delta,family,arl,sd,se,n_reps,"
              "n_censored,cap,seed");
  chart_opts(arl0);
  sim_opts(arl0, "10000", "250000");
  arl0->add_option("--family", cfg.families,
                   "normal|laplace|uniform|exponential|direct (default direct)")
      ->delimiter(',');

  auto* arl1 = app.add_subcommand(
      "arl1", "Out-of-control ARL per (delta, family). Columns as arl0");
  chart_opts(arl1);
  sim_opts(arl1, "50000", "50000");
  arl1->add_option("--delta", cfg.deltas, "Shift(s) delta = p1 - p0 (default 0.05..0.50 by 0.05)")
      ->delimiter(',');
  arl1->add_option("--family", cfg.families,
                   "Families (default direct); several allowed, comma separated")
      ->delimiter(',');

  auto* optimize = app.add_subcommand(
      "optimize", "Grid search for (lambda, L) closest to --target ARL0, one row per 0.1-wide "
                  "lambda bucket. Columns: target,lambda,limit,k,delta,family,arl,sd,se,n_reps,"
                  "n_censored,cap,seed");
  sim_opts(optimize, "10000", "250000");
  optimize->add_option("--target", cfg.target, "Target ARL0")->capture_default_str();
  optimize->add_option("--p0", cfg.p0, "In-control exceedance probability")->capture_default_str();
  optimize->add_option("--lambda-min", cfg.lambda_min, "Smallest lambda on the grid")->capture_default_str();
  optimize->add_option("--lambda-max", cfg.lambda_max, "Largest lambda on the grid")->capture_default_str();
  optimize->add_option("--lambda-step", cfg.lambda_step, "Lambda grid spacing")->capture_default_str();
  optimize->add_option("--limit-min", cfg.limit_min, "Smallest L on the grid")->capture_default_str();
  optimize->add_option("--limit-max", cfg.limit_max, "Largest L on the grid")->capture_default_str();
  optimize->add_option("--limit-step", cfg.limit_step, "L grid spacing")->capture_default_str();
  optimize->add_flag("--exhaustive", cfg.exhaustive, "Evaluate every L instead of bisecting");
  optimize->add_flag("--per-lambda", cfg.per_lambda, "Emit the calibrated row for every lambda");
  optimize->add_flag("--raw", cfg.raw, "Full-precision numbers");

  auto* cv = app.add_subcommand(
      "cv", "ARL1 across normal, laplace, uniform and exponential data with independent seeds; "
            "writes delta,mean_arl1,sd_arl1,cv (population SD over the four families)");
  chart_opts(cv);
  sim_opts(cv, "50000", "50000");
  cv->add_option("--delta", cfg.deltas, "Shift(s) (default 0.05..0.50 by 0.05)")->delimiter(',');
  cv->add_option("--cells-out", cfg.cells_out, "Also write the per-family ARL1 table here");

  auto* validate = app.add_subcommand(
      "validate-variance", "Check the O(1) variance recurrence against the direct double sum "
                           "(and optionally Monte Carlo); exit 3 on any violation");
  validate->add_option("--lambda", cfg.lambdas, "Lambda values")->delimiter(',')
      ->capture_default_str();
  validate->add_option("--t-max", cfg.t_max, "Largest period checked")->capture_default_str();
  validate->add_flag("--monte-carlo", cfg.monte_carlo,
                     "Also compare empirical mean/variance of r_t at t = 1, 5, 20, 100");
  validate->add_option("--reps", cfg.reps, "Monte Carlo replications")->default_str("200000");
  validate->add_option("--streams,-k", cfg.streams, "k for the Monte Carlo check")
      ->capture_default_str();
  validate->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
  validate->add_option("--workers", cfg.workers, "Worker threads (0: all cores)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    if (!config_path.empty()) apply_config(app, *active, read_config_file(config_path));
    if (active == monitor) return cmd_monitor(cfg, monitor_streams->count() > 0);
    if (active == arl0) return cmd_arl(cfg, true);
    if (active == arl1) return cmd_arl(cfg, false);
    if (active == optimize) return cmd_optimize(cfg);
    if (active == cv) return cmd_cv(cfg);
    if (active == validate) return cmd_validate_variance(cfg);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInvariant;
  }
  return kExitInvariant;
}
