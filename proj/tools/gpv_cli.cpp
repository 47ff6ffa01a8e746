#include "gpvband/harness.hpp"
#include "gpvband/oracles.hpp"
#include "gpvband/parallel.hpp"
#include "gpvband/variance.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

namespace {

using namespace gpvband;

//! apply `key = value` config entries, then let explicit CLI flags win
void apply_config(ExperimentConfig& cfg,
                  const std::map<std::string, std::string>& kv)
{
  const auto to_double = [](const std::string& key, const std::string& v) {
    try {
      return std::stod(v);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad number '" + v + "'");
    }
  };
  const auto to_int = [&](const std::string& key, const std::string& v) {
    return static_cast<int>(to_double(key, v));
  };
  for (const auto& [key, value] : kv) {
    if (key == "design") {
      if (value == "homogeneous")
        cfg.design = Design::power_homogeneous;
      else if (value == "hetero")
        cfg.design = Design::power_hetero;
      else
        throw ConfigError("config key 'design': expected homogeneous|hetero");
    } else if (key == "theta")
      cfg.theta = to_double(key, value);
    else if (key == "sigma")
      cfg.sigma = to_double(key, value);
    else if (key == "n_bidders")
      cfg.n_bidders = to_int(key, value);
    else if (key == "total_obs")
      cfg.total_observations = to_int(key, value);
    else if (key == "range_lo")
      cfg.range_lo = to_double(key, value);
    else if (key == "range_hi")
      cfg.range_hi = to_double(key, value);
    else if (key == "grid_step")
      cfg.grid_step = to_double(key, value);
    else if (key == "mc_reps")
      cfg.mc_replications = to_int(key, value);
    else if (key == "boot_reps")
      cfg.boot_replications = to_int(key, value);
    else if (key == "seed")
      cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "threads")
      cfg.threads = to_int(key, value);
    else if (key == "x_eval")
      cfg.x_eval = to_double(key, value);
    else if (key == "lambda_boundary")
      cfg.lambda_boundary = to_double(key, value);
    else if (key == "out")
      cfg.output_path = value;
    else if (key == "levels") {
      cfg.nominal_levels.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ','))
        cfg.nominal_levels.push_back(to_double(key, item));
    } else
      throw ConfigError("unknown config key '" + key + "'");
  }
}

void write_output(const std::string& path, const std::string& content)
{
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw DataError("cannot write '" + path + "'");
  os << content;
}

int run_selftest(int threads)
{
  int failures = 0;
  const auto check = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << what << '\n';
    if (!ok)
      ++failures;
  };

  check(std::abs(kernel_moment(triweight(), 0) - 1.0) < 1e-10 &&
          std::abs(kernel_moment(triweight_order4(), 2)) < 1e-9,
        "kernel moment conditions");

  {
    Rng rng(7);
    bool ok = true;
    for (int i = 0; i < 1000 && ok; ++i) {
      const double v = rng.uniform();
      const double theta = 0.5 + 3.0 * rng.uniform();
      const int n = 2 + static_cast<int>(rng.uniform_index(6));
      ok = std::abs(oracles::analytic_xi(bne_bid(v, theta, n), theta, n) - v) <
           1e-12;
    }
    check(ok, "inverse bidding strategy identity");
  }

  check(std::abs(oracles::ratio_qb_over_gpv(1.0, 2, triweight()) - 1.3259) <
            0.005 &&
          std::abs(oracles::ratio_qb_over_gpv(2.0, 7, triweight()) - 2.3038) <
            0.005,
        "variance ratio constants");

  {
    bool ok = true;
    for (int rep = 0; rep < 5 && ok; ++rep) {
      DgpSpec spec;
      spec.theta = 1.0;
      spec.n_bidders = 2;
      spec.n_auctions = 12;
      spec.seed = 100 + static_cast<std::uint64_t>(rep);
      const auto sample = sample_homogeneous(spec);
      GpvFit fit = pseudo_values(sample.blinded(), 0.08, triweight_order4());
      fit.bw.h_f = 0.1;
      const double v = 0.5;
      const auto fast = variance_hat(fit, v, triweight(), triweight_order4());
      const auto slow =
        variance_hat_brute(fit, v, triweight(), triweight_order4());
      const double scale = std::max(std::abs(slow.value), 1e-30);
      ok = std::abs(fast.value - slow.value) / scale < 1e-10;
    }
    check(ok, "pruned variance sum matches reference triple loop");
  }
  (void)threads;

  std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Two-step nonparametric estimation of first-price auction "
                "valuation densities, with bootstrap confidence intervals, "
                "uniform confidence bands, and Monte Carlo coverage "
                "experiments" };
  app.require_subcommand(1);

  ExperimentConfig cfg;
  cfg.threads = default_thread_count();
  std::string config_path;
  std::string design_name = "homogeneous";
  std::vector<double> range_flag;
  double alpha = 0.05;
  bool full_scale = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--seed", cfg.seed, "master seed");
    sub->add_option("--threads", cfg.threads, "worker threads");
    sub->add_option("--out", cfg.output_path, "output CSV path (default stdout)");
  };

  auto* cov = app.add_subcommand("coverage",
                                 "Monte Carlo coverage of the uniform bands");
  cov->add_option("--design", design_name, "homogeneous|hetero");
  cov->add_option("--theta", cfg.theta, "power exponent (homogeneous)");
  cov->add_option("--sigma", cfg.sigma, "covariate dispersion (hetero)");
  cov->add_option("--n-bidders", cfg.n_bidders, "bidders per auction");
  cov->add_option("--total-obs", cfg.total_observations,
                  "total observations N*L");
  cov->add_option("--range", range_flag, "evaluation range lo hi")
    ->expected(2);
  cov->add_option("--levels", cfg.nominal_levels, "nominal coverage levels");
  cov->add_option("--mc-reps", cfg.mc_replications, "Monte Carlo replications");
  cov->add_option("--boot-reps", cfg.boot_replications,
                  "bootstrap replications");
  cov->add_option("--grid-step", cfg.grid_step, "evaluation grid step");
  cov->add_option("--x-eval", cfg.x_eval, "covariate evaluation point");
  cov->add_option("--lambda-boundary", cfg.lambda_boundary,
                  "support-cell size multiplier");
  cov->add_option("--trim-b-mult", cfg.trim_b_mult,
                  "bid-direction trim halfwidth in units of h_boundary");
  cov->add_option("--trim-x-mult", cfg.trim_x_mult,
                  "covariate-direction trim halfwidth in units of h_boundary");
  cov->add_flag("--full-scale", full_scale,
                "mc_reps=500, grid step 0.001 (long run)");
  add_common(cov);

  auto* ratio = app.add_subcommand("ratio-check",
                                   "variance-ratio table over (theta, N)");
  add_common(ratio);

  std::string input_path;
  EstimateOptions est;
  auto* estimate =
    app.add_subcommand("estimate", "estimate from a CSV of bids");
  estimate->add_option("input", input_path, "CSV with header auction,bidder,bid[,x]")
    ->required();
  estimate->add_option("--alpha", alpha, "pointwise/uniform level");
  estimate->add_option("--boot-reps", est.boot_replications,
                       "bootstrap replications");
  estimate->add_option("--grid-step", est.grid_step, "evaluation grid step");
  estimate->add_option("--range", range_flag, "evaluation range lo hi")
    ->expected(2);
  estimate->add_option("--x-eval", est.x_eval,
                       "covariate evaluation point (default: median)");
  estimate->add_option("--lambda-boundary", est.lambda_boundary,
                       "support-cell size multiplier");
  add_common(estimate);

  auto* selftest = app.add_subcommand("selftest", "quick oracle checks");
  add_common(selftest);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cov->parsed()) {
      // config file fills in whatever the command line did not set
      if (!config_path.empty()) {
        auto kv = parse_config_file(config_path);
        const auto cli_has = [&](const char* flag) {
          auto* opt = cov->get_option_no_throw(flag);
          return opt != nullptr && opt->count() > 0;
        };
        static const std::pair<const char*, const char*> mapping[] = {
          { "theta", "--theta" },         { "sigma", "--sigma" },
          { "n_bidders", "--n-bidders" }, { "total_obs", "--total-obs" },
          { "grid_step", "--grid-step" }, { "mc_reps", "--mc-reps" },
          { "boot_reps", "--boot-reps" }, { "seed", "--seed" },
          { "threads", "--threads" },     { "x_eval", "--x-eval" },
          { "levels", "--levels" },       { "out", "--out" },
          { "lambda_boundary", "--lambda-boundary" },
          { "design", "--design" },
        };
        for (const auto& [key, flag] : mapping)
          if (cli_has(flag))
            kv.erase(key);
        if (cli_has("--range")) {
          kv.erase("range_lo");
          kv.erase("range_hi");
        }
        const bool design_from_config =
          kv.count("design") != 0 && !cli_has("--design");
        apply_config(cfg, kv);
        if (design_from_config)
          design_name = cfg.design == Design::power_hetero ? "hetero"
                                                           : "homogeneous";
      }
      if (design_name == "homogeneous")
        cfg.design = Design::power_homogeneous;
      else if (design_name == "hetero")
        cfg.design = Design::power_hetero;
      else
        throw ConfigError("--design must be homogeneous or hetero");
      if (range_flag.size() == 2) {
        cfg.range_lo = range_flag[0];
        cfg.range_hi = range_flag[1];
      }
      if (full_scale) {
        cfg.mc_replications = 500;
        cfg.grid_step = 0.001;
      }
      const auto rows = run_coverage(cfg);
      std::ostringstream os;
      write_coverage_csv(rows, os);
      write_output(cfg.output_path, os.str());
    } else if (ratio->parsed()) {
      std::ostringstream os;
      write_ratio_csv(run_ratio_check(), os);
      write_output(cfg.output_path, os.str());
    } else if (estimate->parsed()) {
      est.alpha = alpha;
      est.seed = cfg.seed;
      est.threads = cfg.threads;
      if (range_flag.size() == 2) {
        est.range_lo = range_flag[0];
        est.range_hi = range_flag[1];
      }
      std::ostringstream os;
      estimate_file(input_path, est, os);
      write_output(cfg.output_path, os.str());
    } else if (selftest->parsed()) {
      return run_selftest(cfg.threads);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
