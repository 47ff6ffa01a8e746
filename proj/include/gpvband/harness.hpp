#pragma once

#include "gpvband/bootstrap.hpp"
#include "gpvband/dgp.hpp"

#include <iosfwd>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpvband {

//! Invalid configuration (CLI exit code 2).
struct ConfigError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

//! Malformed or insufficient data (CLI exit code 3).
struct DataError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig
{
  Design design = Design::power_homogeneous;
  double theta = 1.0;
  double sigma = 1.0;
  int n_bidders = 5;
  int total_observations = 2100;
  double range_lo = 0.3;
  double range_hi = 0.7;
  double grid_step = 0.005;
  std::vector<double> nominal_levels = { 0.90, 0.95, 0.99 };
  int mc_replications = 200;
  int boot_replications = 500;
  std::uint64_t seed = 20200924;
  int threads = 1;
  double x_eval = 1.0; //!< covariate evaluation point (hetero design)
  double lambda_boundary = 1.0;
  //! trimming-box halfwidths in units of h_boundary (hetero design)
  double trim_b_mult = 1.5;
  double trim_x_mult = 1.0;
  std::string output_path;

  void validate() const;
  Eigen::ArrayXd grid() const;
};

struct CoverageRow
{
  std::string design;
  int n = 0;
  double theta_or_sigma = 0.0;
  double range_lo = 0.0;
  double range_hi = 0.0;
  double nominal = 0.0;
  double coverage = 0.0;
  int mc_reps = 0;
  double mean_zeta = 0.0;
  double mean_width = 0.0;

  double standard_error() const;
};

//! Monte Carlo coverage experiment for the uniform confidence bands; one
//! row per nominal level.
std::vector<CoverageRow> run_coverage(const ExperimentConfig& cfg);

void write_coverage_csv(const std::vector<CoverageRow>& rows,
                        std::ostream& os);

//! Variance-ratio table over a (theta, N) grid.
struct RatioRow
{
  double theta;
  int n;
  double ratio;
};
std::vector<RatioRow> run_ratio_check();
void write_ratio_csv(const std::vector<RatioRow>& rows, std::ostream& os);

//! Options for single-dataset estimation from a CSV file.
struct EstimateOptions
{
  double alpha = 0.05;
  int boot_replications = 500;
  std::uint64_t seed = 20200924;
  int threads = 1;
  double grid_step = 0.005;
  double range_lo = 0.0; //!< 0/0 means data-driven range
  double range_hi = 0.0;
  double x_eval = std::numeric_limits<double>::quiet_NaN(); //!< NaN: median
  double lambda_boundary = 1.0;
};

//! Parse `auction,bidder,bid[,x]` rows; auction ids group rows.
BidData read_bid_csv(std::istream& is);
BidData read_bid_csv_file(const std::string& path);
void write_bid_csv(const BidData& data, std::ostream& os);

//! Full pipeline on a CSV file: rule-of-thumb bandwidths, pointwise
//! percentile intervals and the uniform band over the grid; emits
//! v,f_hat,var_hat,ci_lo,ci_hi,band_lo,band_hi.
void estimate_file(const std::string& path,
                   const EstimateOptions& options,
                   std::ostream& os);

//! Line-oriented `key = value` config files with # comments.
std::map<std::string, std::string> parse_config_file(const std::string& path);

//! 17-significant-digit float format used in all CSV output.
std::string format_double(double x);

} // namespace gpvband
