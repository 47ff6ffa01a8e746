#include "gpvband/harness.hpp"

#include "gpvband/numeric.hpp"
#include "gpvband/oracles.hpp"
#include "gpvband/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace gpvband {

void ExperimentConfig::validate() const
{
  if (!(range_lo < range_hi) || !(range_lo > 0.0) || !(range_hi < 1.0))
    throw ConfigError("range must satisfy 0 < lo < hi < 1");
  if (!(grid_step > 0.0))
    throw ConfigError("grid step must be positive");
  for (double level : nominal_levels)
    if (!(level > 0.0 && level < 1.0))
      throw ConfigError("nominal levels must be in (0, 1)");
  if (nominal_levels.empty())
    throw ConfigError("need at least one nominal level");
  if (mc_replications < 1)
    throw ConfigError("mc replications must be >= 1");
  if (boot_replications < 1)
    throw ConfigError("bootstrap replications must be >= 1");
  if (n_bidders < 2)
    throw ConfigError("need at least two bidders");
  if (total_observations < 3 * n_bidders)
    throw ConfigError("need at least three auctions of observations");
  if (design == Design::power_hetero && !(x_eval > 0.0 && x_eval < 2.0))
    throw ConfigError("covariate evaluation point must be interior to (0, 2)");
}

Eigen::ArrayXd ExperimentConfig::grid() const
{
  const auto count = static_cast<Eigen::Index>(
    std::floor((range_hi - range_lo) / grid_step + 1e-9)) + 1;
  Eigen::ArrayXd g(count);
  for (Eigen::Index i = 0; i < count; ++i)
    g[i] = range_lo + static_cast<double>(i) * grid_step;
  return g;
}

double CoverageRow::standard_error() const
{
  return std::sqrt(coverage * (1.0 - coverage) /
                   static_cast<double>(mc_reps));
}

namespace {

struct RepOutcome
{
  std::vector<char> covered;  // per nominal level
  std::vector<double> zeta;   // per nominal level
  std::vector<double> width;  // per nominal level (mean over grid)
};

RepOutcome evaluate_bands(const BandReplicates& reps,
                          const Eigen::Ref<const Eigen::ArrayXd>& truth,
                          const std::vector<double>& levels)
{
  RepOutcome out;
  out.covered.reserve(levels.size());
  out.zeta.reserve(levels.size());
  out.width.reserve(levels.size());
  for (double level : levels) {
    const double zeta = reps.zeta(1.0 - level);
    bool covered = true;
    double width = 0.0;
    Eigen::Index used = 0;
    for (Eigen::Index i = 0; i < reps.grid.size(); ++i) {
      if (!reps.in_sup[i])
        continue;
      ++used;
      width += 2.0 * zeta * reps.se[i];
      if (std::abs(reps.f_hat[i] - truth[i]) > zeta * reps.se[i])
        covered = false;
    }
    out.covered.push_back(covered ? 1 : 0);
    out.zeta.push_back(zeta);
    out.width.push_back(used > 0 ? width / static_cast<double>(used) : 0.0);
  }
  return out;
}

} // namespace

std::vector<CoverageRow> run_coverage(const ExperimentConfig& cfg)
{
  cfg.validate();
  const Eigen::ArrayXd grid = cfg.grid();
  const bool hetero = cfg.design == Design::power_hetero;
  const int L = cfg.total_observations / cfg.n_bidders;

  // analytic truth on the grid
  DgpSpec proto;
  proto.model = cfg.design;
  proto.theta = cfg.theta;
  proto.sigma = cfg.sigma;
  proto.n_bidders = cfg.n_bidders;
  proto.n_auctions = L;
  Eigen::ArrayXd f_true(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    f_true[i] = hetero ? truth(proto, grid[i], cfg.x_eval).f
                       : truth(proto, grid[i]).f;

  Eigen::ArrayXd x_eval(1);
  x_eval[0] = cfg.x_eval;

  std::vector<RepOutcome> outcomes(
    static_cast<std::size_t>(cfg.mc_replications));
  parallel_for(cfg.mc_replications, cfg.threads, [&](long r) {
    DgpSpec spec = proto;
    spec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r), 0);
    BootstrapConfig boot;
    boot.replications = cfg.boot_replications;
    boot.alpha = 1.0 - cfg.nominal_levels.front();
    boot.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r), 1);
    boot.threads = 1; // replications already run in parallel

    if (hetero) {
      const AuctionSample sample = sample_hetero(spec);
      HeteroBandwidths hbw =
        rule_of_thumb_hetero(sample.blinded(), cfg.lambda_boundary);
      HeteroTrim trim;
      trim.b_halfwidth = cfg.trim_b_mult * hbw.h_boundary;
      trim.x_halfwidth = cfg.trim_x_mult * hbw.h_boundary;
      HeteroFit fit = pseudo_values_hetero(sample.blinded(), hbw,
                                           triweight(), triweight_order4(),
                                           trim);
      fit.bw.h_f = rule_of_thumb_h_f_hetero(fit);
      const auto reps = band_replicates_hetero(fit, grid, x_eval, boot);
      outcomes[static_cast<std::size_t>(r)] =
        evaluate_bands(reps, f_true, cfg.nominal_levels);
    } else {
      const AuctionSample sample = sample_homogeneous(spec);
      const GpvFit fit = fit_gpv(sample.blinded());
      const auto reps = band_replicates(fit, grid, boot, triweight());
      outcomes[static_cast<std::size_t>(r)] =
        evaluate_bands(reps, f_true, cfg.nominal_levels);
    }
  });

  std::vector<CoverageRow> rows;
  for (std::size_t k = 0; k < cfg.nominal_levels.size(); ++k) {
    CoverageRow row;
    row.design = hetero ? "hetero" : "homogeneous";
    row.n = cfg.n_bidders;
    row.theta_or_sigma = hetero ? cfg.sigma : cfg.theta;
    row.range_lo = cfg.range_lo;
    row.range_hi = cfg.range_hi;
    row.nominal = cfg.nominal_levels[k];
    row.mc_reps = cfg.mc_replications;
    long covered = 0;
    KahanSum zeta_sum, width_sum;
    for (const auto& outcome : outcomes) {
      covered += outcome.covered[k];
      zeta_sum.add(outcome.zeta[k]);
      width_sum.add(outcome.width[k]);
    }
    row.coverage =
      static_cast<double>(covered) / static_cast<double>(cfg.mc_replications);
    row.mean_zeta =
      zeta_sum.value() / static_cast<double>(cfg.mc_replications);
    row.mean_width =
      width_sum.value() / static_cast<double>(cfg.mc_replications);
    rows.push_back(row);
  }
  return rows;
}

std::string format_double(double x)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_coverage_csv(const std::vector<CoverageRow>& rows,
                        std::ostream& os)
{
  os << "design,n,theta_or_sigma,range_lo,range_hi,nominal,coverage,"
        "mc_reps,mean_zeta,mean_width,se\n";
  for (const auto& r : rows) {
    os << r.design << ',' << r.n << ',' << format_double(r.theta_or_sigma)
       << ',' << format_double(r.range_lo) << ',' << format_double(r.range_hi)
       << ',' << format_double(r.nominal) << ',' << format_double(r.coverage)
       << ',' << r.mc_reps << ',' << format_double(r.mean_zeta) << ','
       << format_double(r.mean_width) << ','
       << format_double(r.standard_error()) << '\n';
  }
}

std::vector<RatioRow> run_ratio_check()
{
  std::vector<RatioRow> rows;
  const double thetas[] = { 0.5, 1.0, 2.0, 3.0 };
  for (double theta : thetas)
    for (int n = 2; n <= 7; ++n)
      rows.push_back({ theta, n,
                       oracles::ratio_qb_over_gpv(theta, n, triweight()) });
  return rows;
}

void write_ratio_csv(const std::vector<RatioRow>& rows, std::ostream& os)
{
  os << "theta,n,ratio\n";
  for (const auto& r : rows)
    os << format_double(r.theta) << ',' << r.n << ','
       << format_double(r.ratio) << '\n';
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ','))
    out.push_back(field);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

double parse_double(const std::string& s, int line_no, const char* what)
{
  try {
    std::size_t pos = 0;
    const double x = std::stod(s, &pos);
    if (pos != s.size())
      throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": cannot parse " +
                    what + " from '" + s + "'");
  }
}

} // namespace

BidData read_bid_csv(std::istream& is)
{
  std::string line;
  if (!std::getline(is, line))
    throw DataError("empty input; expected header auction,bidder,bid[,x]");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  auto header = split_csv_line(line);
  const bool with_x = header.size() == 4 && header[3] == "x";
  if (!((header.size() == 3 || with_x) && header[0] == "auction" &&
        header[1] == "bidder" && header[2] == "bid"))
    throw DataError("line 1: expected header auction,bidder,bid[,x], got '" +
                    line + "'");

  std::vector<std::string> auction_order;
  std::map<std::string, std::vector<double>> bids_by_auction;
  std::map<std::string, double> x_by_auction;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    const std::string& auction = fields[0];
    const double bid = parse_double(fields[2], line_no, "bid");
    if (!(bid > 0.0) || !std::isfinite(bid))
      throw DataError("line " + std::to_string(line_no) +
                      ": bids must be finite and strictly positive");
    auto it = bids_by_auction.find(auction);
    if (it == bids_by_auction.end()) {
      auction_order.push_back(auction);
      it = bids_by_auction.emplace(auction, std::vector<double>{}).first;
    }
    it->second.push_back(bid);
    if (with_x) {
      const double x = parse_double(fields[3], line_no, "covariate");
      auto [xit, fresh] = x_by_auction.try_emplace(auction, x);
      if (!fresh && xit->second != x)
        throw DataError("line " + std::to_string(line_no) +
                        ": covariate differs within auction '" + auction +
                        "'");
    }
  }
  if (auction_order.size() < 3)
    throw DataError("need at least three auctions, got " +
                    std::to_string(auction_order.size()));

  BidData data;
  const auto L = static_cast<Eigen::Index>(auction_order.size());
  data.bidder_counts.resize(L);
  data.offsets.resize(L + 1);
  data.covariates.resize(L, with_x ? 1 : 0);
  data.offsets[0] = 0;
  for (Eigen::Index l = 0; l < L; ++l) {
    const auto& bids = bids_by_auction[auction_order[static_cast<std::size_t>(l)]];
    if (bids.size() < 2)
      throw DataError("auction '" + auction_order[static_cast<std::size_t>(l)] +
                      "' has fewer than two bids");
    data.bidder_counts[l] = static_cast<int>(bids.size());
    data.offsets[l + 1] = data.offsets[l] + data.bidder_counts[l];
    if (with_x)
      data.covariates(l, 0) =
        x_by_auction[auction_order[static_cast<std::size_t>(l)]];
  }
  data.bids.resize(data.offsets[L]);
  for (Eigen::Index l = 0; l < L; ++l) {
    const auto& bids = bids_by_auction[auction_order[static_cast<std::size_t>(l)]];
    for (std::size_t i = 0; i < bids.size(); ++i)
      data.bids[data.offsets[l] + static_cast<Eigen::Index>(i)] = bids[i];
  }
  return data;
}

BidData read_bid_csv_file(const std::string& path)
{
  std::ifstream is(path);
  if (!is)
    throw DataError("cannot open '" + path + "'");
  return read_bid_csv(is);
}

void write_bid_csv(const BidData& data, std::ostream& os)
{
  const bool with_x = data.dim_x() > 0;
  os << (with_x ? "auction,bidder,bid,x\n" : "auction,bidder,bid\n");
  for (Eigen::Index l = 0; l < data.n_auctions(); ++l)
    for (Eigen::Index i = 0; i < data.bidder_counts[l]; ++i) {
      os << (l + 1) << ',' << (i + 1) << ','
         << format_double(data.bids[data.offsets[l] + i]);
      if (with_x)
        os << ',' << format_double(data.covariates(l, 0));
      os << '\n';
    }
}

void estimate_file(const std::string& path,
                   const EstimateOptions& options,
                   std::ostream& os)
{
  if (!(options.alpha > 0.0 && options.alpha < 1.0))
    throw ConfigError("alpha must be in (0, 1)");
  if (options.boot_replications < 2)
    throw ConfigError("need at least two bootstrap replications");
  const BidData data = read_bid_csv_file(path);
  const bool hetero = data.dim_x() > 0;

  BootstrapConfig boot;
  boot.replications = options.boot_replications;
  boot.alpha = options.alpha;
  boot.seed = options.seed;
  boot.threads = options.threads;

  Eigen::ArrayXd grid;
  Eigen::ArrayXXd fstar;
  BandReplicates reps;

  if (!hetero) {
    if (!data.homogeneous_counts())
      throw DataError(
        "bidder counts vary across auctions; provide a covariate column or "
        "homogenize the data");
    const GpvFit fit = fit_gpv(data);
    double lo = options.range_lo, hi = options.range_hi;
    if (!(lo < hi)) {
      // data-driven default: central range of the kept pseudo-values
      std::vector<double> kept;
      for (Eigen::Index i = 0; i < fit.n_obs; ++i)
        if (fit.trimmed_in[i])
          kept.push_back(fit.pseudo_values[i]);
      std::sort(kept.begin(), kept.end());
      Eigen::Map<const Eigen::ArrayXd> sorted(kept.data(),
                                              static_cast<Eigen::Index>(kept.size()));
      lo = quantile_sorted(sorted, 0.10);
      hi = quantile_sorted(sorted, 0.90);
    }
    const auto count = static_cast<Eigen::Index>(
      std::floor((hi - lo) / options.grid_step + 1e-9)) + 1;
    grid.resize(count);
    for (Eigen::Index i = 0; i < count; ++i)
      grid[i] = lo + static_cast<double>(i) * options.grid_step;
    reps = band_replicates(fit, grid, boot, triweight());
    fstar = bootstrap_density_grid(fit, grid, boot, triweight());
  } else {
    HeteroFit fit = fit_gpv_hetero(data, options.lambda_boundary);
    Eigen::ArrayXd x(1);
    x[0] = std::isnan(options.x_eval)
             ? [&] {
                 Eigen::ArrayXd xs = data.covariates.col(0);
                 std::sort(xs.data(), xs.data() + xs.size());
                 return quantile_sorted(xs, 0.5);
               }()
             : options.x_eval;
    double lo = options.range_lo, hi = options.range_hi;
    if (!(lo < hi)) {
      std::vector<double> kept;
      for (Eigen::Index i = 0; i < fit.n_obs(); ++i)
        if (fit.trimmed_in[i])
          kept.push_back(fit.pseudo_values[i]);
      if (kept.size() < 2)
        throw DataError("all observations were trimmed");
      std::sort(kept.begin(), kept.end());
      Eigen::Map<const Eigen::ArrayXd> sorted(kept.data(),
                                              static_cast<Eigen::Index>(kept.size()));
      lo = quantile_sorted(sorted, 0.10);
      hi = quantile_sorted(sorted, 0.90);
    }
    const auto count = static_cast<Eigen::Index>(
      std::floor((hi - lo) / options.grid_step + 1e-9)) + 1;
    grid.resize(count);
    for (Eigen::Index i = 0; i < count; ++i)
      grid[i] = lo + static_cast<double>(i) * options.grid_step;
    reps = band_replicates_hetero(fit, grid, x, boot);
    fstar = bootstrap_density_grid_hetero(fit, grid, x, boot);
  }

  const BandResult band = reps.band(options.alpha);
  os << "v,f_hat,var_hat,ci_lo,ci_hi,band_lo,band_hi\n";
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    Eigen::ArrayXd col = fstar.col(i);
    std::sort(col.data(), col.data() + col.size());
    const double ci_lo = quantile_sorted(col, 0.5 * options.alpha);
    const double ci_hi = quantile_sorted(col, 1.0 - 0.5 * options.alpha);
    os << format_double(grid[i]) << ',' << format_double(reps.f_hat[i]) << ','
       << format_double(reps.v_hat[i]) << ',' << format_double(ci_lo) << ','
       << format_double(ci_hi) << ',' << format_double(band.lower[i]) << ','
       << format_double(band.upper[i]) << '\n';
  }
}

std::map<std::string, std::string> parse_config_file(const std::string& path)
{
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot open config file '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos)
        return std::string{};
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    const std::string stripped = strip(line);
    if (stripped.empty())
      continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = strip(stripped.substr(0, eq));
    const std::string value = strip(stripped.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    out[key] = value;
  }
  return out;
}

} // namespace gpvband
