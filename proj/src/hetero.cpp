#include "gpvband/hetero.hpp"

#include "gpvband/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace gpvband {

namespace {

constexpr double kDenFloor = 1e-10;

double product_kernel_scaled(const KernelSpec& k,
                             const Eigen::Ref<const Eigen::ArrayXd>& diff,
                             double h)
{
  double out = 1.0;
  for (Eigen::Index m = 0; m < diff.size(); ++m) {
    const double u = diff[m] / h;
    if (std::abs(u) > k.support_radius)
      return 0.0;
    out *= k.eval(u);
  }
  return out;
}

} // namespace

BoundaryTable::BoundaryTable(int dim, double h_boundary)
  : dim_(dim)
  , h_(h_boundary)
{
  if (dim < 0)
    throw std::invalid_argument("BoundaryTable: negative dimension");
  if (dim > 0 && !(h_boundary > 0.0))
    throw std::invalid_argument("BoundaryTable: cell side must be positive");
}

std::vector<long> BoundaryTable::key_of(
  const Eigen::Ref<const Eigen::ArrayXd>& x) const
{
  std::vector<long> key(static_cast<std::size_t>(dim_));
  for (int m = 0; m < dim_; ++m)
    key[static_cast<std::size_t>(m)] =
      static_cast<long>(std::floor(x[m] / h_));
  return key;
}

void BoundaryTable::insert(const Eigen::Ref<const Eigen::ArrayXd>& x,
                           int n,
                           double bid)
{
  auto key = key_of(x);
  auto [it, fresh] = cells_.try_emplace(std::move(key));
  CellBounds& cell = it->second;
  if (fresh)
    cell.b_min = bid;
  else
    cell.b_min = std::min(cell.b_min, bid);
  auto [mit, mfresh] = cell.b_max_by_n.try_emplace(n, bid);
  if (!mfresh)
    mit->second = std::max(mit->second, bid);
}

const BoundaryTable::CellBounds* BoundaryTable::cell(
  const Eigen::Ref<const Eigen::ArrayXd>& x) const
{
  auto it = cells_.find(key_of(x));
  return it == cells_.end() ? nullptr : &it->second;
}

bool BoundaryTable::contains(double b,
                             const Eigen::Ref<const Eigen::ArrayXd>& x,
                             int n,
                             double tb,
                             double tx) const
{
  // enumerate cells intersecting the covariate box
  std::vector<long> lo(static_cast<std::size_t>(dim_));
  std::vector<long> hi(static_cast<std::size_t>(dim_));
  for (int m = 0; m < dim_; ++m) {
    lo[static_cast<std::size_t>(m)] =
      static_cast<long>(std::floor((x[m] - tx) / h_));
    hi[static_cast<std::size_t>(m)] =
      static_cast<long>(std::floor((x[m] + tx) / h_));
  }
  std::vector<long> key = lo;
  while (true) {
    auto it = cells_.find(key);
    if (it == cells_.end())
      return false;
    const CellBounds& cell = it->second;
    auto mit = cell.b_max_by_n.find(n);
    if (mit == cell.b_max_by_n.end())
      return false;
    if (b - tb < cell.b_min || b + tb > mit->second)
      return false;
    // advance the multi-index
    int m = 0;
    for (; m < dim_; ++m) {
      if (key[static_cast<std::size_t>(m)] <
          hi[static_cast<std::size_t>(m)]) {
        ++key[static_cast<std::size_t>(m)];
        for (int mm = 0; mm < m; ++mm)
          key[static_cast<std::size_t>(mm)] = lo[static_cast<std::size_t>(mm)];
        break;
      }
    }
    if (m == dim_)
      break;
  }
  return true;
}

BoundaryTable boundary_hat(const BidData& data, double h_boundary)
{
  BoundaryTable table(data.dim_x(), h_boundary);
  for (Eigen::Index l = 0; l < data.n_auctions(); ++l) {
    const Eigen::ArrayXd x = data.covariates.row(l).transpose();
    const int n = data.bidder_counts[l];
    for (Eigen::Index i = 0; i < n; ++i)
      table.insert(x, n, data.bids[data.offsets[l] + i]);
  }
  return table;
}

double phi_hat(const BidData& data,
               const Eigen::Ref<const Eigen::ArrayXd>& x,
               double h,
               const KernelSpec& k1)
{
  if (!(h > 0.0))
    throw std::invalid_argument("phi_hat: bandwidth must be positive");
  const int d = data.dim_x();
  if (x.size() != d)
    throw std::invalid_argument("phi_hat: covariate dimension mismatch");
  const double inv_hd = std::pow(h, -d);
  double acc = 0.0;
  for (Eigen::Index l = 0; l < data.n_auctions(); ++l)
    acc += product_kernel_scaled(
      k1, data.covariates.row(l).transpose().array() - x, h);
  return acc * inv_hd / static_cast<double>(data.n_auctions());
}

double pi_hat(const BidData& data,
              int n,
              const Eigen::Ref<const Eigen::ArrayXd>& x,
              double h,
              const KernelSpec& k1)
{
  double num = 0.0, den = 0.0;
  for (Eigen::Index l = 0; l < data.n_auctions(); ++l) {
    const double w = product_kernel_scaled(
      k1, data.covariates.row(l).transpose().array() - x, h);
    den += w;
    if (data.bidder_counts[l] == n)
      num += w;
  }
  if (std::abs(den) < kDenFloor)
    throw std::runtime_error("pi_hat: empty neighborhood");
  return num / den;
}

double G_hat_cond(const BidData& data,
                  double b,
                  const Eigen::Ref<const Eigen::ArrayXd>& x,
                  int n,
                  double h_x,
                  const KernelSpec& k1)
{
  double num = 0.0, den = 0.0;
  for (Eigen::Index l = 0; l < data.n_auctions(); ++l) {
    if (data.bidder_counts[l] != n)
      continue;
    const double w = product_kernel_scaled(
      k1, data.covariates.row(l).transpose().array() - x, h_x);
    if (w == 0.0)
      continue;
    den += w;
    const auto bids = data.auction_bids(l);
    num += w * static_cast<double>((bids <= b).count()) /
           static_cast<double>(data.bidder_counts[l]);
  }
  if (std::abs(den) < kDenFloor)
    throw std::runtime_error("G_hat_cond: zero denominator");
  return num / den;
}

double g_hat_cond(const BidData& data,
                  double b,
                  const Eigen::Ref<const Eigen::ArrayXd>& x,
                  int n,
                  double h_b,
                  double h_x,
                  const KernelSpec& k_g,
                  const KernelSpec& k1)
{
  if (!(h_b > 0.0))
    throw std::invalid_argument("g_hat_cond: bandwidth must be positive");
  double num = 0.0, den = 0.0;
  for (Eigen::Index l = 0; l < data.n_auctions(); ++l) {
    if (data.bidder_counts[l] != n)
      continue;
    const double w = product_kernel_scaled(
      k1, data.covariates.row(l).transpose().array() - x, h_x);
    if (w == 0.0)
      continue;
    den += w;
    const auto bids = data.auction_bids(l);
    double inner = 0.0;
    for (Eigen::Index i = 0; i < bids.size(); ++i) {
      const double u = (bids[i] - b) / h_b;
      if (std::abs(u) <= k_g.support_radius)
        inner += k_g.eval(u);
    }
    num += w * inner / (static_cast<double>(data.bidder_counts[l]) * h_b);
  }
  if (std::abs(den) < kDenFloor)
    throw std::runtime_error("g_hat_cond: zero denominator");
  return num / den;
}

HeteroFit pseudo_values_hetero(const BidData& data,
                               const HeteroBandwidths& bw,
                               const KernelSpec& k0,
                               const KernelSpec& k1,
                               const HeteroTrim& trim)
{
  if (!(bw.h_g > 0.0))
    throw std::invalid_argument(
      "pseudo_values_hetero: bid bandwidth must be positive");
  const Eigen::Index L = data.n_auctions();
  if (L == 0)
    throw std::invalid_argument("pseudo_values_hetero: empty sample");
  const int d = data.dim_x();
  if (d > 0 && !(bw.h_x1 > 0.0))
    throw std::invalid_argument(
      "pseudo_values_hetero: covariate bandwidth must be positive");

  HeteroFit fit;
  fit.data = data;
  fit.bw = bw;
  fit.k0 = &k0;
  fit.k1 = &k1;
  fit.boundary = boundary_hat(data, bw.h_boundary);
  // containment box defaults: the cellwise boundary estimates carry
  // resolution h_boundary, so the box is sized in cells (1.5 in the bid
  // direction, 1 in the covariate directions)
  fit.trim_b_halfwidth =
    trim.b_halfwidth > 0.0 ? trim.b_halfwidth : 1.5 * bw.h_boundary;
  fit.trim_x_halfwidth =
    trim.x_halfwidth >= 0.0 ? trim.x_halfwidth : bw.h_boundary;

  std::set<int> counts;
  for (Eigen::Index l = 0; l < L; ++l)
    counts.insert(data.bidder_counts[l]);
  fit.observed_counts.assign(counts.begin(), counts.end());
  if (fit.observed_counts.front() < 2)
    throw std::invalid_argument(
      "pseudo_values_hetero: need at least two bidders per auction");

  const Eigen::Index n_obs = data.n_obs();
  fit.pseudo_values.resize(n_obs);
  fit.trimmed_in.resize(n_obs);
  fit.G_joint.resize(n_obs);
  fit.g_joint.resize(n_obs);

  const double inv_L = 1.0 / static_cast<double>(L);
  const double inv_hx1d = d > 0 ? std::pow(bw.h_x1, -d) : 1.0;

  for (Eigen::Index l = 0; l < L; ++l) {
    const Eigen::ArrayXd xl = data.covariates.row(l).transpose();
    const int nl = data.bidder_counts[l];

    // auctions in the covariate window with a matching bidder count
    std::vector<std::pair<Eigen::Index, double>> neighbors;
    for (Eigen::Index k = 0; k < L; ++k) {
      if (data.bidder_counts[k] != nl)
        continue;
      const double w = product_kernel_scaled(
        k1, data.covariates.row(k).transpose().array() - xl, bw.h_x1);
      if (w != 0.0)
        neighbors.emplace_back(k, w);
    }

    for (Eigen::Index i = 0; i < nl; ++i) {
      const Eigen::Index at = data.offsets[l] + i;
      const double b = data.bids[at];
      double gnum = 0.0, Gnum = 0.0;
      for (const auto& [k, w] : neighbors) {
        const auto bids = data.auction_bids(k);
        double cnt = 0.0, ker = 0.0;
        for (Eigen::Index j = 0; j < bids.size(); ++j) {
          if (bids[j] <= b)
            cnt += 1.0;
          const double u = (bids[j] - b) / bw.h_g;
          if (std::abs(u) <= k1.support_radius)
            ker += k1.eval(u);
        }
        const double inv_nk = 1.0 / static_cast<double>(bids.size());
        Gnum += w * cnt * inv_nk;
        gnum += w * ker * inv_nk / bw.h_g;
      }
      fit.G_joint[at] = Gnum * inv_L * inv_hx1d;
      fit.g_joint[at] = gnum * inv_L * inv_hx1d;

      bool keep = fit.boundary.contains(b, xl, nl, fit.trim_b_halfwidth,
                                        fit.trim_x_halfwidth);
      if (fit.g_joint[at] < kDenFloor)
        keep = false;
      fit.trimmed_in[at] = keep;
      fit.pseudo_values[at] =
        keep ? b + fit.G_joint[at] / ((nl - 1) * fit.g_joint[at])
             : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return fit;
}

namespace {

//! shared second-step weight pi-hat(n|x) phi-hat(x) with kernel k1 at h_x3
double nw_weight(const HeteroFit& fit,
                 const Eigen::Ref<const Eigen::ArrayXd>& x,
                 int n)
{
  const BidData& data = fit.data;
  const int d = data.dim_x();
  double acc = 0.0;
  for (Eigen::Index l = 0; l < data.n_auctions(); ++l) {
    if (data.bidder_counts[l] != n)
      continue;
    acc += product_kernel_scaled(
      *fit.k1, data.covariates.row(l).transpose().array() - x, fit.bw.h_x3);
  }
  return acc * (d > 0 ? std::pow(fit.bw.h_x3, -d) : 1.0) /
         static_cast<double>(data.n_auctions());
}

double density_numerator(const HeteroFit& fit,
                         double v,
                         const Eigen::Ref<const Eigen::ArrayXd>& x,
                         int n_filter)
{
  const BidData& data = fit.data;
  const int d = data.dim_x();
  const double h_f = fit.bw.h_f;
  if (!(h_f > 0.0))
    throw std::invalid_argument("gpv_density_cond: h_f not set");
  double acc = 0.0;
  for (Eigen::Index l = 0; l < data.n_auctions(); ++l) {
    const int nl = data.bidder_counts[l];
    if (n_filter > 0 && nl != n_filter)
      continue;
    const double wx = product_kernel_scaled(
      *fit.k0, data.covariates.row(l).transpose().array() - x, fit.bw.h_x2);
    if (wx == 0.0)
      continue;
    double inner = 0.0;
    for (Eigen::Index i = 0; i < nl; ++i) {
      const Eigen::Index at = data.offsets[l] + i;
      if (!fit.trimmed_in[at])
        continue;
      const double u = (fit.pseudo_values[at] - v) / h_f;
      if (std::abs(u) <= fit.k0->support_radius)
        inner += fit.k0->eval(u);
    }
    acc += wx * inner / static_cast<double>(nl);
  }
  const double inv_hx2d = d > 0 ? std::pow(fit.bw.h_x2, -d) : 1.0;
  return acc * inv_hx2d / (h_f * static_cast<double>(data.n_auctions()));
}

} // namespace

double gpv_density_cond(const HeteroFit& fit,
                        double v,
                        const Eigen::Ref<const Eigen::ArrayXd>& x,
                        int n)
{
  const double den = nw_weight(fit, x, n);
  if (std::abs(den) < kDenFloor)
    throw std::runtime_error("gpv_density_cond: zero denominator");
  return density_numerator(fit, v, x, n) / den;
}

double gpv_density_weighted(const HeteroFit& fit,
                            double v,
                            const Eigen::Ref<const Eigen::ArrayXd>& x)
{
  double phi = 0.0;
  std::map<int, double> weights;
  for (int n : fit.observed_counts) {
    const double w = nw_weight(fit, x, n);
    weights[n] = w;
    phi += w;
  }
  if (std::abs(phi) < kDenFloor)
    throw std::runtime_error("gpv_density_weighted: zero denominator");
  double out = 0.0;
  for (int n : fit.observed_counts) {
    if (weights[n] == 0.0)
      continue;
    out += (weights[n] / phi) * (density_numerator(fit, v, x, n) / weights[n]);
  }
  return out;
}

double gpv_density_pooled(const HeteroFit& fit,
                          double v,
                          const Eigen::Ref<const Eigen::ArrayXd>& x)
{
  double phi = 0.0;
  for (int n : fit.observed_counts)
    phi += nw_weight(fit, x, n);
  if (std::abs(phi) < kDenFloor)
    throw std::runtime_error("gpv_density_pooled: zero denominator");
  return density_numerator(fit, v, x, -1) / phi;
}

HeteroBandwidths rule_of_thumb_hetero(const BidData& data,
                                      double lambda_boundary)
{
  if (data.dim_x() != 1)
    throw std::invalid_argument(
      "rule_of_thumb_hetero: rule is defined for one covariate");
  const double n_obs = static_cast<double>(data.n_obs());
  const double L = static_cast<double>(data.n_auctions());
  const double sd_b = sample_sd(data.bids);
  const double sd_x = sample_sd(data.covariates.col(0).array());
  if (!(sd_b > 0.0))
    throw std::runtime_error("rule_of_thumb_hetero: degenerate bid support");
  if (!(sd_x > 0.0))
    throw std::runtime_error("rule_of_thumb_hetero: degenerate covariate");

  HeteroBandwidths bw;
  bw.h_g = 3.72 * sd_b * std::pow(n_obs, -1.0 / 6.0);
  bw.h_x1 = 3.72 * sd_x * std::pow(n_obs, -1.0 / 6.0);
  bw.h_x2 = 3.15 * sd_x * std::pow(n_obs, -1.0 / 6.0);
  bw.h_x3 = 3.72 * sd_x * std::pow(n_obs, -1.0 / 5.0);
  bw.h_boundary = lambda_boundary * std::pow(std::log(L) / L, 0.5);
  return bw;
}

double rule_of_thumb_h_f_hetero(const HeteroFit& fit)
{
  const Eigen::Index kept = fit.trimmed_in.count();
  if (kept < 2)
    throw std::runtime_error(
      "rule_of_thumb_h_f_hetero: fewer than two observations survive "
      "trimming");
  Eigen::ArrayXd values(kept);
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < fit.n_obs(); ++i)
    if (fit.trimmed_in[i])
      values[at++] = fit.pseudo_values[i];
  const double sd = sample_sd(values);
  if (!(sd > 0.0))
    throw std::runtime_error("rule_of_thumb_h_f_hetero: degenerate values");
  return 3.15 * sd * std::pow(static_cast<double>(kept), -0.2);
}

HeteroFit fit_gpv_hetero(const BidData& data,
                         double lambda_boundary,
                         const KernelSpec& k0,
                         const KernelSpec& k1,
                         const HeteroTrim& trim)
{
  HeteroBandwidths bw = rule_of_thumb_hetero(data, lambda_boundary);
  HeteroFit fit = pseudo_values_hetero(data, bw, k0, k1, trim);
  fit.bw.h_f = rule_of_thumb_h_f_hetero(fit);
  return fit;
}

} // namespace gpvband
