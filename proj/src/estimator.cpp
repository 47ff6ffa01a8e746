#include "gpvband/estimator.hpp"

#include "gpvband/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gpvband {

double ecdf(const Eigen::Ref<const Eigen::ArrayXd>& bids, double b)
{
  if (bids.size() == 0)
    throw std::invalid_argument("ecdf: empty sample");
  return static_cast<double>((bids <= b).count()) /
         static_cast<double>(bids.size());
}

double kde(const Eigen::Ref<const Eigen::ArrayXd>& bids,
           double b,
           double h,
           const KernelSpec& k)
{
  if (!(h > 0.0))
    throw std::invalid_argument("kde: bandwidth must be positive");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < bids.size(); ++i) {
    const double u = (bids[i] - b) / h;
    if (std::abs(u) <= k.support_radius)
      acc += k.eval(u);
  }
  return acc / (static_cast<double>(bids.size()) * h);
}

GpvFit pseudo_values(const BidData& data,
                     double h_g,
                     const KernelSpec& k_g,
                     double trim_h)
{
  if (!(h_g > 0.0))
    throw std::invalid_argument("pseudo_values: bandwidth must be positive");
  if (!data.homogeneous_counts() || data.n_auctions() == 0)
    throw std::invalid_argument(
      "pseudo_values: requires a homogeneous sample (equal bidder counts)");
  const int N = data.bidder_counts[0];
  if (N < 2)
    throw std::invalid_argument("pseudo_values: need at least two bidders");

  GpvFit fit;
  fit.data = data;
  fit.bw.h_g = h_g;
  fit.k_g = &k_g;
  fit.n_bidders = N;
  fit.n_auctions = data.n_auctions();
  fit.n_obs = data.n_obs();
  const Eigen::Index n = fit.n_obs;

  // sorted view of the pooled bids
  fit.sorted_to_flat = Eigen::ArrayXi::LinSpaced(static_cast<int>(n), 0,
                                                 static_cast<int>(n) - 1);
  std::sort(fit.sorted_to_flat.data(), fit.sorted_to_flat.data() + n,
            [&](int a, int b) { return data.bids[a] < data.bids[b]; });
  fit.sorted_bids.resize(n);
  fit.flat_to_sorted.resize(n);
  for (Eigen::Index p = 0; p < n; ++p) {
    fit.sorted_bids[p] = data.bids[fit.sorted_to_flat[p]];
    fit.flat_to_sorted[fit.sorted_to_flat[p]] = static_cast<int>(p);
  }

  fit.b_min = fit.sorted_bids[0];
  fit.b_max = fit.sorted_bids[n - 1];
  if (!(fit.b_max > fit.b_min))
    throw std::runtime_error("pseudo_values: degenerate bid support");

  const double th = trim_h > 0.0 ? trim_h : h_g;
  fit.trim_h = th;
  const double inv_nh = 1.0 / (static_cast<double>(n) * h_g);
  const double inv_n = 1.0 / static_cast<double>(n);

  fit.pseudo_values.resize(n);
  fit.trimmed_in.resize(n);
  fit.G_hat.resize(n);
  fit.g_hat.resize(n);

  const double* sb = fit.sorted_bids.data();
  for (Eigen::Index idx = 0; idx < n; ++idx) {
    const double b = data.bids[idx];
    // G-hat: count of bids <= b (weak inequality)
    const auto hi_eq = std::upper_bound(sb, sb + n, b);
    fit.G_hat[idx] = static_cast<double>(hi_eq - sb) * inv_n;
    // g-hat: only bids within +-h contribute
    const auto lo = std::lower_bound(sb, sb + n, b - h_g);
    const auto hi = std::upper_bound(sb, sb + n, b + h_g);
    double acc = 0.0;
    for (const double* p = lo; p != hi; ++p)
      acc += k_g.eval((*p - b) / h_g);
    fit.g_hat[idx] = acc * inv_nh;

    bool keep = (fit.b_min + th <= b) && (b <= fit.b_max - th);
    if (fit.g_hat[idx] < kDensityFloor)
      keep = false;
    fit.trimmed_in[idx] = keep;
    fit.pseudo_values[idx] =
      keep ? b + fit.G_hat[idx] / ((N - 1) * fit.g_hat[idx])
           : std::numeric_limits<double>::quiet_NaN();
  }
  return fit;
}

double gpv_density(const GpvFit& fit,
                   double v,
                   double h_f,
                   const KernelSpec& k_f)
{
  if (!(h_f > 0.0))
    throw std::invalid_argument("gpv_density: bandwidth must be positive");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < fit.n_obs; ++i) {
    if (!fit.trimmed_in[i])
      continue;
    const double u = (fit.pseudo_values[i] - v) / h_f;
    if (std::abs(u) <= k_f.support_radius)
      acc += k_f.eval(u);
  }
  return acc / (static_cast<double>(fit.n_obs) * h_f);
}

double rule_of_thumb_h_g(const BidData& data)
{
  if (data.n_obs() < 2)
    throw std::invalid_argument("rule_of_thumb_h_g: need at least two bids");
  const double sd = sample_sd(data.bids);
  if (!(sd > 0.0))
    throw std::runtime_error("rule_of_thumb_h_g: degenerate bid support");
  return 3.72 * sd * std::pow(static_cast<double>(data.n_obs()), -0.2);
}

double rule_of_thumb_h_f(const GpvFit& fit)
{
  const Eigen::Index kept = fit.trimmed_in.count();
  if (kept < 2)
    throw std::runtime_error(
      "rule_of_thumb_h_f: fewer than two observations survive trimming");
  Eigen::ArrayXd kept_values(kept);
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < fit.n_obs; ++i)
    if (fit.trimmed_in[i])
      kept_values[at++] = fit.pseudo_values[i];
  const double sd = sample_sd(kept_values);
  if (!(sd > 0.0))
    throw std::runtime_error("rule_of_thumb_h_f: degenerate pseudo-values");
  return 3.15 * sd * std::pow(static_cast<double>(kept), -0.2);
}

GpvFit fit_gpv(const BidData& data, const KernelSpec& k_g)
{
  GpvFit fit = pseudo_values(data, rule_of_thumb_h_g(data), k_g);
  fit.bw.h_f = rule_of_thumb_h_f(fit);
  return fit;
}

} // namespace gpvband
