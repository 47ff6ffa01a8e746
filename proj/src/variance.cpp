#include "gpvband/variance.hpp"

#include "gpvband/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace gpvband {

namespace {

//! eta factor attached to the (j,k) observation; the (i,l) index only
//! enters through K_g((B_il - B_jk)/h)
double eta_weight(const GpvFit& fit,
                  Eigen::Index idx,
                  double v,
                  double h,
                  const KernelSpec& k_f)
{
  if (!fit.trimmed_in[idx])
    return 0.0;
  const double u = (fit.pseudo_values[idx] - v) / h;
  if (std::abs(u) > k_f.support_radius)
    return 0.0;
  const double g = fit.g_hat[idx];
  return k_f.deriv(u) * fit.G_hat[idx] / (g * g);
}

} // namespace

VarianceEstimate variance_hat(const GpvFit& fit,
                              double v,
                              const KernelSpec& k_f,
                              const KernelSpec& k_g)
{
  const Eigen::Index n = fit.n_obs;
  if (n < 3)
    throw std::invalid_argument("variance_hat: need at least three observations");
  const double h = fit.bw.h_f;
  if (!(h > 0.0))
    throw std::invalid_argument("variance_hat: second-step bandwidth not set");

  VarianceEstimate out;
  out.v = v;

  // scatter eta over bid neighborhoods; T[i] = sum_{a != i} eta_{i,a},
  // Q[i] = sum of squares, with compensated accumulation
  Eigen::ArrayXd T = Eigen::ArrayXd::Zero(n);
  Eigen::ArrayXd Tc = Eigen::ArrayXd::Zero(n);
  Eigen::ArrayXd Q = Eigen::ArrayXd::Zero(n);
  Eigen::ArrayXd Qc = Eigen::ArrayXd::Zero(n);
  const double* sb = fit.sorted_bids.data();
  long long visited = 0;
  bool any_active = false;

  for (Eigen::Index a = 0; a < n; ++a) {
    const double w = eta_weight(fit, a, v, h, k_f);
    if (w == 0.0)
      continue;
    any_active = true;
    const double ba = fit.data.bids[a];
    const auto lo = std::lower_bound(sb, sb + n, ba - h) - sb;
    const auto hi = std::upper_bound(sb, sb + n, ba + h) - sb;
    for (Eigen::Index p = lo; p < hi; ++p) {
      const Eigen::Index i = fit.sorted_to_flat[p];
      if (i == a)
        continue;
      const double eta = w * k_g.eval((sb[p] - ba) / h);
      ++visited;
      // Kahan update of T[i] and Q[i]
      double y = eta - Tc[i];
      double t = T[i] + y;
      Tc[i] = (t - T[i]) - y;
      T[i] = t;
      y = eta * eta - Qc[i];
      t = Q[i] + y;
      Qc[i] = (t - Q[i]) - y;
      Q[i] = t;
    }
  }

  KahanSum total;
  for (Eigen::Index i = 0; i < n; ++i)
    total.add(T[i] * T[i] - Q[i]);

  const double N = static_cast<double>(fit.n_bidders);
  const double nn = static_cast<double>(n);
  const double pref = 1.0 / (N * (N - 1.0) * (N - 1.0) * h * h * h) /
                      (nn * (nn - 1.0) * (nn - 2.0));
  out.value = pref * total.value();
  out.n_terms_visited = visited;
  out.empty_active_set = !any_active;
  return out;
}

VarianceEstimate variance_hat_brute(const GpvFit& fit,
                                    double v,
                                    const KernelSpec& k_f,
                                    const KernelSpec& k_g)
{
  const Eigen::Index n = fit.n_obs;
  if (n < 3)
    throw std::invalid_argument("variance_hat: need at least three observations");
  const double h = fit.bw.h_f;

  const auto eta = [&](Eigen::Index i, Eigen::Index a) {
    const double w = eta_weight(fit, a, v, h, k_f);
    if (w == 0.0)
      return 0.0;
    const double u = (fit.data.bids[i] - fit.data.bids[a]) / h;
    if (std::abs(u) > k_g.support_radius)
      return 0.0;
    return w * k_g.eval(u);
  };

  KahanSum total;
  long long visited = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a == i)
        continue;
      for (Eigen::Index a2 = 0; a2 < n; ++a2) {
        if (a2 == i || a2 == a)
          continue;
        ++visited;
        total.add(eta(i, a) * eta(i, a2));
      }
    }

  VarianceEstimate out;
  out.v = v;
  const double N = static_cast<double>(fit.n_bidders);
  const double nn = static_cast<double>(n);
  out.value = total.value() / (N * (N - 1.0) * (N - 1.0) * h * h * h) /
              (nn * (nn - 1.0) * (nn - 2.0));
  out.n_terms_visited = visited;
  return out;
}

namespace {

//! per-auction eta contribution for the conditional estimator:
//! eta_{il,k} = w_x(l,k) / N_k * sum_j wbar_jk K_g((B_il - B_jk)/h)
struct HeteroEtaTerms
{
  // for auction k: the (j) factors that do not involve (i,l)
  std::vector<double> wbar; //!< per bid j in auction k
};

double hetero_eta(const HeteroFit& fit,
                  const HeteroEtaTerms& terms,
                  Eigen::Index k,
                  double b_il,
                  double h)
{
  const auto bids = fit.data.auction_bids(k);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < bids.size(); ++j) {
    if (terms.wbar[static_cast<std::size_t>(j)] == 0.0)
      continue;
    const double u = (bids[j] - b_il) / h;
    if (std::abs(u) <= fit.k1->support_radius)
      acc += terms.wbar[static_cast<std::size_t>(j)] * fit.k1->eval(u);
  }
  return acc / static_cast<double>(bids.size());
}

} // namespace

VarianceEstimate variance_hat_hetero(const HeteroFit& fit,
                                     double v,
                                     const Eigen::Ref<const Eigen::ArrayXd>& x,
                                     int n)
{
  const BidData& data = fit.data;
  const Eigen::Index L = data.n_auctions();
  const int d = data.dim_x();
  const double h_f = fit.bw.h_f;
  const double h_x2 = fit.bw.h_x2;
  if (!(h_f > 0.0))
    throw std::invalid_argument("variance_hat_hetero: h_f not set");

  std::vector<Eigen::Index> with_n;
  for (Eigen::Index l = 0; l < L; ++l)
    if (data.bidder_counts[l] == n)
      with_n.push_back(l);
  if (with_n.size() < 3)
    throw std::invalid_argument(
      "variance_hat_hetero: need at least three auctions with the requested "
      "bidder count");

  // per-auction K_f'-side factors (independent of (i,l))
  std::vector<HeteroEtaTerms> terms(static_cast<std::size_t>(L));
  std::vector<double> kfx(static_cast<std::size_t>(L), 0.0);
  bool any_active = false;
  for (Eigen::Index k : with_n) {
    double wx = 1.0;
    for (int m = 0; m < d; ++m) {
      const double u = (data.covariates(k, m) - x[m]) / h_x2;
      if (std::abs(u) > fit.k0->support_radius) {
        wx = 0.0;
        break;
      }
      wx *= fit.k0->eval(u);
    }
    kfx[static_cast<std::size_t>(k)] = wx;
    if (wx == 0.0)
      continue;
    auto& t = terms[static_cast<std::size_t>(k)];
    t.wbar.assign(static_cast<std::size_t>(data.bidder_counts[k]), 0.0);
    for (Eigen::Index j = 0; j < data.bidder_counts[k]; ++j) {
      const Eigen::Index at = data.offsets[k] + j;
      if (!fit.trimmed_in[at])
        continue;
      const double u = (fit.pseudo_values[at] - v) / h_f;
      if (std::abs(u) > fit.k0->support_radius)
        continue;
      const double g = fit.g_joint[at];
      t.wbar[static_cast<std::size_t>(j)] =
        wx * fit.k0->deriv(u) * fit.G_joint[at] / (g * g);
      any_active = true;
    }
  }

  long long visited = 0;
  KahanSum total;
  for (Eigen::Index l : with_n) {
    const Eigen::ArrayXd xl = data.covariates.row(l).transpose();
    // covariate kernel between auctions l and k at the second-step scale
    std::vector<std::pair<Eigen::Index, double>> neighbors;
    for (Eigen::Index k : with_n) {
      if (k == l)
        continue;
      if (kfx[static_cast<std::size_t>(k)] == 0.0 ||
          terms[static_cast<std::size_t>(k)].wbar.empty())
        continue;
      double wlk = 1.0;
      for (int m = 0; m < d; ++m) {
        const double u = (xl[m] - data.covariates(k, m)) / h_x2;
        if (std::abs(u) > fit.k1->support_radius) {
          wlk = 0.0;
          break;
        }
        wlk *= fit.k1->eval(u);
      }
      if (wlk != 0.0)
        neighbors.emplace_back(k, wlk);
    }
    for (Eigen::Index i = 0; i < data.bidder_counts[l]; ++i) {
      const double b_il = data.bids[data.offsets[l] + i];
      KahanSum T;
      KahanSum Q;
      for (const auto& [k, wlk] : neighbors) {
        const double eta =
          wlk * hetero_eta(fit, terms[static_cast<std::size_t>(k)], k, b_il,
                           h_f);
        ++visited;
        T.add(eta);
        Q.add(eta * eta);
      }
      total.add((T.value() * T.value() - Q.value()) /
                static_cast<double>(data.bidder_counts[l]));
    }
  }

  const double pw = pi_hat(data, n, x, fit.bw.h_x3, *fit.k1) *
                    phi_hat(data, x, fit.bw.h_x3, *fit.k1);
  if (std::abs(pw) < 1e-10)
    throw std::runtime_error("variance_hat_hetero: zero weight at x");
  const double nl = static_cast<double>(with_n.size());
  (void)nl;
  const double Ld = static_cast<double>(L);
  const double nd = static_cast<double>(n);
  const double h3 = std::pow(h_f, 3) * std::pow(h_x2, 3 * d);
  const double pref = 1.0 / (nd * (nd - 1.0) * (nd - 1.0) * pw * pw * h3) /
                      (Ld * (Ld - 1.0) * (Ld - 2.0));

  VarianceEstimate out;
  out.v = v;
  out.value = pref * total.value();
  out.n_terms_visited = visited;
  out.empty_active_set = !any_active;
  return out;
}

VarianceEstimate variance_hat_hetero_brute(
  const HeteroFit& fit,
  double v,
  const Eigen::Ref<const Eigen::ArrayXd>& x,
  int n)
{
  const BidData& data = fit.data;
  const Eigen::Index L = data.n_auctions();
  const int d = data.dim_x();
  const double h_f = fit.bw.h_f;
  const double h_x2 = fit.bw.h_x2;

  std::vector<Eigen::Index> with_n;
  for (Eigen::Index l = 0; l < L; ++l)
    if (data.bidder_counts[l] == n)
      with_n.push_back(l);
  if (with_n.size() < 3)
    throw std::invalid_argument(
      "variance_hat_hetero: need at least three auctions with the requested "
      "bidder count");

  const auto prod_k = [&](const KernelSpec& k, Eigen::Index l,
                          const Eigen::Ref<const Eigen::ArrayXd>& at,
                          double h) {
    double w = 1.0;
    for (int m = 0; m < d; ++m)
      w *= k.eval((data.covariates(l, m) - at[m]) / h);
    return w;
  };

  // literal eta_{il,k}(v, x)
  const auto eta = [&](Eigen::Index l, Eigen::Index i, Eigen::Index k) {
    const double b_il = data.bids[data.offsets[l] + i];
    double acc = 0.0;
    for (Eigen::Index j = 0; j < data.bidder_counts[k]; ++j) {
      const Eigen::Index at = data.offsets[k] + j;
      if (!fit.trimmed_in[at])
        continue;
      const double g = fit.g_joint[at];
      acc += fit.k0->deriv((fit.pseudo_values[at] - v) / h_f) *
             prod_k(*fit.k0, k, x, h_x2) * fit.G_joint[at] / (g * g) *
             fit.k1->eval((b_il - data.bids[at]) / h_f) *
             prod_k(*fit.k1, k, data.covariates.row(l).transpose().array(),
                    h_x2);
    }
    return acc / static_cast<double>(data.bidder_counts[k]);
  };

  KahanSum total;
  long long visited = 0;
  for (Eigen::Index l : with_n)
    for (Eigen::Index k : with_n) {
      if (k == l)
        continue;
      for (Eigen::Index k2 : with_n) {
        if (k2 == l || k2 == k)
          continue;
        double inner = 0.0;
        for (Eigen::Index i = 0; i < data.bidder_counts[l]; ++i) {
          inner += eta(l, i, k) * eta(l, i, k2);
          ++visited;
        }
        total.add(inner / static_cast<double>(data.bidder_counts[l]));
      }
    }

  const double pw = pi_hat(data, n, x, fit.bw.h_x3, *fit.k1) *
                    phi_hat(data, x, fit.bw.h_x3, *fit.k1);
  const double Ld = static_cast<double>(L);
  const double nd = static_cast<double>(n);
  const double h3 = std::pow(h_f, 3) * std::pow(h_x2, 3 * d);

  VarianceEstimate out;
  out.v = v;
  out.value = total.value() /
              (nd * (nd - 1.0) * (nd - 1.0) * pw * pw * h3) /
              (Ld * (Ld - 1.0) * (Ld - 2.0));
  out.n_terms_visited = visited;
  return out;
}

double variance_hat_mixture(const std::map<int, VarianceEstimate>& per_n,
                            const std::map<int, double>& pi_hat)
{
  if (per_n.size() != pi_hat.size())
    throw std::invalid_argument("variance_hat_mixture: key sets must match");
  double out = 0.0;
  for (const auto& [n, est] : per_n) {
    auto it = pi_hat.find(n);
    if (it == pi_hat.end())
      throw std::invalid_argument("variance_hat_mixture: key sets must match");
    out += it->second * it->second * est.value;
  }
  return out;
}

} // namespace gpvband
