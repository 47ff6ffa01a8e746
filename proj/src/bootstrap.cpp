#include "gpvband/bootstrap.hpp"

#include "gpvband/numeric.hpp"
#include "gpvband/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace gpvband {

void BootstrapConfig::validate() const
{
  if (replications < 1)
    throw std::invalid_argument("BootstrapConfig: replications must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("BootstrapConfig: alpha must be in (0, 1)");
}

namespace {

constexpr auto kBootTag = static_cast<std::uint64_t>(StreamTag::bootstrap);

//! Kernel evaluations between all pairs of sorted bids closer than h,
//! stored row-wise (CSR); row m covers sorted positions [lo[m], lo[m]+len).
struct WindowTable
{
  Eigen::ArrayXi lo;
  std::vector<std::ptrdiff_t> start; // size n+1
  Eigen::ArrayXd values;

  void build(const Eigen::ArrayXd& sorted, double h, const KernelSpec& k)
  {
    const Eigen::Index n = sorted.size();
    lo.resize(n);
    start.assign(static_cast<std::size_t>(n) + 1, 0);
    const double* sb = sorted.data();
    std::ptrdiff_t total = 0;
    std::vector<Eigen::Index> hi(static_cast<std::size_t>(n));
    for (Eigen::Index m = 0; m < n; ++m) {
      const auto l = std::lower_bound(sb, sb + n, sorted[m] - h) - sb;
      const auto r = std::upper_bound(sb, sb + n, sorted[m] + h) - sb;
      lo[m] = static_cast<int>(l);
      hi[static_cast<std::size_t>(m)] = r;
      start[static_cast<std::size_t>(m)] = total;
      total += r - l;
    }
    start[static_cast<std::size_t>(n)] = total;
    values.resize(total);
    for (Eigen::Index m = 0; m < n; ++m) {
      std::ptrdiff_t at = start[static_cast<std::size_t>(m)];
      for (Eigen::Index p = lo[m]; p < hi[static_cast<std::size_t>(m)]; ++p)
        values[at++] = k.eval((sb[p] - sorted[m]) / h);
    }
  }

  Eigen::Index row_len(Eigen::Index m) const
  {
    return static_cast<Eigen::Index>(start[static_cast<std::size_t>(m) + 1] -
                                     start[static_cast<std::size_t>(m)]);
  }
};

//! Precomputed machinery for fast homogeneous bootstrap replications.
//! A replicate is represented by multiplicities over the sorted original
//! bids, so the first-step kernel sums reduce to dot products against the
//! precomputed window tables.
class HomogeneousEngine
{
public:
  HomogeneousEngine(const GpvFit& fit, const KernelSpec& k_f,
                    bool with_variance)
    : fit_(fit)
    , k_f_(&k_f)
  {
    if (!(fit_.bw.h_f > 0.0))
      throw std::invalid_argument("bootstrap: second-step bandwidth not set");
    const Eigen::Index n = fit_.n_obs;
    wg_.build(fit_.sorted_bids, fit_.bw.h_g, *fit_.k_g);
    if (with_variance)
      wv_.build(fit_.sorted_bids, fit_.bw.h_f, *fit_.k_g);

    tie_end_.resize(n);
    for (Eigen::Index m = n - 1; m >= 0; --m) {
      if (m + 1 < n && fit_.sorted_bids[m + 1] == fit_.sorted_bids[m])
        tie_end_[m] = tie_end_[m + 1];
      else
        tie_end_[m] = static_cast<int>(m);
    }
    // trimming uses the original support estimates throughout
    trim_mask_.resize(n);
    for (Eigen::Index m = 0; m < n; ++m)
      trim_mask_[m] = (fit_.b_min + fit_.trim_h <= fit_.sorted_bids[m]) &&
                      (fit_.sorted_bids[m] <= fit_.b_max - fit_.trim_h);
  }

  struct Replicate
  {
    Eigen::ArrayXd counts; //!< multiplicity per sorted position
    Eigen::ArrayXd g_star;
    Eigen::ArrayXd G_star;
    Eigen::ArrayXd pseudo;
    Eigen::Array<bool, Eigen::Dynamic, 1> keep;
  };

  Replicate replicate(Rng& rng) const
  {
    const Eigen::Index n = fit_.n_obs;
    Replicate rep;
    rep.counts = Eigen::ArrayXd::Zero(n);
    for (Eigen::Index t = 0; t < n; ++t) {
      const auto flat = static_cast<Eigen::Index>(
        rng.uniform_index(static_cast<std::uint64_t>(n)));
      rep.counts[fit_.flat_to_sorted[flat]] += 1.0;
    }

    rep.G_star.resize(n);
    rep.g_star.resize(n);
    rep.pseudo.resize(n);
    rep.keep.resize(n);
    double cum = 0.0;
    Eigen::ArrayXd cums(n);
    for (Eigen::Index m = 0; m < n; ++m) {
      cum += rep.counts[m];
      cums[m] = cum;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const double inv_nh = inv_n / fit_.bw.h_g;
    const int N = fit_.n_bidders;
    for (Eigen::Index m = 0; m < n; ++m) {
      if (rep.counts[m] == 0.0) {
        rep.keep[m] = false;
        rep.pseudo[m] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      rep.G_star[m] = cums[tie_end_[m]] * inv_n;
      const Eigen::Index len = wg_.row_len(m);
      const double g =
        inv_nh *
        (Eigen::Map<const Eigen::ArrayXd>(
           wg_.values.data() + wg_.start[static_cast<std::size_t>(m)], len) *
         rep.counts.segment(wg_.lo[m], len))
          .sum();
      rep.g_star[m] = g;
      bool keep = trim_mask_[m] && g >= kDensityFloor;
      rep.keep[m] = keep;
      rep.pseudo[m] = keep ? fit_.sorted_bids[m] +
                               rep.G_star[m] / ((N - 1) * g)
                           : std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
  }

  double f_star(const Replicate& rep, double v) const
  {
    const Eigen::Index n = fit_.n_obs;
    const double h = fit_.bw.h_f;
    double acc = 0.0;
    for (Eigen::Index m = 0; m < n; ++m) {
      if (!rep.keep[m])
        continue;
      const double u = (rep.pseudo[m] - v) / h;
      if (std::abs(u) <= k_f_->support_radius)
        acc += rep.counts[m] * k_f_->eval(u);
    }
    return acc / (static_cast<double>(n) * h);
  }

  //! triple-sum variance estimator evaluated on the replicate
  double var_star(const Replicate& rep, double v) const
  {
    const Eigen::Index n = fit_.n_obs;
    const double h = fit_.bw.h_f;
    Eigen::ArrayXd T = Eigen::ArrayXd::Zero(n);
    Eigen::ArrayXd Q = Eigen::ArrayXd::Zero(n);
    std::vector<std::pair<Eigen::Index, double>> self_terms;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (rep.counts[a] == 0.0 || !rep.keep[a])
        continue;
      const double u = (rep.pseudo[a] - v) / h;
      if (std::abs(u) > k_f_->support_radius)
        continue;
      const double w =
        k_f_->deriv(u) * rep.G_star[a] / (rep.g_star[a] * rep.g_star[a]);
      if (w == 0.0)
        continue;
      const Eigen::Index len = wv_.row_len(a);
      const double* vals =
        wv_.values.data() + wv_.start[static_cast<std::size_t>(a)];
      const Eigen::Index lo = wv_.lo[a];
      const double ca = rep.counts[a];
      for (Eigen::Index j = 0; j < len; ++j) {
        const double eta = w * vals[j];
        T[lo + j] += ca * eta;
        Q[lo + j] += ca * eta * eta;
      }
      // one copy at the same position is the observation itself
      const double eta_self = w * (*fit_.k_g).eval(0.0);
      self_terms.emplace_back(a, eta_self);
    }
    for (const auto& [a, eta_self] : self_terms) {
      T[a] -= eta_self;
      Q[a] -= eta_self * eta_self;
    }
    KahanSum total;
    for (Eigen::Index m = 0; m < n; ++m)
      if (rep.counts[m] != 0.0)
        total.add(rep.counts[m] * (T[m] * T[m] - Q[m]));
    const double N = static_cast<double>(fit_.n_bidders);
    const double nn = static_cast<double>(n);
    return total.value() / (N * (N - 1.0) * (N - 1.0) * h * h * h) /
           (nn * (nn - 1.0) * (nn - 2.0));
  }

  const GpvFit& fit() const { return fit_; }

private:
  GpvFit fit_;
  const KernelSpec* k_f_;
  WindowTable wg_;
  WindowTable wv_;
  Eigen::ArrayXi tie_end_;
  Eigen::Array<bool, Eigen::Dynamic, 1> trim_mask_;
};

} // namespace

AuctionSample resample_homogeneous(const BidData& data, Rng& rng)
{
  if (!data.homogeneous_counts() || data.n_auctions() == 0)
    throw std::invalid_argument(
      "resample_homogeneous: requires a homogeneous sample");
  const Eigen::Index n = data.n_obs();
  AuctionSample out;
  out.data = data;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto flat = static_cast<Eigen::Index>(
      rng.uniform_index(static_cast<std::uint64_t>(n)));
    out.data.bids[t] = data.bids[flat];
  }
  return out;
}

AuctionSample resample_hetero(const BidData& data, Rng& rng)
{
  const Eigen::Index L = data.n_auctions();
  if (L == 0)
    throw std::invalid_argument("resample_hetero: empty sample");
  AuctionSample out;
  BidData& re = out.data;

  Eigen::ArrayXi src(L);
  for (Eigen::Index l = 0; l < L; ++l)
    src[l] = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(L)));

  re.bidder_counts.resize(L);
  re.covariates.resize(L, data.dim_x());
  re.offsets.resize(L + 1);
  re.offsets[0] = 0;
  for (Eigen::Index l = 0; l < L; ++l) {
    re.bidder_counts[l] = data.bidder_counts[src[l]];
    if (data.dim_x() > 0)
      re.covariates.row(l) = data.covariates.row(src[l]);
    re.offsets[l + 1] = re.offsets[l] + re.bidder_counts[l];
  }
  re.bids.resize(re.offsets[L]);
  for (Eigen::Index l = 0; l < L; ++l) {
    const Eigen::Index base = data.offsets[src[l]];
    const auto nk = static_cast<std::uint64_t>(data.bidder_counts[src[l]]);
    for (Eigen::Index i = 0; i < re.bidder_counts[l]; ++i)
      re.bids[re.offsets[l] + i] =
        data.bids[base + static_cast<Eigen::Index>(rng.uniform_index(nk))];
  }
  return out;
}

namespace {

GpvFit fit_with_bandwidths(const BidData& data,
                           const Bandwidths& bw,
                           const KernelSpec& k_g)
{
  GpvFit fit = pseudo_values(data, bw.h_g, k_g);
  fit.bw.h_f = bw.h_f;
  return fit;
}

} // namespace

CiResult percentile_ci(const BidData& data,
                       double v,
                       const BootstrapConfig& cfg,
                       const Bandwidths& bw,
                       const KernelSpec& k_f,
                       const KernelSpec& k_g)
{
  cfg.validate();
  if (cfg.replications < 2)
    throw std::invalid_argument("percentile_ci: need at least 2 replications");
  const GpvFit fit = fit_with_bandwidths(data, bw, k_g);
  const HomogeneousEngine engine(fit, k_f, false);

  const int B = cfg.replications;
  Eigen::ArrayXd stats(B);
  parallel_for(B, cfg.threads, [&](long r) {
    Rng rng = substream(cfg.seed, kBootTag, static_cast<std::uint64_t>(r));
    const auto rep = engine.replicate(rng);
    stats[r] = engine.f_star(rep, v);
  });
  std::sort(stats.data(), stats.data() + B);

  CiResult out;
  out.lower = quantile_sorted(stats, 0.5 * cfg.alpha);
  out.upper = quantile_sorted(stats, 1.0 - 0.5 * cfg.alpha);
  return out;
}

CiResult studentized_ci(const BidData& data,
                        double v,
                        const BootstrapConfig& cfg,
                        const Bandwidths& bw,
                        const KernelSpec& k_f,
                        const KernelSpec& k_g,
                        bool use_normal_critical)
{
  cfg.validate();
  if (cfg.replications < 2)
    throw std::invalid_argument("studentized_ci: need at least 2 replications");
  const GpvFit fit = fit_with_bandwidths(data, bw, k_g);
  const HomogeneousEngine engine(fit, k_f, true);

  const double f_hat = gpv_density(fit, v, bw.h_f, k_f);
  const double v_hat = variance_hat(fit, v, k_f, k_g).value;
  const double norm = static_cast<double>(fit.n_auctions) *
                      bw.h_f * bw.h_f * bw.h_f;
  const double se = std::sqrt(std::max(v_hat, kVarianceFloor) / norm);

  CiResult out;
  double critical;
  if (use_normal_critical) {
    critical = normal_quantile(1.0 - 0.5 * cfg.alpha);
  } else {
    const int B = cfg.replications;
    Eigen::ArrayXd stats(B);
    Eigen::Array<bool, Eigen::Dynamic, 1> ok(B);
    parallel_for(B, cfg.threads, [&](long r) {
      Rng rng = substream(cfg.seed, kBootTag, static_cast<std::uint64_t>(r));
      const auto rep = engine.replicate(rng);
      const double vs = engine.var_star(rep, v);
      if (vs <= kVarianceFloor) {
        ok[r] = false;
        stats[r] = 0.0;
        return;
      }
      ok[r] = true;
      stats[r] = std::abs(engine.f_star(rep, v) - f_hat) /
                 std::sqrt(vs / norm);
    });
    const Eigen::Index kept = ok.count();
    out.n_dropped = static_cast<int>(B - kept);
    if (kept < 2)
      throw std::runtime_error(
        "studentized_ci: too few usable bootstrap replicates");
    Eigen::ArrayXd usable(kept);
    Eigen::Index at = 0;
    for (int r = 0; r < B; ++r)
      if (ok[r])
        usable[at++] = stats[r];
    std::sort(usable.data(), usable.data() + kept);
    critical = quantile_sorted(usable, 1.0 - cfg.alpha);
  }
  out.lower = f_hat - critical * se;
  out.upper = f_hat + critical * se;
  return out;
}

double BandReplicates::zeta(double alpha) const
{
  return quantile_sorted(sup_stats_sorted, 1.0 - alpha);
}

BandResult BandReplicates::band(double alpha) const
{
  BandResult out;
  out.grid = grid;
  out.f_hat = f_hat;
  out.v_hat = v_hat;
  out.in_sup = in_sup;
  out.zeta_star = zeta(alpha);
  out.lower = f_hat - out.zeta_star * se;
  out.upper = f_hat + out.zeta_star * se;
  return out;
}

BandReplicates band_replicates(const GpvFit& fit,
                               const Eigen::Ref<const Eigen::ArrayXd>& grid,
                               const BootstrapConfig& cfg,
                               const KernelSpec& k_f)
{
  cfg.validate();
  if (grid.size() == 0)
    throw std::invalid_argument("band_replicates: empty grid");
  const Eigen::Index G = grid.size();

  BandReplicates out;
  out.grid = grid;
  out.f_hat.resize(G);
  out.v_hat.resize(G);
  out.se.resize(G);
  out.in_sup.resize(G);

  const double norm = static_cast<double>(fit.n_auctions) *
                      fit.bw.h_f * fit.bw.h_f * fit.bw.h_f;
  for (Eigen::Index i = 0; i < G; ++i) {
    out.f_hat[i] = gpv_density(fit, grid[i], fit.bw.h_f, k_f);
    const auto est = variance_hat(fit, grid[i], k_f, *fit.k_g);
    out.v_hat[i] = est.value;
    out.in_sup[i] = !est.empty_active_set && est.value > kVarianceFloor;
    out.se[i] = std::sqrt(std::max(est.value, kVarianceFloor) / norm);
  }
  if (out.in_sup.count() == 0)
    throw std::runtime_error("band_replicates: all-zero variance on grid");

  const HomogeneousEngine engine(fit, k_f, false);
  const int B = cfg.replications;
  Eigen::ArrayXd sups(B);
  parallel_for(B, cfg.threads, [&](long r) {
    Rng rng = substream(cfg.seed, kBootTag, static_cast<std::uint64_t>(r));
    const auto rep = engine.replicate(rng);
    double sup = 0.0;
    for (Eigen::Index i = 0; i < G; ++i) {
      if (!out.in_sup[i])
        continue;
      const double z =
        std::abs(engine.f_star(rep, grid[i]) - out.f_hat[i]) / out.se[i];
      sup = std::max(sup, z);
    }
    sups[r] = sup;
  });
  std::sort(sups.data(), sups.data() + B);
  out.sup_stats_sorted = sups;
  return out;
}

BandResult uniform_band(const BidData& data,
                        const Eigen::Ref<const Eigen::ArrayXd>& grid,
                        const BootstrapConfig& cfg,
                        const Bandwidths& bw,
                        const KernelSpec& k_f,
                        const KernelSpec& k_g)
{
  const GpvFit fit = fit_with_bandwidths(data, bw, k_g);
  return band_replicates(fit, grid, cfg, k_f).band(cfg.alpha);
}

namespace {

//! Same replicate machinery for the two-stage (auction level) resampling.
class HeteroEngine
{
public:
  explicit HeteroEngine(const HeteroFit& fit)
    : fit_(fit)
  {
    if (!(fit_.bw.h_f > 0.0))
      throw std::invalid_argument("bootstrap: second-step bandwidth not set");
    const Eigen::Index L = fit_.data.n_auctions();
    // pairwise covariate kernel at the first-step bandwidth
    if (L <= 4096) {
      pair_kx_.resize(L, L);
      for (Eigen::Index a = 0; a < L; ++a)
        for (Eigen::Index b = 0; b < L; ++b)
          pair_kx_(a, b) = pair_eval(a, b);
      has_pairs_ = true;
    }
  }

  struct Replicate
  {
    Eigen::ArrayXi src;     //!< source auction per resampled auction
    Eigen::ArrayXi bid_idx; //!< flat index into the original bids
    Eigen::ArrayXd pseudo;  //!< flat, resampled layout (same offsets as src)
    Eigen::Array<bool, Eigen::Dynamic, 1> keep;
  };

  Replicate replicate(Rng& rng) const
  {
    const BidData& data = fit_.data;
    const Eigen::Index L = data.n_auctions();
    Replicate rep;
    rep.src.resize(L);
    for (Eigen::Index l = 0; l < L; ++l)
      rep.src[l] =
        static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(L)));

    Eigen::ArrayXi offsets(L + 1);
    offsets[0] = 0;
    for (Eigen::Index l = 0; l < L; ++l)
      offsets[l + 1] = offsets[l] + data.bidder_counts[rep.src[l]];
    rep.bid_idx.resize(offsets[L]);
    for (Eigen::Index l = 0; l < L; ++l) {
      const Eigen::Index base = data.offsets[rep.src[l]];
      const auto nk =
        static_cast<std::uint64_t>(data.bidder_counts[rep.src[l]]);
      for (Eigen::Index i = 0; i < data.bidder_counts[rep.src[l]]; ++i)
        rep.bid_idx[offsets[l] + i] =
          static_cast<int>(base +
                           static_cast<Eigen::Index>(rng.uniform_index(nk)));
    }

    // first-step estimates on the resampled data
    const int d = data.dim_x();
    const double inv_L = 1.0 / static_cast<double>(L);
    const double inv_hx1d = d > 0 ? std::pow(fit_.bw.h_x1, -d) : 1.0;
    const double h_g = fit_.bw.h_g;
    rep.pseudo.resize(offsets[L]);
    rep.keep.resize(offsets[L]);

    std::vector<double> Gnum;
    std::vector<double> gnum;
    for (Eigen::Index l = 0; l < L; ++l) {
      const int sl = rep.src[l];
      const int nl = data.bidder_counts[sl];
      Gnum.assign(static_cast<std::size_t>(nl), 0.0);
      gnum.assign(static_cast<std::size_t>(nl), 0.0);
      for (Eigen::Index k = 0; k < L; ++k) {
        const int sk = rep.src[k];
        if (data.bidder_counts[sk] != nl)
          continue;
        const double w =
          has_pairs_ ? pair_kx_(sl, sk) : pair_eval(sl, sk);
        if (w == 0.0)
          continue;
        const int nk = data.bidder_counts[sk];
        const double w_over_nk = w / static_cast<double>(nk);
        for (int i = 0; i < nl; ++i) {
          const double b = data.bids[rep.bid_idx[offsets[l] + i]];
          double cnt = 0.0, ker = 0.0;
          for (int j = 0; j < nk; ++j) {
            const double bj = data.bids[rep.bid_idx[offsets[k] + j]];
            if (bj <= b)
              cnt += 1.0;
            const double u = (bj - b) / h_g;
            if (std::abs(u) <= fit_.k1->support_radius)
              ker += fit_.k1->eval(u);
          }
          Gnum[static_cast<std::size_t>(i)] += w_over_nk * cnt;
          gnum[static_cast<std::size_t>(i)] += w_over_nk * ker / h_g;
        }
      }
      const Eigen::ArrayXd xl = data.covariates.row(sl).transpose();
      for (int i = 0; i < nl; ++i) {
        const Eigen::Index at = offsets[l] + i;
        const double b = data.bids[rep.bid_idx[at]];
        const double G = Gnum[static_cast<std::size_t>(i)] * inv_L * inv_hx1d;
        const double g = gnum[static_cast<std::size_t>(i)] * inv_L * inv_hx1d;
        bool keep =
          fit_.boundary.contains(b, xl, nl, fit_.trim_b_halfwidth,
                                 fit_.trim_x_halfwidth) &&
          g >= kDensityFloor;
        rep.keep[at] = keep;
        rep.pseudo[at] = keep ? b + G / ((nl - 1) * g)
                              : std::numeric_limits<double>::quiet_NaN();
      }
    }
    return rep;
  }

  //! pooled conditional density estimate on the replicate
  double f_star(const Replicate& rep,
                double v,
                const Eigen::Ref<const Eigen::ArrayXd>& x) const
  {
    const BidData& data = fit_.data;
    const Eigen::Index L = data.n_auctions();
    const int d = data.dim_x();
    const double h_f = fit_.bw.h_f;

    double phi = 0.0;
    double acc = 0.0;
    Eigen::Index off = 0;
    for (Eigen::Index l = 0; l < L; ++l) {
      const int sl = rep.src[l];
      const int nl = data.bidder_counts[sl];
      double w3 = 1.0;
      double w2 = 1.0;
      for (int m = 0; m < d; ++m) {
        const double diff = data.covariates(sl, m) - x[m];
        w3 *= fit_.k1->eval(diff / fit_.bw.h_x3);
        w2 *= fit_.k0->eval(diff / fit_.bw.h_x2);
      }
      phi += w3;
      if (w2 != 0.0) {
        double inner = 0.0;
        for (int i = 0; i < nl; ++i) {
          const Eigen::Index at = off + i;
          if (!rep.keep[at])
            continue;
          const double u = (rep.pseudo[at] - v) / h_f;
          if (std::abs(u) <= fit_.k0->support_radius)
            inner += fit_.k0->eval(u);
        }
        acc += w2 * inner / static_cast<double>(nl);
      }
      off += nl;
    }
    const double inv_hx3d = d > 0 ? std::pow(fit_.bw.h_x3, -d) : 1.0;
    const double inv_hx2d = d > 0 ? std::pow(fit_.bw.h_x2, -d) : 1.0;
    phi *= inv_hx3d / static_cast<double>(L);
    if (std::abs(phi) < 1e-10)
      return 0.0;
    return acc * inv_hx2d / (phi * static_cast<double>(L) * h_f);
  }

private:
  double pair_eval(Eigen::Index a, Eigen::Index b) const
  {
    const int d = fit_.data.dim_x();
    double w = 1.0;
    for (int m = 0; m < d; ++m) {
      const double u =
        (fit_.data.covariates(a, m) - fit_.data.covariates(b, m)) /
        fit_.bw.h_x1;
      if (std::abs(u) > fit_.k1->support_radius)
        return 0.0;
      w *= fit_.k1->eval(u);
    }
    return w;
  }

  HeteroFit fit_;
  Eigen::ArrayXXd pair_kx_;
  bool has_pairs_ = false;
};

} // namespace

BandReplicates band_replicates_hetero(
  const HeteroFit& fit,
  const Eigen::Ref<const Eigen::ArrayXd>& grid,
  const Eigen::Ref<const Eigen::ArrayXd>& x,
  const BootstrapConfig& cfg)
{
  cfg.validate();
  if (grid.size() == 0)
    throw std::invalid_argument("band_replicates_hetero: empty grid");
  const Eigen::Index G = grid.size();
  const BidData& data = fit.data;
  const int d = data.dim_x();

  BandReplicates out;
  out.grid = grid;
  out.f_hat.resize(G);
  out.v_hat.resize(G);
  out.se.resize(G);
  out.in_sup.resize(G);

  // mixture variance over observed bidder counts with enough auctions
  std::vector<int> usable_counts;
  std::map<int, double> pi2;
  for (int n : fit.observed_counts) {
    Eigen::Index have = 0;
    for (Eigen::Index l = 0; l < data.n_auctions(); ++l)
      if (data.bidder_counts[l] == n)
        ++have;
    if (have >= 3) {
      usable_counts.push_back(n);
      pi2[n] = pi_hat(data, n, x, fit.bw.h_x3, *fit.k1);
    }
  }
  if (usable_counts.empty())
    throw std::runtime_error(
      "band_replicates_hetero: no bidder count has three auctions");

  const double norm = static_cast<double>(data.n_auctions()) *
                      std::pow(fit.bw.h_f, 3) * std::pow(fit.bw.h_x2, d);
  for (Eigen::Index i = 0; i < G; ++i) {
    out.f_hat[i] = gpv_density_pooled(fit, grid[i], x);
    double mix = 0.0;
    bool any_active = false;
    for (int n : usable_counts) {
      const auto est = variance_hat_hetero(fit, grid[i], x, n);
      mix += pi2[n] * pi2[n] * est.value;
      any_active = any_active || !est.empty_active_set;
    }
    out.v_hat[i] = mix;
    out.in_sup[i] = any_active && mix > kVarianceFloor;
    out.se[i] = std::sqrt(std::max(mix, kVarianceFloor) / norm);
  }
  if (out.in_sup.count() == 0)
    throw std::runtime_error("band_replicates_hetero: all-zero variance on grid");

  const HeteroEngine engine(fit);
  const int B = cfg.replications;
  Eigen::ArrayXd sups(B);
  parallel_for(B, cfg.threads, [&](long r) {
    Rng rng = substream(cfg.seed, kBootTag, static_cast<std::uint64_t>(r));
    const auto rep = engine.replicate(rng);
    double sup = 0.0;
    for (Eigen::Index i = 0; i < G; ++i) {
      if (!out.in_sup[i])
        continue;
      const double z =
        std::abs(engine.f_star(rep, grid[i], x) - out.f_hat[i]) / out.se[i];
      sup = std::max(sup, z);
    }
    sups[r] = sup;
  });
  std::sort(sups.data(), sups.data() + B);
  out.sup_stats_sorted = sups;
  return out;
}

Eigen::ArrayXXd bootstrap_density_grid(
  const GpvFit& fit,
  const Eigen::Ref<const Eigen::ArrayXd>& grid,
  const BootstrapConfig& cfg,
  const KernelSpec& k_f)
{
  cfg.validate();
  const HomogeneousEngine engine(fit, k_f, false);
  Eigen::ArrayXXd out(cfg.replications, grid.size());
  parallel_for(cfg.replications, cfg.threads, [&](long r) {
    Rng rng = substream(cfg.seed, kBootTag, static_cast<std::uint64_t>(r));
    const auto rep = engine.replicate(rng);
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      out(r, i) = engine.f_star(rep, grid[i]);
  });
  return out;
}

Eigen::ArrayXXd bootstrap_density_grid_hetero(
  const HeteroFit& fit,
  const Eigen::Ref<const Eigen::ArrayXd>& grid,
  const Eigen::Ref<const Eigen::ArrayXd>& x,
  const BootstrapConfig& cfg)
{
  cfg.validate();
  const HeteroEngine engine(fit);
  Eigen::ArrayXXd out(cfg.replications, grid.size());
  parallel_for(cfg.replications, cfg.threads, [&](long r) {
    Rng rng = substream(cfg.seed, kBootTag, static_cast<std::uint64_t>(r));
    const auto rep = engine.replicate(rng);
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      out(r, i) = engine.f_star(rep, grid[i], x);
  });
  return out;
}

BandResult uniform_band_hetero(const BidData& data,
                               const Eigen::Ref<const Eigen::ArrayXd>& grid,
                               const Eigen::Ref<const Eigen::ArrayXd>& x,
                               const BootstrapConfig& cfg,
                               const HeteroBandwidths& bw,
                               const KernelSpec& k0,
                               const KernelSpec& k1,
                               const HeteroTrim& trim)
{
  HeteroFit fit = pseudo_values_hetero(data, bw, k0, k1, trim);
  if (!(fit.bw.h_f > 0.0))
    throw std::invalid_argument("uniform_band_hetero: h_f not set");
  return band_replicates_hetero(fit, grid, x, cfg).band(cfg.alpha);
}

} // namespace gpvband
