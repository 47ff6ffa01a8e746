#pragma once

#include "gpvband/estimator.hpp"
#include "gpvband/hetero.hpp"
#include "gpvband/rng.hpp"
#include "gpvband/variance.hpp"

#include <Eigen/Core>

namespace gpvband {

struct BootstrapConfig
{
  int replications = 500;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

//! Floor applied to variance estimates before square roots.
inline constexpr double kVarianceFloor = 1e-12;

//! Uniform confidence band over a grid.
struct BandResult
{
  Eigen::ArrayXd grid;
  Eigen::ArrayXd f_hat;
  Eigen::ArrayXd v_hat; //!< variance estimates (unfloored)
  Eigen::ArrayXd lower;
  Eigen::ArrayXd upper;
  double zeta_star = 0.0;
  Eigen::Array<bool, Eigen::Dynamic, 1> in_sup; //!< grid points entering the sup
};

struct CiResult
{
  double lower = 0.0;
  double upper = 0.0;
  int n_dropped = 0; //!< studentized replicates discarded for tiny variance
};

//! Pooled i.i.d. resample of all bids, reshaped to the original layout.
AuctionSample resample_homogeneous(const BidData& data, Rng& rng);

//! Two-stage resample: auctions (covariate, count) with replacement, then
//! bids with replacement within each selected auction.
AuctionSample resample_hetero(const BidData& data, Rng& rng);

//! Percentile bootstrap confidence interval for f(v).
CiResult percentile_ci(const BidData& data,
                       double v,
                       const BootstrapConfig& cfg,
                       const Bandwidths& bw,
                       const KernelSpec& k_f = triweight(),
                       const KernelSpec& k_g = triweight_order4());

//! Studentized ("bootstrap-t") confidence interval; critical value is the
//! (1-alpha) bootstrap quantile of |Z**|, or the normal quantile when
//! use_normal_critical is set.
CiResult studentized_ci(const BidData& data,
                        double v,
                        const BootstrapConfig& cfg,
                        const Bandwidths& bw,
                        const KernelSpec& k_f = triweight(),
                        const KernelSpec& k_g = triweight_order4(),
                        bool use_normal_critical = false);

//! Bootstrap uniform confidence band for f over the grid.
BandResult uniform_band(const BidData& data,
                        const Eigen::Ref<const Eigen::ArrayXd>& grid,
                        const BootstrapConfig& cfg,
                        const Bandwidths& bw,
                        const KernelSpec& k_f = triweight(),
                        const KernelSpec& k_g = triweight_order4());

//! Conditional uniform band at covariate x for the general model.
BandResult uniform_band_hetero(const BidData& data,
                               const Eigen::Ref<const Eigen::ArrayXd>& grid,
                               const Eigen::Ref<const Eigen::ArrayXd>& x,
                               const BootstrapConfig& cfg,
                               const HeteroBandwidths& bw,
                               const KernelSpec& k0 = triweight(),
                               const KernelSpec& k1 = triweight_order4(),
                               const HeteroTrim& trim = {});

//! Replicate-level view of a band computation: the original-sample curves
//! and the sorted sup statistics, from which bands at several levels can
//! be read off one replicate set (used by the coverage harness and the
//! nesting tests).
struct BandReplicates
{
  Eigen::ArrayXd grid;
  Eigen::ArrayXd f_hat;
  Eigen::ArrayXd v_hat;
  Eigen::ArrayXd se; //!< sqrt(max(v_hat, floor) / normalization)
  Eigen::Array<bool, Eigen::Dynamic, 1> in_sup;
  Eigen::ArrayXd sup_stats_sorted; //!< one sup |Z*| per replication

  double zeta(double alpha) const;
  BandResult band(double alpha) const;
};

BandReplicates band_replicates(const GpvFit& fit,
                               const Eigen::Ref<const Eigen::ArrayXd>& grid,
                               const BootstrapConfig& cfg,
                               const KernelSpec& k_f);

BandReplicates band_replicates_hetero(
  const HeteroFit& fit,
  const Eigen::Ref<const Eigen::ArrayXd>& grid,
  const Eigen::Ref<const Eigen::ArrayXd>& x,
  const BootstrapConfig& cfg);

//! Raw bootstrap density replicates over a grid (replications x grid);
//! lets callers derive pointwise intervals and bands from one replicate
//! set.
Eigen::ArrayXXd bootstrap_density_grid(
  const GpvFit& fit,
  const Eigen::Ref<const Eigen::ArrayXd>& grid,
  const BootstrapConfig& cfg,
  const KernelSpec& k_f);

Eigen::ArrayXXd bootstrap_density_grid_hetero(
  const HeteroFit& fit,
  const Eigen::Ref<const Eigen::ArrayXd>& grid,
  const Eigen::Ref<const Eigen::ArrayXd>& x,
  const BootstrapConfig& cfg);

} // namespace gpvband
