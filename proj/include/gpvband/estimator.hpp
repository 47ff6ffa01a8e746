#pragma once

#include "gpvband/dgp.hpp"
#include "gpvband/kernels.hpp"

#include <Eigen/Core>

namespace gpvband {

struct Bandwidths
{
  double h_g = 0.0; //!< first step (bid density)
  double h_f = 0.0; //!< second step (pseudo-value density)
};

//! Floor below which an estimated bid density is treated as zero: the
//! observation is force-trimmed instead of producing a huge pseudo-value.
inline constexpr double kDensityFloor = 1e-10;

//! Empirical CDF (weak inequality, right-continuous).
double ecdf(const Eigen::Ref<const Eigen::ArrayXd>& bids, double b);

//! Kernel density estimate (1 / (n h)) sum K((B - b) / h).
double kde(const Eigen::Ref<const Eigen::ArrayXd>& bids,
           double b,
           double h,
           const KernelSpec& k);

//! First-step output for the model without covariates: pseudo-values
//! V-hat = xi-hat(B), trimming flags, estimated bid support and cached
//! sorted structures.  Immutable after construction.
struct GpvFit
{
  BidData data;
  Eigen::ArrayXd pseudo_values; //!< flat; NaN where trimmed
  Eigen::Array<bool, Eigen::Dynamic, 1> trimmed_in; //!< true = kept
  Eigen::ArrayXd G_hat; //!< empirical bid CDF at each observation
  Eigen::ArrayXd g_hat; //!< kernel bid density at each observation
  double b_min = 0.0;
  double b_max = 0.0;
  double trim_h = 0.0; //!< halfwidth of the boundary trimming rule
  Bandwidths bw;
  const KernelSpec* k_g = nullptr;

  // sorted caches shared by the density/variance/bootstrap paths
  Eigen::ArrayXd sorted_bids;
  Eigen::ArrayXi sorted_to_flat;
  Eigen::ArrayXi flat_to_sorted;

  int n_bidders = 0;
  Eigen::Index n_auctions = 0;
  Eigen::Index n_obs = 0;
  Eigen::Index n_trimmed() const { return n_obs - trimmed_in.count(); }
};

//! Build pseudo-values from a homogeneous sample with first-step bandwidth
//! h_g.  The trimming bandwidth defaults to h_g (it protects the first-step
//! density) but can be overridden.
GpvFit pseudo_values(const BidData& data,
                     double h_g,
                     const KernelSpec& k_g,
                     double trim_h = -1.0);

//! Two-step density estimate at v from an existing fit.
double gpv_density(const GpvFit& fit,
                   double v,
                   double h_f,
                   const KernelSpec& k_f);

//! Rule-of-thumb first-step bandwidth h_g = 3.72 sigma_b (N L)^(-1/5).
double rule_of_thumb_h_g(const BidData& data);

//! Rule-of-thumb second-step bandwidth
//! h_f = 3.15 sigma_v ((N L)_T)^(-1/5), where sigma_v and the count are
//! taken over the trimmed (kept) pseudo-values.
double rule_of_thumb_h_f(const GpvFit& fit);

//! Convenience pipeline: h_g from the bids, first-step fit, then h_f from
//! the trimmed pseudo-values.  Returns the fit with both bandwidths set.
GpvFit fit_gpv(const BidData& data,
               const KernelSpec& k_g = triweight_order4());

} // namespace gpvband
