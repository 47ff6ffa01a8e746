#pragma once

#include "gpvband/dgp.hpp"
#include "gpvband/kernels.hpp"

#include <Eigen/Core>
#include <map>
#include <vector>

namespace gpvband {

//! Bandwidths for the model with covariates and random bidder counts.
//! First step (pseudo-values): h_g for bids, h_x1 for covariates.
//! Second step (density of pseudo-values): h_f for values, h_x2 for
//! covariates, h_x3 for the density/probability weights in the
//! denominators.  h_boundary is the side of the support-estimation cells.
struct HeteroBandwidths
{
  double h_g = 0.0;
  double h_x1 = 1.0;
  double h_f = 0.0;
  double h_x2 = 1.0;
  double h_x3 = 1.0;
  double h_boundary = 1.0;
};

//! Cellwise estimated bid support: per half-open hypercube of covariate
//! space, the minimum bid and the per-bidder-count maximum bid.
class BoundaryTable
{
public:
  BoundaryTable() = default;
  BoundaryTable(int dim, double h_boundary);

  void insert(const Eigen::Ref<const Eigen::ArrayXd>& x, int n, double bid);

  //! Containment of the box [b - tb, b + tb] x prod_k [x_k - tx, x_k + tx]
  //! in the estimated support for bidder count n.  Cells intersecting the
  //! covariate box that hold no data (for any count, or for count n) fail.
  bool contains(double b,
                const Eigen::Ref<const Eigen::ArrayXd>& x,
                int n,
                double tb,
                double tx) const;

  //! Bounds of the single cell containing x, if present.
  struct CellBounds
  {
    double b_min;
    std::map<int, double> b_max_by_n;
  };
  const CellBounds* cell(const Eigen::Ref<const Eigen::ArrayXd>& x) const;

  double h_boundary() const { return h_; }
  int dim() const { return dim_; }
  std::size_t n_cells() const { return cells_.size(); }

private:
  std::vector<long> key_of(const Eigen::Ref<const Eigen::ArrayXd>& x) const;

  int dim_ = 0;
  double h_ = 1.0;
  std::map<std::vector<long>, CellBounds> cells_;
};

BoundaryTable boundary_hat(const BidData& data, double h_boundary);

//! Kernel density estimate of the covariate density at x (product kernel).
double phi_hat(const BidData& data,
               const Eigen::Ref<const Eigen::ArrayXd>& x,
               double h,
               const KernelSpec& k1);

//! Nadaraya-Watson estimate of P(N = n | X = x); the estimates over the
//! observed counts share one denominator and sum to one exactly.
double pi_hat(const BidData& data,
              int n,
              const Eigen::Ref<const Eigen::ArrayXd>& x,
              double h,
              const KernelSpec& k1);

//! Conditional bid CDF/PDF estimators (the ratio forms with the 1/N_l
//! inner averages).
double G_hat_cond(const BidData& data,
                  double b,
                  const Eigen::Ref<const Eigen::ArrayXd>& x,
                  int n,
                  double h_x,
                  const KernelSpec& k1);
double g_hat_cond(const BidData& data,
                  double b,
                  const Eigen::Ref<const Eigen::ArrayXd>& x,
                  int n,
                  double h_b,
                  double h_x,
                  const KernelSpec& k_g,
                  const KernelSpec& k1);

//! First-step output for the general model.
struct HeteroFit
{
  BidData data;
  HeteroBandwidths bw;
  const KernelSpec* k0 = nullptr; //!< second-order kernel
  const KernelSpec* k1 = nullptr; //!< higher-order kernel

  Eigen::ArrayXd pseudo_values; //!< flat; NaN where trimmed
  Eigen::Array<bool, Eigen::Dynamic, 1> trimmed_in;
  Eigen::ArrayXd G_joint; //!< unnormalized G-hat(B, X, N) at each obs
  Eigen::ArrayXd g_joint; //!< unnormalized g-hat(B, X, N) at each obs
  BoundaryTable boundary;
  double trim_b_halfwidth = 0.0;
  double trim_x_halfwidth = 0.0;
  std::vector<int> observed_counts; //!< distinct N values, ascending

  Eigen::Index n_obs() const { return data.n_obs(); }
};

//! Options for the trimming box; halfwidths default to 1.5 h_boundary in
//! the bid direction and h_boundary in the covariate directions (the
//! resolution of the cellwise support estimates).
struct HeteroTrim
{
  double b_halfwidth = -1.0;
  double x_halfwidth = -1.0;
};

HeteroFit pseudo_values_hetero(const BidData& data,
                               const HeteroBandwidths& bw,
                               const KernelSpec& k0 = triweight(),
                               const KernelSpec& k1 = triweight_order4(),
                               const HeteroTrim& trim = {});

//! Per-count conditional density estimate f-hat(v | x, n).
double gpv_density_cond(const HeteroFit& fit,
                        double v,
                        const Eigen::Ref<const Eigen::ArrayXd>& x,
                        int n);

//! pi-hat weighted combination over the observed bidder counts; equals the
//! pooled single-sum form to rounding.
double gpv_density_weighted(const HeteroFit& fit,
                            double v,
                            const Eigen::Ref<const Eigen::ArrayXd>& x);

//! The pooled form (all counts in one sum, normalized by phi-hat only).
double gpv_density_pooled(const HeteroFit& fit,
                          double v,
                          const Eigen::Ref<const Eigen::ArrayXd>& x);

//! Rule-of-thumb bandwidths for d = 1 designs (covariate smoothing rates
//! switch to -1/6 in the first/second steps).
HeteroBandwidths rule_of_thumb_hetero(const BidData& data,
                                      double lambda_boundary = 1.0);

//! Second-step bandwidth from the trimmed pseudo-values.
double rule_of_thumb_h_f_hetero(const HeteroFit& fit);

//! Full pipeline: rule-of-thumb first-step bandwidths, fit, then h_f.
HeteroFit fit_gpv_hetero(const BidData& data,
                         double lambda_boundary = 1.0,
                         const KernelSpec& k0 = triweight(),
                         const KernelSpec& k1 = triweight_order4(),
                         const HeteroTrim& trim = {});

} // namespace gpvband
