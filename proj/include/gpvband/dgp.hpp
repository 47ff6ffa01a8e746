#pragma once

#include "gpvband/rng.hpp"

#include <Eigen/Core>
#include <cstdint>
#include <optional>

namespace gpvband {

//! Generative designs for the Monte Carlo experiments:
//!  - power_homogeneous: valuations with CDF F(v) = v^theta on [0, 1],
//!    fixed number of bidders, no covariates;
//!  - power_hetero: covariate X truncated-normal on [0, 2] with mean 1 and
//!    dispersion sigma, conditional valuation CDF F(v|x) = v^x.
enum class Design
{
  power_homogeneous,
  power_hetero,
};

struct DgpSpec
{
  Design model = Design::power_homogeneous;
  double theta = 1.0; //!< power exponent (homogeneous model), > 0
  double sigma = 1.0; //!< covariate dispersion (hetero model), > 0
  int n_bidders = 2;  //!< >= 2
  int n_auctions = 1; //!< >= 1
  std::uint64_t seed = 0;

  void validate() const;
};

//! Estimator-facing view of a dataset: bids, covariates and bidder counts,
//! but never the latent valuations.
struct BidData
{
  Eigen::ArrayXd bids;         //!< flat, auction-major
  Eigen::ArrayXi offsets;      //!< L+1 prefix offsets into `bids`
  Eigen::ArrayXi bidder_counts; //!< per-auction N_l
  Eigen::ArrayXXd covariates;  //!< L x d (zero columns when absent)

  Eigen::Index n_auctions() const { return bidder_counts.size(); }
  Eigen::Index n_obs() const { return bids.size(); }
  int dim_x() const { return static_cast<int>(covariates.cols()); }
  bool homogeneous_counts() const;

  auto auction_bids(Eigen::Index l) const
  {
    return bids.segment(offsets[l], bidder_counts[l]);
  }
};

//! A simulated dataset.  Valuations are retained for oracle checks only;
//! estimation code receives the blinded() view and cannot see them.
struct AuctionSample
{
  BidData data;
  Eigen::ArrayXd valuations; //!< flat, aligned with data.bids; empty for real data

  const BidData& blinded() const { return data; }
};

//! BNE bid for the power family: s(v) = (1 - 1/(theta (n-1) + 1)) v.
double bne_bid(double v, double theta, int n);

AuctionSample sample_homogeneous(const DgpSpec& spec);
AuctionSample sample_hetero(const DgpSpec& spec);

//! Analytic population quantities at a point, used by oracles and the
//! Monte Carlo coverage checks.  For the hetero design the quantities are
//! conditional on x, with bid CDF/PDF given the spec's n_bidders.
struct Truth
{
  double F;
  double f;
  double s;       //!< equilibrium bid s(v)
  double s_prime; //!< ds/dv
  double G_of_bid; //!< G(s(v))
  double g_of_bid; //!< g(s(v))
};

Truth truth(const DgpSpec& spec, double v, std::optional<double> x = {});

//! Density of the covariate X ~ N(1, sigma^2) truncated to [0, 2].
double truncated_normal_pdf(double x, double sigma);

//! Inverse-CDF draw from the truncated normal covariate law.
double truncated_normal_draw(double sigma, Rng& rng);

} // namespace gpvband
