#include "gpvband/dgp.hpp"

#include "gpvband/numeric.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gpvband {

void DgpSpec::validate() const
{
  if (!(theta > 0.0))
    throw std::invalid_argument("DgpSpec: theta must be > 0");
  if (!(sigma > 0.0))
    throw std::invalid_argument("DgpSpec: sigma must be > 0");
  if (n_bidders < 2)
    throw std::invalid_argument("DgpSpec: need at least two bidders");
  if (n_auctions < 1)
    throw std::invalid_argument("DgpSpec: need at least one auction");
}

bool BidData::homogeneous_counts() const
{
  if (bidder_counts.size() == 0)
    return true;
  return (bidder_counts == bidder_counts[0]).all();
}

double bne_bid(double v, double theta, int n)
{
  if (!(v >= 0.0 && v <= 1.0))
    throw std::domain_error("bne_bid: valuation outside [0, 1]");
  return (1.0 - 1.0 / (theta * (n - 1) + 1.0)) * v;
}

namespace {

BidData make_uniform_layout(int L, int N, int d)
{
  BidData data;
  data.bids.resize(static_cast<Eigen::Index>(L) * N);
  data.offsets.resize(L + 1);
  for (int l = 0; l <= L; ++l)
    data.offsets[l] = l * N;
  data.bidder_counts = Eigen::ArrayXi::Constant(L, N);
  data.covariates.resize(L, d);
  return data;
}

} // namespace

AuctionSample sample_homogeneous(const DgpSpec& spec)
{
  spec.validate();
  if (spec.model != Design::power_homogeneous)
    throw std::invalid_argument("sample_homogeneous: wrong design");

  const int L = spec.n_auctions;
  const int N = spec.n_bidders;
  AuctionSample sample;
  sample.data = make_uniform_layout(L, N, 0);
  sample.valuations.resize(static_cast<Eigen::Index>(L) * N);

  const double inv_theta = 1.0 / spec.theta;
  for (int l = 0; l < L; ++l) {
    Rng rng = substream(spec.seed, static_cast<std::uint64_t>(StreamTag::data),
                        static_cast<std::uint64_t>(l));
    for (int i = 0; i < N; ++i) {
      // floor at the smallest positive normal keeps the strictly-positive
      // bid invariant when U^(1/theta) underflows
      const double v = std::max(std::pow(rng.uniform_pos(), inv_theta),
                                std::numeric_limits<double>::min());
      const Eigen::Index at = static_cast<Eigen::Index>(l) * N + i;
      sample.valuations[at] = v;
      sample.data.bids[at] = std::max(bne_bid(v, spec.theta, N),
                                      std::numeric_limits<double>::min());
    }
  }
  return sample;
}

double truncated_normal_pdf(double x, double sigma)
{
  if (x < 0.0 || x > 2.0)
    return 0.0;
  const double z = (x - 1.0) / sigma;
  const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  const double mass =
    normal_cdf(1.0 / sigma) - normal_cdf(-1.0 / sigma);
  return phi / (sigma * mass);
}

double truncated_normal_draw(double sigma, Rng& rng)
{
  const double lo = normal_cdf(-1.0 / sigma);
  const double hi = normal_cdf(1.0 / sigma);
  const double u = rng.uniform_pos();
  const double p = lo + u * (hi - lo);
  double x = 1.0 + sigma * normal_quantile(p);
  // inverse CDF keeps x inside [0, 2] up to rounding
  return std::min(std::max(x, 0.0), 2.0);
}

AuctionSample sample_hetero(const DgpSpec& spec)
{
  spec.validate();
  if (spec.model != Design::power_hetero)
    throw std::invalid_argument("sample_hetero: wrong design");

  const int L = spec.n_auctions;
  const int N = spec.n_bidders;
  AuctionSample sample;
  sample.data = make_uniform_layout(L, N, 1);
  sample.valuations.resize(static_cast<Eigen::Index>(L) * N);

  for (int l = 0; l < L; ++l) {
    Rng rng = substream(spec.seed, static_cast<std::uint64_t>(StreamTag::data),
                        static_cast<std::uint64_t>(l));
    const double x = truncated_normal_draw(spec.sigma, rng);
    sample.data.covariates(l, 0) = x;
    const double slope = 1.0 - 1.0 / (x * (N - 1) + 1.0);
    for (int i = 0; i < N; ++i) {
      const double v = std::max(std::pow(rng.uniform_pos(), 1.0 / x),
                                std::numeric_limits<double>::min());
      const Eigen::Index at = static_cast<Eigen::Index>(l) * N + i;
      sample.valuations[at] = v;
      sample.data.bids[at] = std::max(slope * v,
                                      std::numeric_limits<double>::min());
    }
  }
  return sample;
}

Truth truth(const DgpSpec& spec, double v, std::optional<double> x)
{
  spec.validate();
  double exponent;
  if (spec.model == Design::power_homogeneous) {
    if (x.has_value())
      throw std::invalid_argument("truth: homogeneous design takes no covariate");
    exponent = spec.theta;
  } else {
    if (!x.has_value())
      throw std::invalid_argument("truth: hetero design requires a covariate");
    if (*x < 0.0 || *x > 2.0)
      throw std::domain_error("truth: covariate outside [0, 2]");
    exponent = *x;
  }
  if (!(v >= 0.0 && v <= 1.0))
    throw std::domain_error("truth: valuation outside [0, 1]");

  const int n = spec.n_bidders;
  Truth t;
  t.F = std::pow(v, exponent);
  t.f = exponent * std::pow(v, exponent - 1.0);
  const double slope = 1.0 - 1.0 / (exponent * (n - 1) + 1.0);
  t.s = slope * v;
  t.s_prime = slope;
  // bid CDF via G(s(v)) = F(v) and the density identity f = g(s(v)) s'(v)
  t.G_of_bid = t.F;
  t.g_of_bid = t.f / slope;
  return t;
}

} // namespace gpvband
