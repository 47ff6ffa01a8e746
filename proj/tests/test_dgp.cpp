#include "gpvband/dgp.hpp"

#include "gpvband/numeric.hpp"
#include "gpvband/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace gpvband;

TEST_CASE("bne bid closed form")
{
  CHECK(bne_bid(0.5, 1.0, 2) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(bne_bid(0.0, 2.3, 5) == 0.0);
  CHECK(bne_bid(1.0, 2.0, 7) == doctest::Approx(12.0 / 13.0).epsilon(1e-15));
  CHECK_THROWS_AS(bne_bid(1.5, 1.0, 2), std::domain_error);
}

TEST_CASE("bne bid strictly increasing in v")
{
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const double theta = 0.4 + 3.0 * rng.uniform();
    const int n = 2 + static_cast<int>(rng.uniform_index(6));
    double v1 = rng.uniform(), v2 = rng.uniform();
    if (v1 > v2)
      std::swap(v1, v2);
    if (v1 == v2)
      continue;
    CHECK(bne_bid(v1, theta, n) < bne_bid(v2, theta, n));
  }
}

TEST_CASE("homogeneous sampler: uniform case")
{
  DgpSpec spec;
  spec.theta = 1.0;
  spec.n_bidders = 2;
  spec.n_auctions = 500000;
  spec.seed = 123;
  const AuctionSample s = sample_homogeneous(spec);
  REQUIRE(s.data.n_obs() == 1000000);
  CHECK(s.valuations.mean() == doctest::Approx(0.5).epsilon(0.002 / 0.5));
  // bids are v/2 exactly
  for (Eigen::Index i = 0; i < 100; ++i)
    CHECK(s.data.bids[i] == doctest::Approx(0.5 * s.valuations[i]));
  CHECK((s.data.bids > 0.0).all());
}

TEST_CASE("homogeneous sampler: theta = 2 mean")
{
  DgpSpec spec;
  spec.theta = 2.0;
  spec.n_bidders = 2;
  spec.n_auctions = 500000;
  spec.seed = 7;
  const AuctionSample s = sample_homogeneous(spec);
  // E V = int v 2v dv = 2/3
  CHECK(s.valuations.mean() == doctest::Approx(2.0 / 3.0).epsilon(0.002));
}

TEST_CASE("samplers are deterministic given the seed")
{
  DgpSpec spec;
  spec.theta = 1.4;
  spec.n_bidders = 3;
  spec.n_auctions = 50;
  spec.seed = 99;
  const AuctionSample a = sample_homogeneous(spec);
  const AuctionSample b = sample_homogeneous(spec);
  CHECK((a.data.bids == b.data.bids).all());

  DgpSpec h = spec;
  h.model = Design::power_hetero;
  h.sigma = 0.8;
  const AuctionSample c = sample_hetero(h);
  const AuctionSample d = sample_hetero(h);
  CHECK((c.data.bids == d.data.bids).all());
  CHECK((c.data.covariates == d.data.covariates).all());
}

TEST_CASE("hetero sampler: covariate law")
{
  DgpSpec spec;
  spec.model = Design::power_hetero;
  spec.sigma = 1.0;
  spec.n_bidders = 2;
  spec.n_auctions = 1000000;
  spec.seed = 2024;
  const AuctionSample s = sample_hetero(spec);
  const Eigen::ArrayXd x = s.data.covariates.col(0);
  CHECK(x.mean() == doctest::Approx(1.0).epsilon(0.003));
  CHECK((x >= 0.0).all());
  CHECK((x <= 2.0).all());
  CHECK((s.data.bids > 0.0).all());
}

TEST_CASE("hetero valuations at x = 1 are uniform")
{
  // Kolmogorov distance of V = U^(1/1) draws from the uniform CDF
  DgpSpec spec;
  spec.model = Design::power_hetero;
  spec.sigma = 1.0;
  spec.n_bidders = 2;
  spec.n_auctions = 1;
  Eigen::ArrayXd draws(100000);
  Rng rng(5);
  for (Eigen::Index i = 0; i < draws.size(); ++i)
    draws[i] = std::pow(rng.uniform_pos(), 1.0 / 1.0);
  std::sort(draws.data(), draws.data() + draws.size());
  double ks = 0.0;
  const auto n = static_cast<double>(draws.size());
  for (Eigen::Index i = 0; i < draws.size(); ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    ks = std::max(ks, std::max(std::abs(draws[i] - lo),
                               std::abs(draws[i] - hi)));
  }
  CHECK(ks < 0.01);
}

TEST_CASE("truncated normal density integrates to one")
{
  for (double sigma : { 0.8, 1.0, 1.2 }) {
    const double mass = adaptive_simpson(
      [&](double x) { return truncated_normal_pdf(x, sigma); }, 0.0, 2.0,
      1e-10);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("truth matches the closed forms")
{
  DgpSpec spec;
  spec.theta = 1.0;
  spec.n_bidders = 2;
  spec.n_auctions = 1;
  const Truth t = truth(spec, 0.5);
  CHECK(t.F == doctest::Approx(0.5));
  CHECK(t.f == doctest::Approx(1.0));
  CHECK(t.s == doctest::Approx(0.25));
  CHECK(t.s_prime == doctest::Approx(0.5));
  CHECK(t.G_of_bid == doctest::Approx(0.5));
  CHECK(t.g_of_bid == doctest::Approx(2.0));

  DgpSpec spec2 = spec;
  spec2.theta = 2.0;
  const Truth t2 = truth(spec2, 0.5);
  CHECK(t2.f == doctest::Approx(1.0));
  CHECK(t2.F == doctest::Approx(0.25));

  CHECK_THROWS_AS(truth(spec, 1.5), std::domain_error);
}

TEST_CASE("density identity f = g(s(v)) s'(v)")
{
  Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    DgpSpec spec;
    spec.theta = 0.5 + 3.0 * rng.uniform();
    spec.n_bidders = 2 + static_cast<int>(rng.uniform_index(6));
    spec.n_auctions = 1;
    const double v = 0.05 + 0.9 * rng.uniform();
    const Truth t = truth(spec, v);
    CHECK(std::abs(t.g_of_bid * t.s_prime - t.f) <= 1e-12 * std::abs(t.f));
  }
}

TEST_CASE("hetero truth at the covariate point")
{
  DgpSpec spec;
  spec.model = Design::power_hetero;
  spec.sigma = 1.0;
  spec.n_bidders = 5;
  spec.n_auctions = 1;
  const Truth t = truth(spec, 0.5, 1.0);
  CHECK(t.f == doctest::Approx(1.0));
  CHECK(t.s_prime == doctest::Approx(0.8));
  CHECK_THROWS_AS(truth(spec, 0.5), std::invalid_argument);
}

TEST_CASE("composing the analytic inverse with the bid map recovers v")
{
  Rng rng(1234);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform();
    const double theta = 0.4 + 3.0 * rng.uniform();
    const int n = 2 + static_cast<int>(rng.uniform_index(7));
    const double b = bne_bid(v, theta, n);
    CHECK(std::abs(oracles::analytic_xi(b, theta, n) - v) <= 1e-12);
  }
}

TEST_CASE("bid density stays away from zero on inner intervals")
{
  DgpSpec spec;
  spec.theta = 1.5;
  spec.n_bidders = 4;
  spec.n_auctions = 200;
  spec.seed = 88;
  const auto sample = sample_homogeneous(spec);
  const double top = bne_bid(1.0, spec.theta, spec.n_bidders);
  for (Eigen::Index i = 0; i < sample.data.n_obs(); ++i) {
    const double b = sample.data.bids[i];
    if (b < 0.1 * top || b > 0.9 * top)
      continue;
    // invert the bid to evaluate g at an inner point
    const double v = oracles::analytic_xi(b, spec.theta, spec.n_bidders);
    CHECK(truth(spec, v).g_of_bid > 0.05);
  }
}

TEST_CASE("spec validation")
{
  DgpSpec bad;
  bad.theta = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.theta = 1.0;
  bad.n_bidders = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
