#include "gpvband/oracles.hpp"

#include "gpvband/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace gpvband {
namespace oracles {

double convolution_constant(double s_prime,
                            const KernelSpec& k_f,
                            const KernelSpec& k_g)
{
  if (!(s_prime > 0.0))
    throw std::invalid_argument("convolution_constant: s' must be positive");

  const auto& gl = GaussLegendre::n128();
  const auto inner = [&](double w) {
    return gl.integrate(
      [&](double u) { return k_f.deriv(u) * k_g.eval(w - s_prime * u); },
      -1.0, 1.0);
  };
  const auto integrand = [&](double w) {
    const double i = inner(w);
    return i * i;
  };
  // integrand is piecewise smooth with kinks where the kernel windows
  // slide past each other; splitting there keeps the adaptive rule honest
  double lo = -1.0 - s_prime;
  double breaks[] = { -std::abs(1.0 - s_prime), std::abs(1.0 - s_prime),
                      1.0 + s_prime };
  double total = 0.0;
  for (double hi : breaks) {
    total += adaptive_simpson(integrand, lo, hi, 1e-9);
    lo = hi;
  }
  return total;
}

double analytic_variance(const DgpSpec& spec,
                         double v,
                         const KernelSpec& k_f,
                         const KernelSpec& k_g)
{
  if (!(v > 0.0 && v < 1.0))
    throw std::domain_error("analytic_variance: v must be interior to (0, 1)");
  if (spec.model != Design::power_homogeneous)
    throw std::invalid_argument(
      "analytic_variance: closed form available for the homogeneous design "
      "only");
  const Truth t = truth(spec, v);
  const int n = spec.n_bidders;
  const double pref = 1.0 / (n * static_cast<double>(n - 1) * (n - 1));
  const double g3 = t.g_of_bid * t.g_of_bid * t.g_of_bid;
  return pref * (t.F * t.F * t.f * t.f / g3) *
         convolution_constant(t.s_prime, k_f, k_g);
}

double ratio_qb_over_gpv(double theta, int n, const KernelSpec& k)
{
  if (k.order != 2)
    throw std::invalid_argument(
      "ratio_qb_over_gpv: the ratio result requires a second-order kernel");
  if (!(theta > 0.0) || n < 2)
    throw std::invalid_argument("ratio_qb_over_gpv: invalid design");
  const double s_prime = 1.0 - 1.0 / (theta * (n - 1) + 1.0);
  return s_prime * s_prime * kernel_deriv_sq_integral(k) /
         convolution_constant(s_prime, k, k);
}

double analytic_xi(double b, double theta, int n)
{
  const double s1 = 1.0 - 1.0 / (theta * (n - 1) + 1.0);
  if (!(b >= 0.0 && b <= s1 * (1.0 + 1e-12)))
    throw std::domain_error("analytic_xi: bid outside [0, s(1)]");
  return b * (1.0 + 1.0 / (theta * (n - 1)));
}

double kernel_deriv_sq_integral(const KernelSpec& k)
{
  return GaussLegendre::n64().integrate(
    [&](double u) {
      const double d = k.deriv(u);
      return d * d;
    },
    -1.0, 1.0);
}

} // namespace oracles
} // namespace gpvband
