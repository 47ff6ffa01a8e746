#include "gpvband/kernels.hpp"

#include "gpvband/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace gpvband {

namespace {

double tw_eval(double u)
{
  if (std::abs(u) > 1.0)
    return 0.0;
  const double t = 1.0 - u * u;
  return (35.0 / 32.0) * t * t * t;
}

double tw_deriv(double u)
{
  if (std::abs(u) > 1.0)
    return 0.0;
  const double t = 1.0 - u * u;
  return -(105.0 / 16.0) * u * t * t;
}

// (a + b u^2)(1-u^2)^3 with (a, b) solving  int K = 1, int u^2 K = 0:
// a = 945/512, b = -3465/512, i.e. (315/512)(3 - 11 u^2)(1-u^2)^3
constexpr double kTw4A = 945.0 / 512.0;
constexpr double kTw4B = -3465.0 / 512.0;

double tw4_eval(double u)
{
  if (std::abs(u) > 1.0)
    return 0.0;
  const double u2 = u * u;
  const double t = 1.0 - u2;
  return (kTw4A + kTw4B * u2) * t * t * t;
}

double tw4_deriv(double u)
{
  if (std::abs(u) > 1.0)
    return 0.0;
  const double u2 = u * u;
  const double t = 1.0 - u2;
  return 2.0 * kTw4B * u * t * t * t -
         6.0 * (kTw4A + kTw4B * u2) * u * t * t;
}

void verify(const KernelSpec& k)
{
  if (std::abs(kernel_moment(k, 0) - 1.0) > 1e-9)
    throw std::logic_error(k.name + ": kernel does not integrate to one");
  for (int p = 1; p < k.order; ++p) {
    if (std::abs(kernel_moment(k, p)) > 1e-9)
      throw std::logic_error(k.name + ": moment " + std::to_string(p) +
                             " does not vanish");
  }
  if (std::abs(k.eval(1.0)) > 0.0 || std::abs(k.eval(-1.0)) > 0.0 ||
      std::abs(k.deriv(1.0)) > 0.0 || std::abs(k.deriv(-1.0)) > 0.0)
    throw std::logic_error(k.name + ": kernel must vanish smoothly at +-1");
}

} // namespace

const KernelSpec& triweight()
{
  static const KernelSpec k = [] {
    KernelSpec spec{ "triweight", 2, &tw_eval, &tw_deriv, 1.0 };
    verify(spec);
    return spec;
  }();
  return k;
}

const KernelSpec& triweight_order4()
{
  static const KernelSpec k = [] {
    KernelSpec spec{ "triweight_order4", 4, &tw4_eval, &tw4_deriv, 1.0 };
    verify(spec);
    return spec;
  }();
  return k;
}

double kernel_moment(const KernelSpec& k, int p)
{
  if (p < 0 || p > 8)
    throw std::invalid_argument("kernel_moment: p must be in [0, 8]");
  return GaussLegendre::n64().integrate(
    [&](double u) { return std::pow(u, p) * k.eval(u); }, -1.0, 1.0);
}

ProductKernel::ProductKernel(const KernelSpec& k, int dim)
  : k_(&k)
  , dim_(dim)
{
  if (dim < 1)
    throw std::invalid_argument("ProductKernel: dim must be >= 1");
}

double ProductKernel::operator()(
  const Eigen::Ref<const Eigen::ArrayXd>& point) const
{
  if (point.size() != dim_)
    throw std::invalid_argument("ProductKernel: dimension mismatch");
  double out = 1.0;
  for (Eigen::Index i = 0; i < point.size(); ++i)
    out *= k_->eval(point[i]);
  return out;
}

} // namespace gpvband
