#pragma once

#include <Eigen/Core>
#include <string>

namespace gpvband {

//! A symmetric kernel with compact support [-1, 1], its analytic derivative
//! and declared moment order (index of the first non-vanishing non-trivial
//! moment).  Immutable; freely shared across threads.
struct KernelSpec
{
  std::string name;
  int order = 2;
  double (*eval)(double) = nullptr;
  double (*deriv)(double) = nullptr;
  double support_radius = 1.0;

  double operator()(double u) const { return eval(u); }
};

//! Second-order triweight kernel (35/32)(1-u^2)^3 on [-1, 1].
const KernelSpec& triweight();

//! Fourth-order triweight kernel (315/512)(3-11u^2)(1-u^2)^3 on [-1, 1].
//! The polynomial coefficients solve the two moment constraints
//! (unit mass, vanishing second moment); they are re-verified by
//! quadrature the first time the kernel is constructed.
const KernelSpec& triweight_order4();

//! p-th moment of a kernel by 64-node Gauss-Legendre quadrature; exact for
//! the polynomial kernels above (p <= 8).
double kernel_moment(const KernelSpec& k, int p);

//! Product kernel over `dim` coordinates.
class ProductKernel
{
public:
  ProductKernel(const KernelSpec& k, int dim);

  double operator()(const Eigen::Ref<const Eigen::ArrayXd>& point) const;

  int dim() const { return dim_; }

private:
  const KernelSpec* k_;
  int dim_;
};

} // namespace gpvband
