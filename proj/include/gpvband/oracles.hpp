#pragma once

#include "gpvband/dgp.hpp"
#include "gpvband/kernels.hpp"

namespace gpvband {
namespace oracles {

//! The convolution constant of the two-step estimator's asymptotic
//! variance:
//!   c(s') = int { int Kf'(u) Kg(w - s' u) du }^2 dw.
//! Inner integral by 128-node Gauss-Legendre on [-1, 1], outer by adaptive
//! Simpson on [-1 - s', 1 + s'] with absolute tolerance 1e-9.
double convolution_constant(double s_prime,
                            const KernelSpec& k_f,
                            const KernelSpec& k_g);

//! Closed-form asymptotic variance of the two-step density estimator at v:
//!   (1 / (N (N-1)^2)) (F(v)^2 f(v)^2 / g(s(v))^3) c(s'(v)).
double analytic_variance(const DgpSpec& spec,
                         double v,
                         const KernelSpec& k_f,
                         const KernelSpec& k_g);

//! Asymptotic-variance ratio of the quantile-based estimator over the
//! two-step estimator for the power family, both using the same
//! second-order kernel k:
//!   ratio = s'^2 int K'(u)^2 du / c(s'),   s' = 1 - 1/(theta (n-1) + 1).
//! Always >= 1.
double ratio_qb_over_gpv(double theta, int n, const KernelSpec& k);

//! Exact inverse bidding strategy for the power family:
//! xi(b) = b (1 + 1/(theta (n-1))).
double analytic_xi(double b, double theta, int n);

//! int K'(u)^2 du by quadrature.
double kernel_deriv_sq_integral(const KernelSpec& k);

} // namespace oracles
} // namespace gpvband
