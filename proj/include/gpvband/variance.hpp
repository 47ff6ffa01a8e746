#pragma once

#include "gpvband/estimator.hpp"
#include "gpvband/hetero.hpp"

#include <map>

namespace gpvband {

struct VarianceEstimate
{
  double v = 0.0;
  double value = 0.0; //!< can be slightly negative in finite samples
  long long n_terms_visited = 0;
  bool empty_active_set = false; //!< no kept pseudo-value near v
};

//! Sample-analogue asymptotic-variance estimator (triple sum over distinct
//! observation triples) for the homogeneous model, pruned by the compact
//! kernel supports.  All kernel arguments are scaled by the second-step
//! bandwidth h_f, so the estimate targets the closed-form variance
//! directly; the first-step bandwidth enters only through G-hat/g-hat and
//! the trimming stored in the fit.
VarianceEstimate variance_hat(const GpvFit& fit,
                              double v,
                              const KernelSpec& k_f,
                              const KernelSpec& k_g);

//! Reference implementation: literal loop over all ordered distinct
//! triples.  O(n^3); for tests and cross-checks only.
VarianceEstimate variance_hat_brute(const GpvFit& fit,
                                    double v,
                                    const KernelSpec& k_f,
                                    const KernelSpec& k_g);

//! Conditional version for the model with covariates: triple sum over
//! distinct auction indices restricted to N = n.
VarianceEstimate variance_hat_hetero(const HeteroFit& fit,
                                     double v,
                                     const Eigen::Ref<const Eigen::ArrayXd>& x,
                                     int n);

VarianceEstimate variance_hat_hetero_brute(
  const HeteroFit& fit,
  double v,
  const Eigen::Ref<const Eigen::ArrayXd>& x,
  int n);

//! Plug-in mixture over bidder counts: sum_n pi(n|x)^2 V(v|x,n).
double variance_hat_mixture(const std::map<int, VarianceEstimate>& per_n,
                            const std::map<int, double>& pi_hat);

} // namespace gpvband
