#pragma once

#include <Eigen/Core>
#include <functional>

namespace gpvband {

//! Compensated (Kahan) accumulator for long sums.
class KahanSum
{
public:
  void add(double x)
  {
    double y = x - comp_;
    double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

//! Gauss-Legendre nodes/weights on [-1, 1].
struct GaussLegendre
{
  Eigen::ArrayXd nodes;
  Eigen::ArrayXd weights;

  explicit GaussLegendre(int n);

  //! integrate f over [a, b]
  template<typename F>
  double integrate(F&& f, double a, double b) const
  {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < nodes.size(); ++i)
      acc += weights[i] * f(mid + half * nodes[i]);
    return half * acc;
  }

  static const GaussLegendre& n64();
  static const GaussLegendre& n128();
};

//! Adaptive Simpson quadrature with absolute tolerance.
double adaptive_simpson(const std::function<double(double)>& f,
                        double a,
                        double b,
                        double tol,
                        int max_depth = 40);

//! Standard normal quantile (Wichura's AS241 rational approximation,
//! accurate to ~1e-15 over (0, 1)).
double normal_quantile(double p);

//! Standard normal CDF.
double normal_cdf(double z);

//! Sample standard deviation with the (n-1) divisor.
double sample_sd(const Eigen::Ref<const Eigen::ArrayXd>& x);

//! inf-type empirical quantile: smallest value z in the sorted sample with
//! ecdf(z) >= tau, i.e. sorted[ceil(tau*n)-1].
double quantile_sorted(const Eigen::Ref<const Eigen::ArrayXd>& sorted,
                       double tau);

} // namespace gpvband
