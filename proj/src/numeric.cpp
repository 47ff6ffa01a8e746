#include "gpvband/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace gpvband {

GaussLegendre::GaussLegendre(int n)
  : nodes(n)
  , weights(n)
{
  // Newton iteration on P_n; nodes symmetric about 0
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15)
        break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    weights[n - 1 - i] = weights[i];
  }
}

const GaussLegendre& GaussLegendre::n64()
{
  static const GaussLegendre g(64);
  return g;
}

const GaussLegendre& GaussLegendre::n128()
{
  static const GaussLegendre g(128);
  return g;
}

namespace {

double simpson(double a, double fa, double b, double fb, double fm)
{
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double simpson_rec(const std::function<double(double)>& f,
                   double a,
                   double fa,
                   double b,
                   double fb,
                   double m,
                   double fm,
                   double whole,
                   double tol,
                   int depth)
{
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

} // namespace

double adaptive_simpson(const std::function<double(double)>& f,
                        double a,
                        double b,
                        double tol,
                        int max_depth)
{
  if (!(b > a))
    return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = simpson(a, fa, b, fb, fm);
  return simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

double normal_quantile(double p)
{
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("normal_quantile: p must be in (0, 1)");

  const double q = p - 0.5;
  double r;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
                 67265.770927008700853) *
                    r +
                45921.953931549871457) *
                   r +
               13731.693765509461125) *
                  r +
              1971.5909503065514427) *
                 r +
             133.14166789178437745) *
                r +
            3.387132872796366608) /
           (((((((5226.495278852545703 * r + 28729.085735721942674) * r +
                 39307.89580009271061) *
                    r +
                21213.794301586595867) *
                   r +
               5394.1960214247511077) *
                  r +
              687.1870074920579083) *
                 r +
             42.313330701600911252) *
                r +
            1.0);
  }
  r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                0.24178072517745061177) *
                   r +
               1.27045825245236838258) *
                  r +
              3.64784832476320460504) *
                 r +
             5.7694972214606914055) *
                r +
            4.6303378461565452959) *
               r +
           1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                0.0151986665636164571966) *
                   r +
               0.14810397642748007459) *
                  r +
              0.68976733498510000455) *
                 r +
             1.6763848301838038494) *
                r +
            2.05319162663775882187) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) *
                    r +
                0.0012426609473880784386) *
                   r +
               0.026532189526576123093) *
                  r +
              0.29656057182850489123) *
                 r +
             1.7848265399172913358) *
                r +
            5.4637849111641143699) *
               r +
           6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) *
                    r +
                1.8463183175100546818e-5) *
                   r +
               7.868691311456132591e-4) *
                  r +
              0.0148753612908506148525) *
                 r +
             0.13692988092273580531) *
                r +
            0.59983220655588793769) *
               r +
           1.0);
  }
  return (q < 0.0) ? -val : val;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double sample_sd(const Eigen::Ref<const Eigen::ArrayXd>& x)
{
  const Eigen::Index n = x.size();
  if (n < 2)
    throw std::invalid_argument("sample_sd: need at least two observations");
  const double mean = x.mean();
  return std::sqrt((x - mean).square().sum() / static_cast<double>(n - 1));
}

double quantile_sorted(const Eigen::Ref<const Eigen::ArrayXd>& sorted,
                       double tau)
{
  const Eigen::Index n = sorted.size();
  if (n == 0)
    throw std::invalid_argument("quantile_sorted: empty sample");
  const auto k = static_cast<Eigen::Index>(
    std::ceil(tau * static_cast<double>(n)));
  return sorted[std::min(std::max<Eigen::Index>(k, 1), n) - 1];
}

} // namespace gpvband
