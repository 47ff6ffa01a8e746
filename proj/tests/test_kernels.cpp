#include "gpvband/kernels.hpp"
#include "gpvband/numeric.hpp"

#include <doctest.h>

#include <cmath>

using namespace gpvband;

TEST_CASE("triweight moments")
{
  const auto& k = triweight();
  CHECK(kernel_moment(k, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(kernel_moment(k, 1)) < 1e-10);
  CHECK(std::abs(kernel_moment(k, 3)) < 1e-10);
  // second moment of (35/32)(1-u^2)^3 is 1/9 (exact piecewise-polynomial
  // integration)
  CHECK(kernel_moment(k, 2) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  // normalization constant c = 1 / int (1-u^2)^3 du = 35/32
  CHECK(k.eval(0.0) == doctest::Approx(35.0 / 32.0));
}

TEST_CASE("fourth-order triweight moment constraints")
{
  const auto& k = triweight_order4();
  CHECK(kernel_moment(k, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(kernel_moment(k, 2)) < 1e-9);
  CHECK(std::abs(kernel_moment(k, 1)) < 1e-10);
  CHECK(std::abs(kernel_moment(k, 3)) < 1e-10);
  // fourth moment is -3/143, nonzero by construction
  CHECK(kernel_moment(k, 4) == doctest::Approx(-3.0 / 143.0).epsilon(1e-9));
  // polynomial coefficients (a + b u^2)(1-u^2)^3 solving the 2x2 moment
  // system: a = 945/512, b = -3465/512
  CHECK(k.eval(0.0) == doctest::Approx(945.0 / 512.0));
}

TEST_CASE("derivatives match central finite differences")
{
  const double eps = 1e-6;
  for (const KernelSpec& k : { triweight(), triweight_order4() }) {
    for (double u = -0.999; u < 1.0; u += 0.0703) {
      const double fd = (k.eval(u + eps) - k.eval(u - eps)) / (2.0 * eps);
      CHECK(k.deriv(u) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("smooth vanishing at the support edge")
{
  for (const KernelSpec& k : { triweight(), triweight_order4() }) {
    CHECK(k.eval(1.0) == 0.0);
    CHECK(k.eval(-1.0) == 0.0);
    CHECK(k.deriv(1.0) == 0.0);
    CHECK(k.deriv(-1.0) == 0.0);
    CHECK(k.eval(1.5) == 0.0);
    CHECK(k.deriv(-2.0) == 0.0);
  }
}

TEST_CASE("kernel symmetry")
{
  for (const KernelSpec& k : { triweight(), triweight_order4() })
    for (double u = 0.05; u < 1.0; u += 0.1)
      CHECK(k.eval(u) == doctest::Approx(k.eval(-u)).epsilon(1e-15));
}

TEST_CASE("product kernel")
{
  ProductKernel pk1(triweight(), 1);
  Eigen::ArrayXd p1(1);
  p1 << 0.3;
  CHECK(pk1(p1) == doctest::Approx(triweight().eval(0.3)));

  ProductKernel pk2(triweight(), 2);
  Eigen::ArrayXd origin(2);
  origin << 0.0, 0.0;
  const double k0 = triweight().eval(0.0);
  CHECK(pk2(origin) == doctest::Approx(k0 * k0));

  Eigen::ArrayXd outside(2);
  outside << 1.5, 0.0;
  CHECK(pk2(outside) == 0.0);

  Eigen::ArrayXd wrong(3);
  wrong << 0.0, 0.0, 0.0;
  CHECK_THROWS_AS(pk2(wrong), std::invalid_argument);
}

TEST_CASE("kernel_moment rejects large p")
{
  CHECK_THROWS_AS(kernel_moment(triweight(), 9), std::invalid_argument);
}
