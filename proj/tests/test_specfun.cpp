#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/airy.hpp>

#include "pxap/specfun.hpp"

using namespace pxap::specfun;

namespace {

constexpr double kPi = std::numbers::pi;

// e^{x^2} erfc(x) = E_{1/2}(-x); asymptotic form once the product overflows.
double scaled_erfc(double x) {
  if (x < 20.0) return std::exp(x * x) * std::erfc(x);
  const double y = 1.0 / (x * x);
  return (1.0 - 0.5 * y + 0.75 * y * y - 1.875 * y * y * y) / (x * std::sqrt(kPi));
}

// Wright series in long double with 1/Gamma of a negative argument taken
// straight from tgammal.
double wright_reference(double g, double z) {
  long double sum = 0.0L, fact = 1.0L;
  for (int n = 0; n < 80; ++n) {
    if (n > 0) fact *= n;
    const long double arg = 1.0L - g - static_cast<long double>(g) * n;
    const long double rg = (arg <= 0 && arg == std::nearbyint(arg)) ? 0.0L : 1.0L / std::tgamma(arg);
    sum += std::pow(-static_cast<long double>(z), n) / fact * rg;
  }
  return static_cast<double>(sum);
}

double laplace_of_phi(double g, double lambda) {
  boost::math::quadrature::exp_sinh<double> rule;
  return rule.integrate([&](double s) { return std::exp(-lambda * s) * wright_phi(g, s); }, 1e-12);
}

}  // namespace

TEST(GammaKernel, Examples) {
  EXPECT_EQ(gamma_kernel(1.0, 0.37), 1.0);
  EXPECT_NEAR(gamma_kernel(2.0, 3.0), 3.0, 1e-15);
  EXPECT_NEAR(gamma_kernel(0.5, 1.0), 1.0 / std::sqrt(kPi), 1e-15);
  EXPECT_NEAR(gamma_kernel(0.5, 1.0), 0.564190, 1e-6);
  EXPECT_THROW(gamma_kernel(0.0, 1.0), DomainError);
  EXPECT_THROW(gamma_kernel(0.5, 0.0), DomainError);
}

TEST(ReciprocalGamma, PolesAndReflection) {
  EXPECT_EQ(reciprocal_gamma(0.0), 0.0);
  EXPECT_EQ(reciprocal_gamma(-3.0), 0.0);
  EXPECT_NEAR(reciprocal_gamma(-0.5), -1.0 / (2.0 * std::sqrt(kPi)), 1e-15);
  EXPECT_NEAR(reciprocal_gamma(5.0), 1.0 / 24.0, 1e-16);
}

TEST(MittagLeffler, ClassicalCases) {
  EXPECT_NEAR(mittag_leffler(1.0, 1.0, 1.0), std::numbers::e, 1e-10);
  EXPECT_NEAR(mittag_leffler(2.0, 1.0, -1.0), std::cos(1.0), 1e-10);
  EXPECT_NEAR(mittag_leffler(0.5, -1.0), 0.427584, 1e-6);
  EXPECT_NEAR(mittag_leffler(0.5, -1.0), std::exp(1.0) * std::erfc(1.0), 1e-13);
  EXPECT_NEAR(mittag_leffler(2.0, 2.0, -4.0), std::sin(2.0) / 2.0, 1e-13);
  EXPECT_NEAR(mittag_leffler(1.0, 2.0, 0.5), (std::exp(0.5) - 1.0) / 0.5, 1e-13);
  EXPECT_EQ(mittag_leffler(0.7, 1.3, 0.0), reciprocal_gamma(1.3));
}

TEST(MittagLeffler, NegativeAxisFarOut) {
  for (double x : {2.0, 5.0, 10.0, 30.0, 100.0, 1e3}) {
    const double ref = scaled_erfc(x);
    EXPECT_NEAR(mittag_leffler(0.5, -x), ref, 1e-10 * ref) << x;
  }
  EXPECT_NEAR(mittag_leffler(1.0, -50.0), std::exp(-50.0), 1e-30);
  EXPECT_NEAR(mittag_leffler(2.0, 1.0, -400.0), std::cos(20.0), 1e-12);
  EXPECT_NEAR(mittag_leffler(1.0, 2.0, -20.0), (1.0 - std::exp(-20.0)) / 20.0, 1e-13);
}

TEST(MittagLeffler, ComplexArgument) {
  const std::complex<double> z(0.0, 1.3);
  const auto v = mittag_leffler(1.0, 1.0, z);
  EXPECT_NEAR(v.real(), std::cos(1.3), 1e-13);
  EXPECT_NEAR(v.imag(), std::sin(1.3), 1e-13);
}

TEST(MittagLeffler, DomainErrors) {
  EXPECT_THROW(mittag_leffler(0.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(mittag_leffler(2.5, 1.0, 1.0), DomainError);
  EXPECT_THROW(mittag_leffler(0.5, 0.0, 1.0), DomainError);
  EXPECT_THROW(mittag_leffler(0.5, 1.0, NAN), DomainError);
  EXPECT_THROW(mittag_leffler(0.5, 1.0, std::complex<double>(0.0, 50.0)), DomainError);
}

TEST(WrightPhi, HalfIsGaussian) {
  EXPECT_NEAR(wright_phi(0.5, 0.0), 0.564190, 1e-6);
  EXPECT_NEAR(wright_phi(0.5, 1.0), 0.439391, 1e-6);
  for (int i = 0; i <= 200; ++i) {
    const double z = 0.05 * i;
    EXPECT_NEAR(wright_phi(0.5, z), std::exp(-z * z / 4.0) / std::sqrt(kPi), 1e-8) << z;
  }
}

TEST(WrightPhi, ThirdIsAiry) {
  const double c = std::cbrt(3.0);
  for (double z : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    const double ref = c * c * boost::math::airy_ai(z / c);
    EXPECT_NEAR(wright_phi(1.0 / 3.0, z), ref, 1e-9 * (1.0 + ref)) << z;
  }
}

TEST(WrightPhi, AgreesWithLongDoubleSeries) {
  EXPECT_NEAR(wright_phi(0.3, 2.0), wright_reference(0.3, 2.0), 1e-11);
  for (double g : {0.2, 0.4, 0.6, 0.8})
    for (double z : {0.1, 0.7, 1.5})
      EXPECT_NEAR(wright_phi(g, z), wright_reference(g, z), 1e-11) << g << " " << z;
}

TEST(WrightPhi, UnderflowAndErrors) {
  const auto v = wright_phi_eval(0.5, 81.0);
  EXPECT_TRUE(v.underflow);
  EXPECT_EQ(v.value, 0.0);
  EXPECT_FALSE(wright_phi_eval(0.5, 79.0).underflow);
  EXPECT_THROW(wright_phi(0.0, 1.0), DomainError);
  EXPECT_THROW(wright_phi(1.0, 1.0), DomainError);
  EXPECT_THROW(wright_phi(0.5, -1.0), DomainError);
}

TEST(WrightMoment, Examples) {
  for (double g : {0.2, 0.5, 0.8}) EXPECT_NEAR(wright_moment(g, 0.0).value, 1.0, 1e-8) << g;
  const auto m1 = wright_moment(0.5, 1.0);
  EXPECT_NEAR(m1.value, 2.0 / std::sqrt(kPi), 1e-8);
  EXPECT_NEAR(m1.value, 1.128379, 1e-6);
  EXPECT_NEAR(m1.closed_form, 1.128379, 1e-6);
  EXPECT_NEAR(wright_moment(0.5, 2.0).value, 2.0, 1e-8);
  EXPECT_THROW(wright_moment(0.5, -1.0), DomainError);
}

TEST(WrightMoment, LaplaceTransformIsMittagLeffler) {
  for (double g : {0.3, 0.5, 0.7})
    for (double lam : {0.5, 1.0, 2.0})
      EXPECT_NEAR(laplace_of_phi(g, lam), mittag_leffler(g, -lam), 1e-8) << g << " " << lam;
}

TEST(SpecfunProperty, PhiIsNonnegative) {
  for (int k = 1; k <= 9; ++k) {
    const double g = 0.1 * k;
    const double hi = 40.0 / g;
    for (int i = 0; i <= 400; ++i) EXPECT_GE(wright_phi(g, hi * i / 400.0), 0.0) << g;
  }
}

TEST(SpecfunProperty, PhiIntegratesToOne) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  boost::math::quadrature::exp_sinh<double> rule;
  for (int i = 0; i < 10; ++i) {
    const double g = u(rng);
    EXPECT_NEAR(rule.integrate([&](double s) { return wright_phi(g, s); }, 1e-12), 1.0, 1e-7) << g;
  }
}

TEST(SpecfunProperty, NegativeAxisIsCompletelyMonotone) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> a(0.1, 1.0), x(0.0, 30.0);
  for (int i = 0; i < 200; ++i) {
    const double alpha = a(rng), x1 = x(rng), x2 = x1 + 0.5;
    const double e1 = mittag_leffler(alpha, -x1), e2 = mittag_leffler(alpha, -x2);
    EXPECT_GT(e2, 0.0) << alpha << " " << x2;
    EXPECT_LT(e2, e1) << alpha << " " << x1;
  }
}

TEST(SpecfunProperty, SeriesAndIntegralAgree) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> a(0.2, 0.95), b(0.5, 1.5), x(0.5, 4.0);
  MittagLefflerOptions force_integral;
  force_integral.z_switch = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double alpha = a(rng), beta = std::min(b(rng), alpha + 0.9), z = -x(rng);
    EXPECT_NEAR(mittag_leffler(alpha, beta, z), mittag_leffler(alpha, beta, z, force_integral), 1e-10)
        << alpha << " " << beta << " " << z;
  }
}
