#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>
#include <string>

#include "pxap/modular.hpp"

using namespace pxap;

namespace {

// Independent oracle: (int_a^b |f|^p)^(1/p) by 61-point adaptive Gauss-Kronrod.
double lp_norm(const std::function<double(double)>& f, double p, double a, double b) {
  auto g = [&](double x) { return std::pow(std::abs(f(x)), p); };
  const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, a, b, 15, 1e-14);
  return std::pow(v, 1.0 / p);
}

struct RandomFunction {
  std::string text;
  std::function<double(double)> fn;
};

// a + b sin(k x) + c x^2 with random coefficients.
RandomFunction random_function(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-2.0, 2.0), freq(0.5, 6.0);
  const double a = coef(rng), b = coef(rng), k = freq(rng), c = coef(rng);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.17g+(%.17g)*sin(%.17g*x)+(%.17g)*x^2", a, b, k, c);
  return {buf, [=](double x) { return a + b * std::sin(k * x) + c * x * x; }};
}

const VariableExponent& log_exponent() {
  static const auto p = VariableExponent::parse("log_exponent");
  return p;
}

}  // namespace

TEST(Phi, ThreeCases) {
  EXPECT_EQ(phi(2.0, 3.0), 9.0);
  EXPECT_EQ(phi(kInf, 0.5), 0.0);
  EXPECT_EQ(phi(kInf, 1.0), 0.0);
  EXPECT_TRUE(std::isinf(phi(kInf, 2.0)));
  EXPECT_EQ(phi(1.5, 0.0), 0.0);
  EXPECT_THROW(phi(2.0, -1.0), std::domain_error);
}

TEST(Modular, UnitFunctionLogExponent) {
  const auto r = modular(ScalarFunction::expression("1"), log_exponent(), {0.0, 1.0});
  EXPECT_NEAR(r.value, 1.0, 1e-10);
  EXPECT_FALSE(r.diverged);
}

TEST(Modular, TwoLogExponent) {
  const auto r = modular(ScalarFunction::expression("2"), log_exponent(), {0.0, 1.0});
  EXPECT_NEAR(r.value, 2.0 / (1.0 - std::log(2.0)), 1e-8);
  EXPECT_NEAR(r.value, 6.517783, 1e-6);
}

TEST(Modular, InfiniteExponentDiverges) {
  const auto r = modular(ScalarFunction::expression("2"), VariableExponent::parse("inf"), {0.0, 1.0});
  EXPECT_TRUE(r.diverged);
  EXPECT_TRUE(std::isinf(r.value));
  const auto ok = modular(ScalarFunction::expression("0.5"), VariableExponent::parse("inf"), {0.0, 1.0});
  EXPECT_EQ(ok.value, 0.0);
}

TEST(Modular, NonIntegrableSingularityDiverges) {
  // x^(-ln 4) is not integrable at 0.
  const auto r = modular(ScalarFunction::expression("4"), log_exponent(), {0.0, 1.0});
  EXPECT_TRUE(r.diverged);
  EXPECT_TRUE(std::isinf(r.value));
}

TEST(Modular, ScaledLogExponentClosedForm) {
  // int_0^1 lambda^{-(1 - ln x)} dx = 1 / (lambda (1 + ln lambda)).
  for (double lam : {0.5, 0.8, 1.0, 1.7, 3.0, 10.0}) {
    const auto r = modular(ScalarFunction::expression("1"), log_exponent(), {0.0, 1.0}, lam);
    EXPECT_NEAR(r.value, 1.0 / (lam * (1.0 + std::log(lam))), 1e-9 * r.value) << lam;
  }
  EXPECT_THROW(modular(ScalarFunction::expression("1"), log_exponent(), {0.0, kInf}), std::invalid_argument);
  EXPECT_THROW(modular(ScalarFunction::expression("1"), log_exponent(), {0.0, 1.0}, 0.0), std::invalid_argument);
}

TEST(LuxemburgNorm, IdentityTwo) {
  const auto r = luxemburg_norm(ScalarFunction::expression("x"), VariableExponent::constant(2.0), {0.0, 1.0});
  EXPECT_NEAR(r.value, 1.0 / std::sqrt(3.0), 1e-10);
  EXPECT_NEAR(r.value, 0.577350, 1e-6);
  EXPECT_LE(r.lo, r.value);
  EXPECT_GE(r.hi, r.value);
}

TEST(LuxemburgNorm, InfiniteExponentIsSup) {
  for (double c : {0.25, 1.0, 3.5}) {
    const auto r = luxemburg_norm(ScalarFunction::expression(std::to_string(c)), VariableExponent::parse("inf"),
                                  {0.0, 1.0});
    EXPECT_NEAR(r.value, c, 1e-8 * c);
  }
  const auto s = luxemburg_norm(ScalarFunction::expression("sin(3*x)"), VariableExponent::parse("inf"), {0.0, 1.0});
  EXPECT_NEAR(s.value, 1.0, 1e-8);
}

TEST(LuxemburgNorm, UnitFunctionLogExponent) {
  const auto r = luxemburg_norm(ScalarFunction::expression("1"), log_exponent(), {0.0, 1.0});
  EXPECT_NEAR(r.value, 1.0, 1e-8);
}

TEST(LuxemburgNorm, ZeroAndInfinite) {
  EXPECT_EQ(luxemburg_norm(ScalarFunction::expression("0"), VariableExponent::constant(2.0), {0.0, 1.0}).value, 0.0);
  // 1/x is not in L^2[0, 1].
  const auto r = luxemburg_norm(ScalarFunction::expression("1/x", {0.0, 1.0}), VariableExponent::constant(2.0),
                                {0.0, 1.0});
  EXPECT_TRUE(r.infinite());
  EXPECT_THROW(luxemburg_norm(ScalarFunction::expression("x"), VariableExponent::constant(2.0), {0.0, 1.0}, {0.0}),
               std::invalid_argument);
}

TEST(HolderCheck, Units) {
  const auto one = ScalarFunction::expression("1");
  const auto two = VariableExponent::constant(2.0);
  const auto r = holder_check(one, one, two, two, {0.0, 1.0});
  EXPECT_TRUE(r.holds);
  EXPECT_NEAR(r.lhs, 1.0, 1e-9);
  EXPECT_NEAR(r.rhs, 2.0, 1e-9);
}

TEST(HolderCheck, LinearPair) {
  const auto two = VariableExponent::constant(2.0);
  const auto r = holder_check(ScalarFunction::expression("x"), ScalarFunction::expression("1-x"), two, two,
                              {0.0, 1.0});
  EXPECT_TRUE(r.holds);
  EXPECT_NEAR(r.lhs, 1.0 / 6.0, 1e-9);
  EXPECT_NEAR(r.rhs, 2.0 / 3.0, 1e-9);
}

TEST(HolderCheck, SineCosineConjugatePair) {
  const auto r = holder_check(ScalarFunction::expression("sin(x)"), ScalarFunction::expression("cos(x)"),
                              VariableExponent::constant(4.0), VariableExponent::constant(4.0 / 3.0), {0.0, 1.0});
  EXPECT_TRUE(r.holds);
  auto s = [](double x) { return std::sin(x); };
  auto c = [](double x) { return std::cos(x); };
  EXPECT_NEAR(r.norms[0], lp_norm([](double x) { return std::sin(x) * std::cos(x); }, 1.0, 0, 1), 1e-8);
  EXPECT_NEAR(r.norms[1], lp_norm(s, 4.0, 0, 1), 1e-8);
  EXPECT_NEAR(r.norms[2], lp_norm(c, 4.0 / 3.0, 0, 1), 1e-8);
}

TEST(EmbeddingCheck, Examples) {
  const auto two = VariableExponent::constant(2.0), one = VariableExponent::constant(1.0);
  const auto a = embedding_check(ScalarFunction::expression("1"), two, one);
  EXPECT_TRUE(a.holds);
  EXPECT_NEAR(a.lhs, 1.0, 1e-9);
  const auto b = embedding_check(ScalarFunction::expression("x"), two, one);
  EXPECT_NEAR(b.lhs, 0.5, 1e-9);
  EXPECT_NEAR(b.rhs, 2.0 / std::sqrt(3.0), 1e-9);
  const auto c = embedding_check(ScalarFunction::expression("sin(x)"), VariableExponent::parse("2+sin(x)^2"), two);
  EXPECT_TRUE(c.holds);
  EXPECT_NEAR(c.lhs, lp_norm([](double x) { return std::sin(x); }, 2.0, 0, 1), 1e-8);
}

TEST(EmbeddingCheck, Preconditions) {
  const auto two = VariableExponent::constant(2.0), three = VariableExponent::constant(3.0);
  EXPECT_THROW(embedding_check(ScalarFunction::expression("x"), two, three), PreconditionError);
  EXPECT_THROW(embedding_check(ScalarFunction::expression("x"), three, two, {0.0, 2.0}), PreconditionError);
}

TEST(MonotonicityCheck, Examples) {
  const auto two = VariableExponent::constant(2.0);
  const auto half = monotonicity_check(ScalarFunction::expression("sin(3*x)+2"),
                                       ScalarFunction::expression("(sin(3*x)+2)/2"), two, {0.0, 1.0});
  EXPECT_TRUE(half.holds);
  EXPECT_NEAR(half.lhs, 0.5 * half.rhs, 1e-9 * half.rhs);
  const auto sq = monotonicity_check(ScalarFunction::expression("x"), ScalarFunction::expression("x^2"), two,
                                     {0.0, 1.0});
  EXPECT_NEAR(sq.lhs, 1.0 / std::sqrt(5.0), 1e-9);
  EXPECT_NEAR(sq.rhs, 1.0 / std::sqrt(3.0), 1e-9);
  const auto cut = monotonicity_check(ScalarFunction::expression("sin(x)"),
                                      ScalarFunction::expression("sin(x)*(sign(0.5-x)+1)/2"), log_exponent(),
                                      {0.0, 1.0});
  EXPECT_TRUE(cut.holds);
  EXPECT_LT(cut.lhs, cut.rhs);
  EXPECT_THROW(monotonicity_check(ScalarFunction::expression("x^2"), ScalarFunction::expression("x"), two,
                                  {0.0, 1.0}),
               PreconditionError);
}

TEST(ModularProperty, MonotoneInLambda) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> lam(0.2, 5.0), pc(1.0, 4.0);
  for (int trial = 0; trial < 40; ++trial) {
    const auto rf = random_function(rng);
    const auto f = ScalarFunction::expression(rf.text);
    const auto p = trial % 2 ? log_exponent() : VariableExponent::constant(pc(rng));
    double l1 = lam(rng), l2 = lam(rng);
    if (l1 > l2) std::swap(l1, l2);
    const auto a = modular(f, p, {0.0, 1.0}, l1), b = modular(f, p, {0.0, 1.0}, l2);
    if (a.diverged) continue;
    EXPECT_GE(a.value, b.value * (1.0 - 1e-9)) << rf.text;
  }
}

TEST(ModularProperty, ConstantExponentMatchesClosedForm) {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> pc(1.0, 6.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rf = random_function(rng);
    const double p = pc(rng);
    const auto r = luxemburg_norm(ScalarFunction::expression(rf.text), VariableExponent::constant(p), {0.0, 1.0});
    const double want = lp_norm(rf.fn, p, 0.0, 1.0);
    EXPECT_NEAR(r.value, want, 1e-8 * std::max(1.0, want)) << rf.text << " p = " << p;
  }
}

TEST(ModularProperty, HomogeneityAndTriangle) {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> cc(-4.0, 4.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_function(rng), b = random_function(rng);
    const auto p = trial % 2 ? log_exponent() : VariableExponent::parse("2+sin(x)^2");
    const auto fa = ScalarFunction::expression(a.text), fb = ScalarFunction::expression(b.text);
    const double c = cc(rng);
    const double na = luxemburg_norm(fa, p, {0.0, 1.0}).value;
    const double nb = luxemburg_norm(fb, p, {0.0, 1.0}).value;
    const double nca = luxemburg_norm(scaled(fa, c), p, {0.0, 1.0}).value;
    EXPECT_NEAR(nca, std::abs(c) * na, 1e-8 * std::max(1.0, std::abs(c) * na));
    const auto sum = ScalarFunction::expression("(" + a.text + ")+(" + b.text + ")");
    const double ns = luxemburg_norm(sum, p, {0.0, 1.0}).value;
    EXPECT_LE(ns, na + nb + 1e-8);
  }
}

TEST(ModularProperty, UnitBall) {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rf = random_function(rng);
    const auto f = ScalarFunction::expression(rf.text);
    const auto p = trial % 2 ? log_exponent() : VariableExponent::constant(1.5 + trial * 0.1);
    const auto r = luxemburg_norm(f, p, {0.0, 1.0});
    if (r.infinite() || r.value == 0.0) continue;
    EXPECT_LE(modular(f, p, {0.0, 1.0}, r.value).value, 1.0 + 10.0 * 1e-10);
  }
}

TEST(ModularProperty, RandomInequalityInstances) {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> e(1.0, 4.0);
  int violations = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto u = random_function(rng), v = random_function(rng);
    const auto fu = ScalarFunction::expression(u.text), fv = ScalarFunction::expression(v.text);
    const auto p = VariableExponent::constant(e(rng) + 1.0);
    const auto r = VariableExponent::constant(e(rng) + 1.0);
    if (!holder_check(fu, fv, p, r, {0.0, 1.0}).holds) ++violations;
    const double hi = e(rng) + 1.0;
    const auto q = VariableExponent::constant(1.0 + (hi - 1.0) * 0.5);
    if (!embedding_check(fu, VariableExponent::constant(hi), q).holds) ++violations;
    const auto dom = ScalarFunction::expression("abs(" + u.text + ")+abs(" + v.text + ")");
    if (!monotonicity_check(dom, fu, p, {0.0, 1.0}).holds) ++violations;
  }
  EXPECT_EQ(violations, 0);
}
