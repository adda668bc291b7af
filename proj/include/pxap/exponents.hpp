#pragma once

/// \file
/// Variable exponents p : Omega -> [1, inf], their essential bounds and
/// classification, conjugation and the composition exponent pr/(p + r).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "pxap/funcspec.hpp"

namespace pxap {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class InvalidExponent : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An exponent function with values in [1, inf]. Infinity is stored as the
/// IEEE infinity and only ever produced deliberately (constant "inf" or the
/// conjugation/composition tables), never by overflow of p itself.
class VariableExponent {
 public:
  VariableExponent() : VariableExponent(constant(2.0)) {}

  static VariableExponent constant(double value, Interval domain = Interval::real_line()) {
    if (std::isnan(value) || value < 1.0) throw InvalidExponent("exponent value below 1");
    VariableExponent e(Tag{});
    e.constant_ = value;
    e.domain_ = domain;
    e.label_ = format_value(value);
    return e;
  }

  static VariableExponent from_function(ScalarFunction p) {
    VariableExponent e(Tag{});
    e.domain_ = p.domain();
    e.label_ = p.label();
    e.fn_ = std::move(p);
    return e;
  }

  static VariableExponent from_function(ScalarFunction p, Interval domain) {
    auto e = from_function(std::move(p));
    e.domain_ = domain;
    return e;
  }

  /// General pointwise rule; `value` may return kInf.
  static VariableExponent custom(std::function<double(double)> value, Interval domain, std::string label,
                                 std::function<std::vector<double>(double, double)> kinks = {}) {
    return from_function(ScalarFunction::composite(std::move(value), domain, std::move(label), std::move(kinks)));
  }

  /// "inf", a number, a catalog name, an expression, or csv:<path>.
  static VariableExponent parse(const std::string& spec) {
    if (spec == "inf" || spec == "infinity" || spec == "Inf") return constant(kInf);
    double v = 0.0;
    auto r = std::from_chars(spec.data(), spec.data() + spec.size(), v);
    if (r.ec == std::errc() && r.ptr == spec.data() + spec.size()) return constant(v);
    auto e = from_function(parse_function_spec(spec));
    e.label_ = spec;
    return e;
  }

  bool is_constant() const { return constant_.has_value(); }
  std::optional<double> constant_value() const { return constant_; }
  const Interval& domain() const { return domain_; }
  const std::string& label() const { return label_; }

  /// p(x); raises InvalidExponent for values below 1 or NaN.
  double operator()(double x) const {
    if (constant_) return *constant_;
    const double v = fn_(x);
    if (std::isnan(v) || v < 1.0) throw InvalidExponent("exponent " + label_ + " below 1 at x = " + std::to_string(x));
    return v;
  }

  std::vector<double> breakpoints(double a, double b) const {
    if (constant_) return {};
    return fn_.breakpoints(a, b);
  }

  static std::string format_value(double v) {
    if (std::isinf(v)) return "inf";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  }

 private:
  struct Tag {};
  explicit VariableExponent(Tag) {}

  std::optional<double> constant_;
  ScalarFunction fn_;
  Interval domain_;
  std::string label_;
};

/// Pointwise q with 1/q = 1/p + 1/r, using 1/inf = 0.
inline double harmonic_combination(double p, double r) {
  if (std::isinf(r)) return p;
  if (std::isinf(p)) return r;
  return p * r / (p + r);
}

/// Pointwise conjugate p/(p - 1), with 1 <-> inf.
inline double conjugate_value(double p) {
  if (p == 1.0) return kInf;
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

struct ExponentBounds {
  double p_minus = 1.0;
  double p_plus = 1.0;
  int grid_points = 0;
  bool converged = false;
};

struct BoundsOptions {
  int initial_points = 256;
  int max_points = 1 << 16;
  double tolerance = 1e-9;
};

namespace detail {

// Value of p near an endpoint where it cannot be evaluated, or kInf when the
// probes keep growing without visible saturation.
inline double endpoint_limit(const VariableExponent& p, double end, double inward) {
  std::vector<double> v;
  for (int k = 1; k <= 15; ++k) {
    try {
      v.push_back(p(end + inward * std::pow(10.0, -k)));
    } catch (const EvalError&) {
      break;
    }
  }
  if (v.size() < 4) throw EvalError("exponent " + p.label() + " cannot be evaluated near endpoint");
  std::vector<double> d;
  for (std::size_t i = 1; i < v.size(); ++i) d.push_back(v[i] - v[i - 1]);
  const double dmax = *std::max_element(d.begin(), d.end());
  const bool increasing = std::all_of(d.begin(), d.end(), [](double x) { return x >= 0.0; });
  if (std::isinf(v.back()) || (increasing && dmax > 1e-6 && d.back() >= 0.5 * dmax)) return kInf;
  return v.back();
}

}  // namespace detail

/// Grid estimate of (essinf p, esssup p) over `omega`, refined by doubling
/// until two resolutions agree to the tolerance.
inline ExponentBounds essential_bounds(const VariableExponent& p, Interval omega, const BoundsOptions& opt = {}) {
  if (!omega.bounded() || !(omega.hi > omega.lo)) throw std::invalid_argument("essential_bounds needs a bounded interval");
  if (p.is_constant()) {
    const double c = *p.constant_value();
    return {c, c, 1, true};
  }
  auto endpoint = [&](double x, double inward) {
    try {
      const double v = p(x);
      if (std::isfinite(v)) return v;
    } catch (const EvalError&) {
    }
    return detail::endpoint_limit(p, x, inward);
  };
  const double a = omega.lo, b = omega.hi;
  const double ea = endpoint(a, b - a);
  const double eb = endpoint(b, a - b);
  double lo = std::min(ea, eb), hi = std::max(ea, eb);
  double x_lo = ea <= eb ? a : b, x_hi = ea >= eb ? a : b;
  auto visit = [&](double x) {
    const double v = p(x);
    if (v < lo) lo = v, x_lo = x;
    if (v > hi) hi = v, x_hi = x;
  };
  int n = std::max(2, opt.initial_points);
  for (int i = 1; i < n; ++i) visit(a + (b - a) * i / n);
  ExponentBounds out{lo, hi, n + 1, false};
  // Each doubling evaluates only the new odd nodes.
  while (n < opt.max_points) {
    const double plo = lo, phi = hi;
    n *= 2;
    for (int i = 1; i < n; i += 2) visit(a + (b - a) * i / n);
    out = {lo, hi, n + 1, false};
    const bool hi_ok = std::isinf(hi) ? std::isinf(phi) : std::abs(hi - phi) <= opt.tolerance;
    if (std::abs(lo - plo) <= opt.tolerance && hi_ok) {
      out.converged = true;
      break;
    }
  }
  // Polish the extreme nodes inside their neighbouring cells.
  const double h = (b - a) / n;
  auto polish = [&](double x0, double sign) {
    const double l = std::max(a, x0 - h), r = std::min(b, x0 + h);
    auto g = [&](double x) {
      try {
        const double v = p(x);
        return std::isfinite(v) ? sign * v : sign * (sign > 0 ? lo : hi);
      } catch (const EvalError&) {
        return sign * (sign > 0 ? lo : hi);
      }
    };
    return sign * boost::math::tools::brent_find_minima(g, l, r, 40).second;
  };
  if (std::isfinite(out.p_minus)) out.p_minus = std::min(out.p_minus, polish(x_lo, 1.0));
  if (std::isfinite(out.p_plus)) out.p_plus = std::max(out.p_plus, polish(x_hi, -1.0));
  if (out.p_minus < 1.0) throw InvalidExponent("exponent " + p.label() + " takes values below 1");
  return out;
}

inline ExponentBounds essential_bounds(const VariableExponent& p, const BoundsOptions& opt = {}) {
  return essential_bounds(p, p.domain(), opt);
}

struct ExponentClass {
  bool is_constant = false;
  bool in_D_plus = false;
  bool in_C_plus = false;
  bool attains_infinity = false;
};

inline ExponentClass classify(const VariableExponent& p, const ExponentBounds& b) {
  ExponentClass c;
  c.is_constant = p.is_constant() || b.p_minus == b.p_plus;
  c.attains_infinity = std::isinf(b.p_plus);
  c.in_D_plus = !c.attains_infinity;
  c.in_C_plus = c.in_D_plus && b.p_minus > 1.0;
  return c;
}

inline ExponentClass classify(const VariableExponent& p, Interval omega) {
  if (p.is_constant()) return classify(p, ExponentBounds{*p.constant_value(), *p.constant_value(), 1, true});
  return classify(p, essential_bounds(p, omega));
}

inline VariableExponent conjugate(const VariableExponent& p) {
  if (p.is_constant()) return VariableExponent::constant(conjugate_value(*p.constant_value()), p.domain());
  return VariableExponent::custom([p](double x) { return conjugate_value(p(x)); }, p.domain(),
                                  "conj(" + p.label() + ")",
                                  [p](double a, double b) { return p.breakpoints(a, b); });
}

struct CompositionExponent {
  VariableExponent q;
  /// r(x) >= max(p(x), p(x)/(p(x) - 1)) at every grid point.
  bool hypothesis_holds = true;
  /// 1 <= q(x) <= p(x) at every grid point.
  bool q_in_range = true;
  std::vector<double> violations;
};

/// q = pr/(p + r), q = p where r = inf. The hypothesis on r is checked on a
/// grid of `grid_points` over `omega` and reported, never enforced.
inline CompositionExponent composition_exponent(const VariableExponent& p, const VariableExponent& r,
                                                Interval omega = {0.0, 1.0}, int grid_points = 1025) {
  CompositionExponent out;
  if (p.is_constant() && r.is_constant()) {
    const double q = harmonic_combination(*p.constant_value(), *r.constant_value());
    if (q < 1.0) {
      out.q = VariableExponent::custom([q](double) { return q; }, Interval::real_line(),
                                       VariableExponent::format_value(q));
    } else {
      out.q = VariableExponent::constant(q);
    }
  } else {
    out.q = VariableExponent::custom([p, r](double x) { return harmonic_combination(p(x), r(x)); }, omega,
                                     "comp(" + p.label() + "," + r.label() + ")", [p, r](double a, double b) {
                                       auto k = p.breakpoints(a, b);
                                       auto k2 = r.breakpoints(a, b);
                                       k.insert(k.end(), k2.begin(), k2.end());
                                       return k;
                                     });
  }
  const int n = std::max(2, grid_points);
  for (int i = 0; i < n; ++i) {
    const double x = omega.bounded() ? omega.lo + (omega.hi - omega.lo) * i / (n - 1) : static_cast<double>(i);
    double pv, rv;
    try {
      pv = p(x);
      rv = r(x);
    } catch (const EvalError&) {
      continue;
    }
    const double need = std::max(pv, conjugate_value(pv));
    if (!(rv >= need)) {
      out.hypothesis_holds = false;
      out.violations.push_back(x);
    }
    const double q = harmonic_combination(pv, rv);
    if (!(q >= 1.0 && q <= pv)) out.q_in_range = false;
  }
  return out;
}

}  // namespace pxap
