#pragma once

/// \file
/// The modular rho(f) = int phi_{p(x)}(|f(x)|) dx, the Luxemburg norm, and
/// numerical checks of the Hoelder, embedding and monotonicity properties of
/// L^{p(x)}.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pxap/exponents.hpp"
#include "pxap/funcspec.hpp"
#include "pxap/quadrature.hpp"

namespace pxap {

/// t^p for finite p; for p = inf, 0 on [0, 1] and inf beyond.
inline double phi(double p, double t) {
  if (t < 0.0 || std::isnan(t)) throw std::domain_error("phi needs t >= 0");
  if (std::isinf(p)) return t <= 1.0 ? 0.0 : kInf;
  if (t == 0.0) return 0.0;
  return std::pow(t, p);
}

struct ModularResult {
  double value = 0.0;
  double error = 0.0;
  bool diverged = false;
  /// Stopped early once the partial sum passed ModularOptions::stop_above.
  bool exceeded = false;
  /// Where divergence was detected, e.g. "[0, 0.25]".
  std::string evidence;
};

struct ModularOptions {
  quad::LayeredOptions layered{};
  /// Return as soon as the value is known to exceed this.
  double stop_above = kInf;
};

namespace detail {

inline std::string interval_text(double a, double b) {
  return "[" + VariableExponent::format_value(a) + ", " + VariableExponent::format_value(b) + "]";
}

// Sorted cut points of [a, b] including both ends. Sign changes of f are
// kinks of |f|^p unless p is a constant even integer.
inline std::vector<double> pieces(const ScalarFunction& f, const VariableExponent& p, double a, double b) {
  std::vector<double> cuts = f.breakpoints(a, b);
  auto pk = p.breakpoints(a, b);
  cuts.insert(cuts.end(), pk.begin(), pk.end());
  const auto c = p.constant_value();
  const bool smooth_power = c && std::isfinite(*c) && std::fmod(*c, 2.0) == 0.0;
  if (!smooth_power) {
    auto zeros = find_crossings(
        [&](double x) {
          try {
            return f(x);
          } catch (const EvalError&) {
            return 0.0;
          }
        },
        a, b, 16.0, 16);
    cuts.insert(cuts.end(), zeros.begin(), zeros.end());
  }
  cuts.push_back(a);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::erase_if(cuts, [&](double x) { return x < a || x > b; });
  return cuts;
}

// Memoizes |f(x)| and p(x) during one norm computation.
class PointCache {
 public:
  PointCache(const ScalarFunction& f, const VariableExponent& p) : f_(f), p_(p) {}
  std::pair<double, double> operator()(double x) {
    auto it = memo_.find(x);
    if (it != memo_.end()) return it->second;
    const double h = std::abs(f_(x));
    const double q = p_(x);
    memo_.emplace(x, std::make_pair(h, q));
    return {h, q};
  }

 private:
  const ScalarFunction& f_;
  const VariableExponent& p_;
  std::unordered_map<double, std::pair<double, double>> memo_;
};

template <class Point>
ModularResult modular_scaled(Point&& point, const std::vector<double>& cuts, double inv_lambda,
                             const ModularOptions& opt) {
  ModularResult out;
  quad::LayeredOptions lay = opt.layered;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    lay.stop_above = opt.stop_above - out.value;
    auto r = quad::integrate_positive(
        [&](double x) {
          const auto [h, q] = point(x);
          return phi(q, h * inv_lambda);
        },
        a, b, lay);
    if (r.diverged) {
      out.value = kInf;
      out.error = kInf;
      out.diverged = true;
      out.evidence = "nonintegrable on " + interval_text(a, b);
      return out;
    }
    out.value += r.value;
    out.error += r.error;
    if (r.exceeded || out.value > opt.stop_above) {
      out.exceeded = true;
      return out;
    }
    if (out.value > opt.layered.cap) {
      out.value = kInf;
      out.error = kInf;
      out.diverged = true;
      out.evidence = "partial sum exceeded cap on " + interval_text(cuts.front(), b);
      return out;
    }
  }
  return out;
}

}  // namespace detail

/// rho(f / lambda) over omega.
inline ModularResult modular(const ScalarFunction& f, const VariableExponent& p, Interval omega, double lambda = 1.0,
                             const ModularOptions& opt = {}) {
  if (!omega.bounded()) throw std::invalid_argument("modular needs a bounded interval");
  if (!(lambda > 0.0)) throw std::invalid_argument("modular scaling must be positive");
  if (!(omega.hi > omega.lo)) return {};
  const auto cuts = detail::pieces(f, p, omega.lo, omega.hi);
  auto point = [&](double x) { return std::make_pair(std::abs(f(x)), p(x)); };
  return detail::modular_scaled(point, cuts, 1.0 / lambda, opt);
}

/// Grid supremum of h over [a, b] restricted to points where `keep` holds,
/// sharpened by golden-section search around the best grid points.
inline double grid_sup(const std::function<double(double)>& h, double a, double b,
                       const std::function<bool(double)>& keep = {}, int n = 2048) {
  auto value = [&](double x) -> double {
    try {
      if (keep && !keep(x)) return -1.0;
      return h(x);
    } catch (const EvalError&) {
      return -1.0;
    }
  };
  std::vector<double> xs(n + 1), vs(n + 1);
  for (int i = 0; i <= n; ++i) {
    xs[i] = (i == n) ? b : a + (b - a) * i / n;
    vs[i] = value(xs[i]);
  }
  double best = *std::max_element(vs.begin(), vs.end());
  if (best < 0.0) return 0.0;
  std::vector<int> order(n + 1);
  for (int i = 0; i <= n; ++i) order[i] = i;
  std::partial_sort(order.begin(), order.begin() + std::min(4, n + 1), order.end(),
                    [&](int l, int r) { return vs[l] > vs[r] || (vs[l] == vs[r] && l < r); });
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int k = 0; k < std::min(4, n + 1); ++k) {
    const int i = order[k];
    double lo = xs[std::max(0, i - 1)], hi = xs[std::min(n, i + 1)];
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = value(x1), f2 = value(x2);
    for (int it = 0; it < 80 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++it) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = value(x2);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = value(x1);
      }
      best = std::max(best, std::max(f1, f2));
    }
  }
  return best;
}

struct NormResult {
  double value = 0.0;
  /// Final bracket: rho(f / hi) <= 1 and, when lo > 0, rho(f / lo) > 1.
  double lo = 0.0;
  double hi = 0.0;
  double modular_at_value = 0.0;
  /// esssup |f| over {p = inf}, a hard lower bound for the norm.
  double floor = 0.0;
  int modular_evaluations = 0;
  bool infinite() const { return std::isinf(value); }
};

struct NormOptions {
  double rel_tol = 1e-10;
  double cap = 1e15;
  ModularOptions modular{};
};

/// Luxemburg norm inf{lambda > 0 : rho(f / lambda) <= 1} over omega.
inline NormResult luxemburg_norm(const ScalarFunction& f, const VariableExponent& p, Interval omega,
                                 const NormOptions& opt = {}) {
  if (!(opt.rel_tol > 0.0)) throw std::invalid_argument("norm tolerance must be positive");
  if (!omega.bounded()) throw std::invalid_argument("luxemburg_norm needs a bounded interval");
  NormResult out;
  if (!(omega.hi > omega.lo)) return out;
  const auto cuts = detail::pieces(f, p, omega.lo, omega.hi);

  if (p.is_constant()) {
    const double c = *p.constant_value();
    if (std::isinf(c)) {
      out.value = out.lo = out.hi = out.floor =
          grid_sup([&](double x) { return std::abs(f(x)); }, omega.lo, omega.hi);
      out.modular_at_value = 0.0;
      return out;
    }
    // Homogeneity: rho(f / lambda) = rho(f) / lambda^c.
    auto point = [&](double x) { return std::make_pair(std::abs(f(x)), c); };
    const auto r = detail::modular_scaled(point, cuts, 1.0, opt.modular);
    out.modular_evaluations = 1;
    if (r.diverged) {
      out.value = out.lo = out.hi = kInf;
      out.modular_at_value = kInf;
      return out;
    }
    out.value = out.lo = out.hi = std::pow(r.value, 1.0 / c);
    out.modular_at_value = r.value > 0.0 ? 1.0 : 0.0;
    return out;
  }

  detail::PointCache cache(f, p);
  auto rho = [&](double lambda, double stop_above) {
    ++out.modular_evaluations;
    ModularOptions mo = opt.modular;
    mo.stop_above = stop_above;
    return detail::modular_scaled(cache, cuts, 1.0 / lambda, mo);
  };
  auto admissible = [&](double lambda) {
    const auto r = rho(lambda, 1.0);
    return !r.diverged && !r.exceeded && r.value <= 1.0;
  };

  out.floor = grid_sup([&](double x) { return cache(x).first; }, omega.lo, omega.hi,
                       [&](double x) { return std::isinf(cache(x).second); });

  const auto z = rho(1e-150, kInf);
  if (!z.diverged && z.value == 0.0) {
    out.modular_at_value = 0.0;
    return out;
  }

  double lo = 0.0, hi = 0.0;
  const double start = std::max(1.0, out.floor);
  if (admissible(start)) {
    hi = start;
    while (true) {
      const double cand = 0.5 * hi;
      if (cand <= out.floor) {
        lo = out.floor;
        if (out.floor > 0.0 && admissible(out.floor)) hi = out.floor;
        break;
      }
      if (cand < 1e-300) {
        lo = 0.0;
        hi = cand;
        break;
      }
      if (admissible(cand)) {
        hi = cand;
      } else {
        lo = cand;
        break;
      }
    }
  } else {
    lo = start;
    hi = 2.0 * start;
    while (!admissible(hi)) {
      lo = hi;
      hi *= 2.0;
      if (hi > opt.cap) {
        out.value = out.lo = out.hi = kInf;
        out.lo = lo;
        out.modular_at_value = kInf;
        return out;
      }
    }
  }
  while (hi - lo > opt.rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (admissible(mid)) hi = mid;
    else lo = mid;
  }
  out.lo = lo;
  out.hi = hi;
  out.value = hi;
  out.modular_at_value = rho(hi, kInf).value;
  return out;
}

inline Interval intersect(const Interval& a, const Interval& b) { return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)}; }

/// Pointwise product u * v with the union of both breakpoint sets.
inline ScalarFunction product(const ScalarFunction& u, const ScalarFunction& v) {
  return ScalarFunction::composite([u, v](double x) { return u(x) * v(x); }, intersect(u.domain(), v.domain()),
                                   "(" + u.label() + ")*(" + v.label() + ")", [u, v](double a, double b) {
                                     auto k = u.breakpoints(a, b);
                                     auto k2 = v.breakpoints(a, b);
                                     k.insert(k.end(), k2.begin(), k2.end());
                                     return k;
                                   });
}

/// Pointwise c * f.
inline ScalarFunction scaled(const ScalarFunction& f, double c) {
  return ScalarFunction::composite([f, c](double x) { return c * f(x); }, f.domain(), "scaled(" + f.label() + ")",
                                   [f](double a, double b) { return f.breakpoints(a, b); });
}

/// Result of one inequality check lhs <= rhs.
struct InequalityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool holds = false;
  /// The right-hand side is infinite, so the inequality says nothing.
  bool vacuous = false;
  std::vector<double> norms;
};

namespace detail {

inline InequalityReport compare(double lhs, double rhs, double tol, std::vector<double> norms) {
  InequalityReport r;
  r.lhs = lhs;
  r.rhs = rhs;
  r.norms = std::move(norms);
  r.vacuous = std::isinf(rhs);
  r.slack = r.vacuous ? kInf : rhs - lhs;
  r.holds = r.vacuous || lhs <= rhs + tol * std::max(1.0, std::abs(rhs));
  return r;
}

template <class Pred>
void check_on_grid(Interval omega, int n, Pred&& ok, const char* what) {
  for (int i = 0; i <= n; ++i) {
    const double x = omega.lo + (omega.hi - omega.lo) * i / n;
    bool good = true;
    try {
      good = ok(x);
    } catch (const EvalError&) {
      continue;
    }
    if (!good) throw PreconditionError(std::string(what) + " fails at x = " + std::to_string(x));
  }
}

}  // namespace detail

/// ||uv||_q <= 2 ||u||_p ||v||_r with 1/q = 1/p + 1/r. norms = {uv, u, v}.
inline InequalityReport holder_check(const ScalarFunction& u, const ScalarFunction& v, const VariableExponent& p,
                                     const VariableExponent& r, Interval omega, const NormOptions& opt = {}) {
  const auto q = composition_exponent(p, r, omega).q;
  const double nuv = luxemburg_norm(product(u, v), q, omega, opt).value;
  const double nu = luxemburg_norm(u, p, omega, opt).value;
  const double nv = luxemburg_norm(v, r, omega, opt).value;
  const double rhs = (nu == 0.0 || nv == 0.0) ? 0.0 : 2.0 * nu * nv;
  return detail::compare(nuv, rhs, 1e-9, {nuv, nu, nv});
}

/// ||f||_q <= 2 ||f||_p on a unit-length interval, for q <= p. norms = {q, p}.
inline InequalityReport embedding_check(const ScalarFunction& f, const VariableExponent& p, const VariableExponent& q,
                                        Interval omega = {0.0, 1.0}, const NormOptions& opt = {}) {
  if (std::abs(omega.length() - 1.0) > 1e-12) throw PreconditionError("embedding check needs an interval of length 1");
  detail::check_on_grid(omega, 1024, [&](double x) { return q(x) <= p(x); }, "q <= p");
  const double nq = luxemburg_norm(f, q, omega, opt).value;
  const double np = luxemburg_norm(f, p, omega, opt).value;
  return detail::compare(nq, 2.0 * np, 1e-9, {nq, np});
}

/// ||g||_p <= ||f||_p when |g| <= |f|. norms = {g, f}.
inline InequalityReport monotonicity_check(const ScalarFunction& f, const ScalarFunction& g, const VariableExponent& p,
                                           Interval omega, const NormOptions& opt = {}) {
  detail::check_on_grid(
      omega, 1024, [&](double x) { return std::abs(g(x)) <= std::abs(f(x)) * (1.0 + 1e-12) + 1e-300; }, "|g| <= |f|");
  const double ng = luxemburg_norm(g, p, omega, opt).value;
  const double nf = luxemburg_norm(f, p, omega, opt).value;
  return detail::compare(ng, nf, 1e-9, {ng, nf});
}

}  // namespace pxap
