#pragma once

/// \file
/// Gauss-Kronrod quadrature: fixed 21-point panels, global adaptive
/// subdivision, and an endpoint-layered integrator that can tell a
/// slowly convergent endpoint singularity from a divergent one.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace pxap::quad {

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(std::complex<double> v) { return std::abs(v); }
template <class Derived>
double magnitude(const Derived& m)
  requires requires { m.cwiseAbs().maxCoeff(); }
{
  return m.size() == 0 ? 0.0 : static_cast<double>(m.cwiseAbs().maxCoeff());
}

/// Nonnegative Kronrod abscissae on [-1, 1]; Gauss nodes sit at odd indices.
inline const std::array<double, 11>& kronrod_nodes() {
  static const auto n = boost::math::quadrature::gauss_kronrod<double, 21>::abscissa();
  return n;
}
inline const std::array<double, 11>& kronrod_weights() {
  static const auto w = boost::math::quadrature::gauss_kronrod<double, 21>::weights();
  return w;
}
/// Gauss weights aligned with kronrod_nodes() (zero at even indices).
inline const std::array<double, 11>& embedded_gauss_weights() {
  static const auto w = [] {
    std::array<double, 11> out{};
    const auto g = boost::math::quadrature::gauss<double, 10>::weights();
    for (std::size_t i = 0; i < g.size(); ++i) out[2 * i + 1] = g[i];
    return out;
  }();
  return w;
}

/// One node of a composite rule on the real line: position plus Kronrod and
/// embedded Gauss weights (already scaled to the panel).
struct Node {
  double x;
  double wk;
  double wg;
};

/// Appends the 21 scaled nodes of panel [a, b].
inline void append_panel(std::vector<Node>& out, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const auto& xs = kronrod_nodes();
  const auto& wk = kronrod_weights();
  const auto& wg = embedded_gauss_weights();
  out.push_back({c, h * wk[0], 0.0});
  for (std::size_t i = 1; i < xs.size(); ++i) {
    out.push_back({c - h * xs[i], h * wk[i], h * wg[i]});
    out.push_back({c + h * xs[i], h * wk[i], h * wg[i]});
  }
}

template <class V>
struct Estimate {
  V value;
  double error = 0.0;
};

template <class V, class F>
Estimate<V> gauss_kronrod21(F&& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const auto& xs = kronrod_nodes();
  const auto& wk = kronrod_weights();
  const auto& wg = embedded_gauss_weights();
  V center = f(c);
  V k = center * wk[0];
  V g = center * 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    V s = f(c - h * xs[i]) + f(c + h * xs[i]);
    k = k + s * wk[i];
    if (i % 2 == 1) g = g + s * wg[i];
  }
  V kv = k * h;
  V gv = g * h;
  return {kv, magnitude(V(kv - gv))};
}

struct AdaptiveOptions {
  double abs_tol = 1e-13;
  double rel_tol = 1e-11;
  int max_intervals = 2000;
};

template <class V>
struct AdaptiveResult {
  V value;
  double error = 0.0;
  int intervals = 0;
  bool converged = false;
  bool finite = true;
};

/// Global adaptive Gauss-Kronrod: always bisects the panel with the largest
/// error estimate. Deterministic for a given integrand.
template <class V, class F>
AdaptiveResult<V> integrate(F&& f, double a, double b, const AdaptiveOptions& opt = {}) {
  struct Panel {
    double a, b;
    Estimate<V> est;
  };
  auto cmp = [](const Panel& l, const Panel& r) { return l.est.error < r.est.error; };
  std::vector<Panel> heap;
  heap.push_back({a, b, gauss_kronrod21<V>(f, a, b)});
  V total = heap.front().est.value;
  double err = heap.front().est.error;
  int count = 1;
  AdaptiveResult<V> res{total, err, 1, false, true};
  while (true) {
    if (!std::isfinite(magnitude(total)) || !std::isfinite(err)) {
      res.value = total;
      res.error = std::numeric_limits<double>::infinity();
      res.intervals = count;
      res.finite = false;
      return res;
    }
    if (err <= std::max(opt.abs_tol, opt.rel_tol * magnitude(total))) {
      res.converged = true;
      break;
    }
    if (count >= opt.max_intervals) break;
    std::pop_heap(heap.begin(), heap.end(), cmp);
    Panel worst = heap.back();
    heap.pop_back();
    const double m = 0.5 * (worst.a + worst.b);
    if (!(m > worst.a && m < worst.b)) {
      heap.push_back(worst);
      std::push_heap(heap.begin(), heap.end(), cmp);
      break;
    }
    Panel l{worst.a, m, gauss_kronrod21<V>(f, worst.a, m)};
    Panel r{m, worst.b, gauss_kronrod21<V>(f, m, worst.b)};
    heap.push_back(l);
    std::push_heap(heap.begin(), heap.end(), cmp);
    heap.push_back(r);
    std::push_heap(heap.begin(), heap.end(), cmp);
    ++count;
    total = total - worst.est.value + l.est.value + r.est.value;
    err = err - worst.est.error + l.est.error + r.est.error;
  }
  // Final sum in left-to-right order so the result does not depend on heap
  // history.
  std::sort(heap.begin(), heap.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  total = heap.front().est.value * 0.0;
  err = 0.0;
  for (const auto& p : heap) {
    total = total + p.est.value;
    err += p.est.error;
  }
  res.value = total;
  res.error = err;
  res.intervals = count;
  return res;
}

/// Outcome of an integral over a nonnegative integrand that may be
/// infinite.
struct PositiveIntegral {
  double value = 0.0;
  double error = 0.0;
  bool diverged = false;
  /// The partial sum passed LayeredOptions::stop_above; value is then a
  /// lower estimate.
  bool exceeded = false;
};

struct LayeredOptions {
  AdaptiveOptions adaptive{1e-14, 1e-11, 400};
  /// Partial sums beyond this are declared divergent.
  double cap = 1e12;
  int max_decades = 60;
  /// Ratio of successive decade contributions at or above which the
  /// endpoint is declared nonintegrable.
  double divergence_ratio = 0.999;
  /// Panels of plain adaptive subdivision tried before layering.
  int plain_intervals = 48;
  /// Try tanh-sinh (seven refinement levels) before subdividing.
  bool tanh_sinh = true;
  /// Stop as soon as the partial sum exceeds this value.
  double stop_above = std::numeric_limits<double>::infinity();
};

namespace detail {

// Integrates decade layers toward an endpoint. `at(d)` evaluates the
// integrand at offset d > 0 from the endpoint; the first layer is [w/10, w].
template <class F>
PositiveIntegral layer_toward_endpoint(F&& at, double w, double floor_offset, double budget,
                                       const LayeredOptions& opt) {
  PositiveIntegral out;
  AdaptiveOptions lay = opt.adaptive;
  lay.max_intervals = 200;
  double prev = -1.0;
  double ratio = 1.0;
  int growing = 0;
  double hi = w;
  for (int k = 0; k < opt.max_decades; ++k) {
    const double lo = hi / 10.0;
    if (lo <= floor_offset) break;
    auto r = integrate<double>([&](double d) { return at(d); }, lo, hi, lay);
    if (!r.finite) {
      out.diverged = true;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    const double layer = std::max(0.0, r.value);
    out.value += layer;
    out.error += r.error;
    if (out.value > opt.cap) {
      out.diverged = true;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    if (out.value > budget) {
      out.exceeded = true;
      return out;
    }
    if (prev > 0.0) {
      ratio = layer / prev;
      if (ratio >= opt.divergence_ratio) {
        if (++growing >= 3 && k >= 4) {
          out.diverged = true;
          out.value = std::numeric_limits<double>::infinity();
          return out;
        }
      } else {
        growing = 0;
        const double tail = layer * ratio / (1.0 - ratio);
        if (k >= 2 && tail <= std::max(opt.adaptive.abs_tol, opt.adaptive.rel_tol * out.value)) {
          out.error += tail;
          return out;
        }
      }
    } else if (prev == 0.0 && layer == 0.0) {
      return out;
    }
    prev = layer;
    hi = lo;
  }
  // Resolution exhausted: extrapolate the geometric tail when decay is clear.
  if (prev > 0.0) {
    if (ratio >= opt.divergence_ratio) {
      out.diverged = true;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    const double tail = prev * ratio / (1.0 - ratio);
    out.value += tail;
    out.error += tail;
  }
  return out;
}

}  // namespace detail

namespace detail {

// The rule object builds its node tables lazily, so each thread keeps one.
inline boost::math::quadrature::tanh_sinh<double>& tanh_sinh_rule() {
  thread_local boost::math::quadrature::tanh_sinh<double> rule(7);
  return rule;
}

// Tanh-sinh nodes crowd toward the ends, so a nonintegrable endpoint can look
// convergent once the node range is exhausted. Require x f(x) to shrink
// clearly toward each end that can be resolved in floating point.
template <class F>
bool endpoints_tame(F& f, double a, double b) {
  const double w = b - a;
  auto tame = [&](double end, double dir) {
    const double d1 = 1e-12 * w, d2 = 1e-24 * w;
    if (end + dir * d2 == end) return true;
    const double v1 = d1 * f(end + dir * d1), v2 = d2 * f(end + dir * d2);
    if (!std::isfinite(v1) || !std::isfinite(v2)) return false;
    return v2 <= 0.5 * v1 || v1 <= 1e-300;
  };
  return tame(a, 1.0) && tame(b, -1.0);
}

}  // namespace detail

/// Integrates a nonnegative integrand over [a, b]. A single Gauss-Kronrod
/// panel is tried first, then tanh-sinh for endpoint singularities, then
/// plain adaptive subdivision; failing all three, the interval is split into
/// a middle part and decade layers toward each endpoint, and the layer
/// sequence decides between convergence (geometric tail added) and
/// divergence.
template <class F>
PositiveIntegral integrate_positive(F&& f, double a, double b, const LayeredOptions& opt = {}) {
  PositiveIntegral out;
  if (!(b > a)) return out;
  const double tol_abs = opt.adaptive.abs_tol, tol_rel = opt.adaptive.rel_tol;
  {
    auto one = gauss_kronrod21<double>(f, a, b);
    if (std::isfinite(one.value) && one.error <= std::max(tol_abs, tol_rel * std::abs(one.value))) {
      out.value = std::max(0.0, one.value);
      out.error = one.error;
      return out;
    }
  }
  if (opt.tanh_sinh) {
    bool ok = false;
    try {
      ok = detail::endpoints_tame(f, a, b);
    } catch (const std::exception&) {
      ok = false;
    }
    if (ok) {
      double err = 0.0, l1 = 0.0;
      std::size_t levels = 0;
      double v = std::numeric_limits<double>::quiet_NaN();
      try {
        v = detail::tanh_sinh_rule().integrate(f, a, b, 0.1 * tol_rel, &err, &l1, &levels);
      } catch (const std::exception&) {
        v = std::numeric_limits<double>::quiet_NaN();
      }
      if (std::isfinite(v) && std::isfinite(err) && err <= std::max(tol_abs, tol_rel * std::abs(v)) &&
          v <= opt.cap) {
        out.value = std::max(0.0, v);
        out.error = err;
        return out;
      }
    }
  }
  AdaptiveOptions plain = opt.adaptive;
  plain.max_intervals = std::min(plain.max_intervals, opt.plain_intervals);
  auto first = integrate<double>(f, a, b, plain);
  if (!first.finite) {
    out.diverged = true;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  if (first.converged) {
    out.value = std::max(0.0, first.value);
    out.error = first.error;
    return out;
  }
  const double w = 0.25 * (b - a);
  AdaptiveOptions mid_opt = opt.adaptive;
  auto mid = integrate<double>(f, a + w, b - w, mid_opt);
  if (!mid.finite) {
    out.diverged = true;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  out.value = std::max(0.0, mid.value);
  out.error = mid.error;
  if (out.value > opt.stop_above) {
    out.exceeded = true;
    return out;
  }
  const double eps = std::numeric_limits<double>::epsilon();
  auto left = detail::layer_toward_endpoint([&](double d) { return f(a + d); }, w, 4.0 * eps * std::abs(a),
                                            opt.stop_above - out.value, opt);
  if (left.exceeded) {
    out.value += left.value;
    out.exceeded = true;
    return out;
  }
  auto right = detail::layer_toward_endpoint([&](double d) { return f(b - d); }, w, 4.0 * eps * std::abs(b),
                                             opt.stop_above - out.value - left.value, opt);
  if (right.exceeded) {
    out.value += left.value + right.value;
    out.exceeded = true;
    return out;
  }
  if (left.diverged || right.diverged || out.value + left.value + right.value > opt.cap) {
    out.diverged = true;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  out.value = std::max(0.0, out.value + left.value + right.value);
  out.error += left.error + right.error;
  return out;
}

}  // namespace pxap::quad
