#pragma once

/// \file
/// Stepanov p(x) diagnostics: window norms of the Bohr lift
/// f^(t) = f(t + .) in L^{p(x)}[0, 1], epsilon-period scans with a
/// relative-density estimate, the asymptotic decomposition check, the
/// sign-function counterexample and the bounded-function and composition
/// checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pxap/exponents.hpp"
#include "pxap/funcspec.hpp"
#include "pxap/modular.hpp"
#include "pxap/quadrature.hpp"

namespace pxap {

struct StepanovConfig {
  double window = 1.0;
  Interval scan_domain{0.0, 100.0};
  double t_step = 0.05;
  double tau_step = 0.01;
  Interval tau_range{0.0, 50.0};
  /// Largest admissible gap between accepted periods; 0 means half the
  /// length of tau_range.
  double density_bound = 0.0;
  /// Recompute accepted periods at half the t step.
  bool refine = true;
  NormOptions norm{};
  /// Quadrature for the accept/reject test rho(Delta / eps) <= 1, which only
  /// needs absolute accuracy near 1.
  ModularOptions scan_modular{quad::LayeredOptions{{1e-12, 1e-9, 400}}};
  /// Norm settings for the per-candidate distances in scan reports.
  NormOptions report_norm{1e-8, 1e15, ModularOptions{quad::LayeredOptions{{1e-12, 1e-9, 400}}}};

  void validate() const {
    if (!(window > 0.0)) throw std::invalid_argument("window length must be positive");
    if (!(t_step > 0.0) || !(tau_step > 0.0)) throw std::invalid_argument("scan steps must be positive");
    if (!(scan_domain.hi >= scan_domain.lo) || !scan_domain.bounded()) throw std::invalid_argument("scan domain must be a bounded interval");
    if (!(tau_range.hi > tau_range.lo) || !tau_range.bounded()) throw std::invalid_argument("tau range must be a bounded interval");
  }
  double effective_density_bound() const { return density_bound > 0.0 ? density_bound : 0.5 * tau_range.length(); }
};

namespace detail {

// Evenly spaced points lo, lo + h, ... up to hi (inclusive within roundoff).
inline std::vector<double> grid(double lo, double hi, double h) {
  std::vector<double> out;
  const long n = static_cast<long>(std::floor((hi - lo) / h + 1e-9));
  out.reserve(static_cast<std::size_t>(n + 1));
  for (long i = 0; i <= n; ++i) out.push_back(lo + h * static_cast<double>(i));
  return out;
}

// Candidate periods: positive multiples of tau_step inside tau_range.
inline std::vector<double> tau_grid(const StepanovConfig& cfg) {
  std::vector<double> out;
  const long first = std::max(1L, static_cast<long>(std::ceil(cfg.tau_range.lo / cfg.tau_step - 1e-9)));
  const long last = static_cast<long>(std::floor(cfg.tau_range.hi / cfg.tau_step + 1e-9));
  for (long k = first; k <= last; ++k) out.push_back(cfg.tau_step * static_cast<double>(k));
  return out;
}

inline void require_coverage(const ScalarFunction& f, double lo, double hi) {
  if (!(f.domain().lo <= lo && f.domain().hi >= hi))
    throw PreconditionError("function " + f.label() + " does not cover [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "]");
}

}  // namespace detail

/// x -> f(t + l x) on [0, 1].
inline ScalarFunction window_of(const ScalarFunction& f, double t, double l = 1.0) {
  return ScalarFunction::composite([f, t, l](double x) { return f(t + l * x); }, Interval{0.0, 1.0},
                                   f.label(), [f, t, l](double a, double b) {
                                     auto k = f.breakpoints(t + l * a, t + l * b);
                                     for (auto& v : k) v = (v - t) / l;
                                     return k;
                                   });
}

/// x -> f(t + tau + l x) - f(t + l x) on [0, 1].
inline ScalarFunction lift_difference(const ScalarFunction& f, double t, double tau, double l = 1.0) {
  return ScalarFunction::composite([f, t, tau, l](double x) { return f(t + tau + l * x) - f(t + l * x); },
                                   Interval{0.0, 1.0}, f.label(), [f, t, tau, l](double a, double b) {
                                     auto k = f.breakpoints(t + l * a, t + l * b);
                                     auto k2 = f.breakpoints(t + tau + l * a, t + tau + l * b);
                                     for (auto& v : k) v = (v - t) / l;
                                     for (auto& v : k2) v = (v - t - tau) / l;
                                     k.insert(k.end(), k2.begin(), k2.end());
                                     return k;
                                   });
}

/// ||f(t + tau + .) - f(t + .)||_{L^{p(x)}[0, 1]}.
inline double bohr_lift_distance(const ScalarFunction& f, double t, double tau, const VariableExponent& p,
                                 double l = 1.0, const NormOptions& opt = {}) {
  return luxemburg_norm(lift_difference(f, t, tau, l), p, {0.0, 1.0}, opt).value;
}

/// Lifted epsilon test at one (t, tau): rho(Delta / eps) <= 1, which is
/// equivalent to distance <= eps. The 1e-12 allowance absorbs quadrature
/// roundoff when |Delta| <= eps holds pointwise with equality.
inline bool lifted_within(const ScalarFunction& f, double t, double tau, const VariableExponent& p, double eps,
                          double l = 1.0, ModularOptions opt = {}) {
  opt.stop_above = 1.0 + 1e-12;
  const auto r = modular(lift_difference(f, t, tau, l), p, {0.0, 1.0}, eps, opt);
  return !r.diverged && !r.exceeded && r.value <= 1.0 + 1e-12;
}

struct StepanovNorm {
  double value = 0.0;
  double argmax_t = 0.0;
};

/// sup over the scan domain of the window norm ||f(t + .)||_{L^{p(x)}[0,1]},
/// sampled at t_step and sharpened by golden-section search near the best
/// samples.
inline StepanovNorm stepanov_norm(const ScalarFunction& f, const VariableExponent& p, const StepanovConfig& cfg) {
  cfg.validate();
  detail::require_coverage(f, cfg.scan_domain.lo, cfg.scan_domain.hi + cfg.window);
  auto window_norm = [&](double t) {
    return luxemburg_norm(window_of(f, t, cfg.window), p, {0.0, 1.0}, cfg.norm).value;
  };
  StepanovNorm out;
  const auto ts = detail::grid(cfg.scan_domain.lo, cfg.scan_domain.hi, cfg.t_step);
  out.value = -1.0;
  for (double t : ts) {
    const double v = window_norm(t);
    if (v > out.value) {
      out.value = v;
      out.argmax_t = t;
    }
    if (std::isinf(v)) return out;
  }
  if (ts.size() > 1) {
    // Golden-section refinement on the neighbouring cell of the best sample.
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = std::max(cfg.scan_domain.lo, out.argmax_t - cfg.t_step);
    double hi = std::min(cfg.scan_domain.hi, out.argmax_t + cfg.t_step);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = window_norm(x1), f2 = window_norm(x2);
    for (int it = 0; it < 60 && hi - lo > 1e-10; ++it) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = window_norm(x2);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = window_norm(x1);
      }
      if (f1 > out.value) {
        out.value = f1;
        out.argmax_t = x1;
      }
      if (f2 > out.value) {
        out.value = f2;
        out.argmax_t = x2;
      }
    }
  }
  return out;
}

enum class Verdict { APConsistent, APViolated, Inconclusive };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::APConsistent: return "AP-consistent";
    case Verdict::APViolated: return "AP-violated";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct PeriodCandidate {
  double tau = 0.0;
  bool accepted = false;
  /// Window start where the test failed (rejected) or the largest modular
  /// was seen (accepted).
  double witness_t = 0.0;
  /// Lifted distance at witness_t.
  double distance = 0.0;
};

struct Witness {
  double t = 0.0;
  double tau = 0.0;
  double distance = 0.0;
};

struct APDiagnosticReport {
  double epsilon = 0.0;
  std::string subject;
  std::vector<double> accepted_periods;
  double max_gap = 0.0;
  std::optional<double> relative_density_l;
  Verdict verdict = Verdict::Inconclusive;
  std::vector<Witness> witnesses;
  std::vector<PeriodCandidate> candidates;
  double t_step = 0.0;
  double tau_step = 0.0;
  bool refinement_stable = true;
  std::string note;
};

namespace detail {

struct ScanOutcome {
  std::vector<PeriodCandidate> candidates;
};

// Tests each tau against every t in `ts`; rejection exits early, starting
// from the window that rejected the previous candidate.
inline ScanOutcome scan_periods(const ScalarFunction& f, const VariableExponent& p, double eps,
                                const std::vector<double>& taus, const std::vector<double>& ts, double l,
                                ModularOptions mopt) {
  ScanOutcome out;
  mopt.stop_above = 1.0 + 1e-12;
  std::size_t hint = 0;
  for (double tau : taus) {
    PeriodCandidate c{tau, true, ts.empty() ? 0.0 : ts.front(), 0.0};
    auto test = [&](std::size_t i) {
      const auto r = modular(lift_difference(f, ts[i], tau, l), p, {0.0, 1.0}, eps, mopt);
      return r.diverged || r.exceeded ? kInf : r.value;
    };
    if (!ts.empty()) {
      double v = test(hint);
      if (!(v <= 1.0 + 1e-12)) {
        c.accepted = false;
        c.witness_t = ts[hint];
      } else {
        double worst = v;
        std::size_t worst_i = hint;
        for (std::size_t i = 0; i < ts.size(); ++i) {
          if (i == hint) continue;
          v = test(i);
          if (!(v <= 1.0 + 1e-12)) {
            c.accepted = false;
            c.witness_t = ts[i];
            hint = i;
            break;
          }
          if (v > worst) {
            worst = v;
            worst_i = i;
          }
        }
        if (c.accepted) c.witness_t = ts[worst_i];
      }
    }
    out.candidates.push_back(c);
  }
  return out;
}

struct GapSummary {
  double max_gap = 0.0;
  double worst_uncovered = 0.0;
  std::pair<double, double> worst_interval{0.0, 0.0};
};

inline GapSummary gaps(const std::vector<double>& accepted, double lo, double hi) {
  GapSummary g;
  double prev = lo;
  auto consider = [&](double a, double b, bool consecutive) {
    if (consecutive) g.max_gap = std::max(g.max_gap, b - a);
    if (b - a > g.worst_uncovered) {
      g.worst_uncovered = b - a;
      g.worst_interval = {a, b};
    }
  };
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    consider(prev, accepted[i], i > 0);
    prev = accepted[i];
  }
  consider(prev, hi, false);
  return g;
}

inline Verdict decide(const std::vector<double>& accepted, const StepanovConfig& cfg, GapSummary& g) {
  g = gaps(accepted, cfg.tau_range.lo, cfg.tau_range.hi);
  if (g.worst_uncovered > cfg.effective_density_bound()) return Verdict::APViolated;
  if (accepted.size() < 2) return Verdict::Inconclusive;
  return Verdict::APConsistent;
}

}  // namespace detail

/// Scans candidate periods tau on the grid of `cfg` and accepts tau when the
/// lifted distance is at most eps at every window start t of the scan grid.
inline APDiagnosticReport epsilon_period_scan(const ScalarFunction& f, const VariableExponent& p, double eps,
                                              const StepanovConfig& cfg) {
  if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
  cfg.validate();
  const auto taus = detail::tau_grid(cfg);
  detail::require_coverage(f, cfg.scan_domain.lo, cfg.scan_domain.hi + (taus.empty() ? 0.0 : taus.back()) + cfg.window);
  APDiagnosticReport rep;
  rep.epsilon = eps;
  rep.subject = f.label();
  rep.t_step = cfg.t_step;
  rep.tau_step = cfg.tau_step;
  const auto ts = detail::grid(cfg.scan_domain.lo, cfg.scan_domain.hi, cfg.t_step);
  if (taus.size() < 2 || ts.empty()) {
    rep.verdict = Verdict::Inconclusive;
    rep.note = "degenerate scan grid";
    return rep;
  }
  auto scan = detail::scan_periods(f, p, eps, taus, ts, cfg.window, cfg.scan_modular);
  rep.candidates = std::move(scan.candidates);
  for (auto& c : rep.candidates) {
    c.distance = bohr_lift_distance(f, c.witness_t, c.tau, p, cfg.window, cfg.report_norm);
    if (c.accepted) rep.accepted_periods.push_back(c.tau);
  }
  detail::GapSummary g;
  rep.verdict = detail::decide(rep.accepted_periods, cfg, g);
  rep.max_gap = g.max_gap;
  if (rep.accepted_periods.size() >= 2) rep.relative_density_l = 1.5 * g.max_gap;
  if (rep.verdict == Verdict::APViolated) {
    // Witness: the rejected candidate nearest the middle of the widest
    // uncovered interval.
    const double mid = 0.5 * (g.worst_interval.first + g.worst_interval.second);
    const PeriodCandidate* best = nullptr;
    for (const auto& c : rep.candidates)
      if (!c.accepted && (!best || std::abs(c.tau - mid) < std::abs(best->tau - mid))) best = &c;
    if (best) rep.witnesses.push_back({best->witness_t, best->tau, best->distance});
  }
  if (cfg.refine && !rep.accepted_periods.empty()) {
    // The half-step grid adds the midpoints of the coarse one; only accepted
    // periods can change status and only the new windows need testing.
    std::vector<double> fine;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) fine.push_back(0.5 * (ts[i] + ts[i + 1]));
    auto again = detail::scan_periods(f, p, eps, rep.accepted_periods, fine, cfg.window, cfg.scan_modular);
    std::vector<double> kept;
    for (const auto& c : again.candidates)
      if (c.accepted) kept.push_back(c.tau);
    detail::GapSummary g2;
    const Verdict v2 = detail::decide(kept, cfg, g2);
    rep.refinement_stable = v2 == rep.verdict;
    if (!rep.refinement_stable) {
      rep.note = "verdict changed under t-grid refinement";
      rep.verdict = Verdict::Inconclusive;
    }
  }
  return rep;
}

/// Periods accepted by the pointwise test sup_s |f(s + tau) - f(s)| <= eps
/// over the union of the scan windows.
inline std::vector<double> sup_norm_periods(const ScalarFunction& f, double eps, const StepanovConfig& cfg) {
  cfg.validate();
  std::vector<double> out;
  const double lo = cfg.scan_domain.lo, hi = cfg.scan_domain.hi + cfg.window;
  const int n = std::max(64, static_cast<int>(std::ceil((hi - lo) / (0.25 * cfg.t_step))));
  for (double tau : detail::tau_grid(cfg)) {
    const double d = grid_sup([&](double s) { return std::abs(f(s + tau) - f(s)); }, lo, hi, {}, n);
    if (d <= eps) out.push_back(tau);
  }
  return out;
}

struct AapSplitReport {
  APDiagnosticReport g_report;
  /// (t, ||q||_{L^{p(x)}[t, t+1]}) on the tail grid.
  std::vector<std::pair<double, double>> q_norms;
  std::vector<double> tolerances;
  bool q_vanishes = false;
  bool passes = false;
};

/// f = g + q with g almost periodic and the windowed norm of q tending to 0.
/// q_vanishes holds when, for each tolerance, the windowed norms stay below
/// it from some grid point on.
inline AapSplitReport aap_split_check(const ScalarFunction& g, const ScalarFunction& q, const VariableExponent& p,
                                      double eps, const StepanovConfig& cfg,
                                      std::vector<double> tolerances = {1e-1, 1e-2, 1e-3}, double tail_step = 1.0) {
  AapSplitReport rep;
  rep.g_report = epsilon_period_scan(g, p, eps, cfg);
  rep.tolerances = tolerances;
  for (double t : detail::grid(cfg.scan_domain.lo, cfg.scan_domain.hi, tail_step))
    rep.q_norms.emplace_back(t, luxemburg_norm(window_of(q, t, cfg.window), p, {0.0, 1.0}, cfg.norm).value);
  rep.q_vanishes = true;
  for (double tol : tolerances) {
    // A tail of the grid stays below tol exactly when the last window does.
    if (rep.q_norms.empty() || !(rep.q_norms.back().second < tol)) rep.q_vanishes = false;
  }
  rep.passes = rep.q_vanishes && rep.g_report.verdict == Verdict::APConsistent;
  return rep;
}

/// sin x + sin(sqrt(2) x).
inline double quasi_periodic(double x) { return std::sin(x) + std::sin(std::numbers::sqrt2 * x); }

struct CounterexampleRow {
  double delta = 0.0;
  double value = 0.0;
  /// value / value at the previous delta (0 for the first row).
  double growth = 0.0;
};

struct CounterexampleReport {
  double lambda = 0.0;
  double t = 0.0;
  double tau = 0.0;
  /// sign(F(t + tau)) * sign(F(t)) < 0 is required.
  double product = 0.0;
  std::vector<CounterexampleRow> rows;
  /// Predicted growth per decade, 10^{ln(2/lambda) - 1}.
  double predicted_growth = 0.0;
};

/// First (t, tau) on a fixed search grid with F(t + tau) F(t) < 0 and both
/// values at least 0.2 in magnitude, F = sin x + sin(sqrt(2) x).
inline std::pair<double, double> find_sign_flip_pair() {
  for (int k = 1; k <= 20; ++k) {
    const double tau = 0.5 * k;
    for (int i = 0; i <= 2000; ++i) {
      const double t = 0.01 * i;
      const double a = quasi_periodic(t), b = quasi_periodic(t + tau);
      if (a * b < 0.0 && std::abs(a) >= 0.2 && std::abs(b) >= 0.2) return {t, tau};
    }
  }
  throw std::logic_error("no sign-flip pair found");
}

/// Truncations to [delta, 1] of
/// int_0^1 (1/lambda)^{1 - ln x} |sign F(x + t + tau) - sign F(x + t)|^{1 - ln x} dx.
inline CounterexampleReport counterexample_divergence(double lambda, double t, double tau,
                                                      const std::vector<double>& deltas) {
  const double limit = 2.0 / std::numbers::e;
  if (!(lambda > 0.0 && lambda < limit)) throw PreconditionError("lambda must lie in (0, 2/e)");
  CounterexampleReport rep;
  rep.lambda = lambda;
  rep.t = t;
  rep.tau = tau;
  rep.product = quasi_periodic(t + tau) * quasi_periodic(t);
  if (!(rep.product < 0.0)) throw PreconditionError("F(t + tau) F(t) must be negative");
  rep.predicted_growth = std::pow(10.0, std::log(2.0 / lambda) - 1.0);
  auto jump = [&](double x) { return std::abs(sign(quasi_periodic(x + t + tau)) - sign(quasi_periodic(x + t))); };
  auto integrand = [&](double x) {
    const double d = jump(x);
    if (d == 0.0) return 0.0;
    return std::pow(d / lambda, 1.0 - std::log(x));
  };
  for (double delta : deltas) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    std::vector<double> cuts{delta, 1.0};
    for (double r : find_crossings([&](double x) { return quasi_periodic(x + t); }, delta, 1.0)) cuts.push_back(r);
    for (double r : find_crossings([&](double x) { return quasi_periodic(x + t + tau); }, delta, 1.0)) cuts.push_back(r);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      // Geometric split toward the left end resolves the x^{-ln(2/lambda)} growth.
      double a = cuts[i];
      const double b = cuts[i + 1];
      while (a < b) {
        const double c = std::min(b, 10.0 * a);
        total += quad::integrate<double>(integrand, a, c, {0.0, 1e-13, 200}).value;
        a = c;
      }
    }
    CounterexampleRow row{delta, total, rep.rows.empty() ? 0.0 : total / rep.rows.back().value};
    rep.rows.push_back(row);
  }
  return rep;
}

struct UpgradeReport {
  double sup_norm = 0.0;
  double p = 0.0;
  int points = 0;
  int violations = 0;
  /// Largest lhs - rhs seen (negative when the inequality holds strictly).
  double worst_excess = 0.0;
  double worst_t = 0.0;
  double worst_tau = 0.0;
  /// Periods whose S^1 distance is at most eps, and the bound that implies for
  /// the S^p distance.
  std::vector<double> s1_periods;
  double implied_bound = 0.0;
  bool passes = false;
};

/// For each (t, tau) of the scan grid: the S^p window distance is at most
/// (2 ||f||_inf)^{(p-1)/p} (S^1 window distance)^{1/p}.
inline UpgradeReport bounded_upgrade_check(const ScalarFunction& f, double p_target, double eps,
                                           const StepanovConfig& cfg, double tol = 1e-8) {
  if (!(p_target > 1.0)) throw std::invalid_argument("target exponent must exceed 1");
  cfg.validate();
  const auto taus = detail::tau_grid(cfg);
  const auto ts = detail::grid(cfg.scan_domain.lo, cfg.scan_domain.hi, cfg.t_step);
  const double span_hi = cfg.scan_domain.hi + (taus.empty() ? 0.0 : taus.back()) + cfg.window;
  detail::require_coverage(f, cfg.scan_domain.lo, span_hi);
  UpgradeReport rep;
  rep.p = p_target;
  rep.sup_norm = grid_sup([&](double x) { return std::abs(f(x)); }, cfg.scan_domain.lo, span_hi, {},
                          std::max(2048, static_cast<int>(64.0 * (span_hi - cfg.scan_domain.lo))));
  const double factor = std::pow(2.0 * rep.sup_norm, (p_target - 1.0) / p_target);
  rep.implied_bound = factor * std::pow(eps, 1.0 / p_target);
  rep.worst_excess = -kInf;
  const auto one = VariableExponent::constant(1.0);
  const auto pe = VariableExponent::constant(p_target);
  for (double tau : taus) {
    bool s1_ok = true;
    for (double t : ts) {
      const auto diff = lift_difference(f, t, tau, cfg.window);
      const double dp = luxemburg_norm(diff, pe, {0.0, 1.0}, cfg.norm).value;
      const double d1 = luxemburg_norm(diff, one, {0.0, 1.0}, cfg.norm).value;
      const double rhs = factor * std::pow(d1, 1.0 / p_target);
      const double excess = dp - rhs;
      ++rep.points;
      if (excess > rep.worst_excess) {
        rep.worst_excess = excess;
        rep.worst_t = t;
        rep.worst_tau = tau;
      }
      if (excess > tol) ++rep.violations;
      if (d1 > eps) s1_ok = false;
    }
    if (s1_ok) rep.s1_periods.push_back(tau);
  }
  rep.passes = rep.violations == 0;
  return rep;
}

struct CompositionReport {
  bool lipschitz_ok = true;
  int lipschitz_samples = 0;
  /// Hypothesis on r: r >= max(p, p/(p - 1)) on [0, 1].
  bool exponent_hypothesis = true;
  /// The Stepanov r-norm of L_f over the scan does not grow.
  bool lipschitz_bound_bounded = true;
  double lipschitz_norm_first = 0.0;
  double lipschitz_norm_last = 0.0;
  std::string q_label;
  APDiagnosticReport u_report;
  APDiagnosticReport composed_report;
  std::vector<std::string> warnings;
  bool passes = false;
};

/// Scans t -> f2(t, u(t)) at exponent q = pr/(p + r) after checking the
/// Lipschitz bound |f2(t, x) - f2(t, y)| <= L_f(t)|x - y| on random samples.
inline CompositionReport composition_ap_check(const std::function<double(double, double)>& f2,
                                              const ScalarFunction& lf, const ScalarFunction& u,
                                              const VariableExponent& p, const VariableExponent& r, double eps,
                                              const StepanovConfig& cfg, std::uint64_t seed = 20240601) {
  cfg.validate();
  CompositionReport rep;
  const double t_lo = cfg.scan_domain.lo;
  const double t_hi = cfg.scan_domain.hi + cfg.tau_range.hi + cfg.window;
  const double umax = grid_sup([&](double x) { return std::abs(u(x)); }, t_lo, t_hi, {}, 4096);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(t_lo, t_hi), ux(-(1.0 + umax), 1.0 + umax);
  for (int i = 0; i < 2000; ++i) {
    const double t = ut(rng), x = ux(rng), y = ux(rng);
    ++rep.lipschitz_samples;
    const double lhs = std::abs(f2(t, x) - f2(t, y));
    const double rhs = lf(t) * std::abs(x - y);
    if (lhs > rhs * (1.0 + 1e-12) + 1e-14)
      throw PreconditionError("Lipschitz bound fails at t = " + std::to_string(t));
  }
  rep.exponent_hypothesis = composition_exponent(p, r).hypothesis_holds;
  if (!rep.exponent_hypothesis) rep.warnings.push_back("r < max(p, p/(p-1)) somewhere on [0, 1]");

  StepanovConfig quarter = cfg;
  const double len = cfg.scan_domain.length();
  quarter.scan_domain = {cfg.scan_domain.lo, cfg.scan_domain.lo + 0.25 * len};
  rep.lipschitz_norm_first = stepanov_norm(lf, r, quarter).value;
  quarter.scan_domain = {cfg.scan_domain.hi - 0.25 * len, cfg.scan_domain.hi};
  rep.lipschitz_norm_last = stepanov_norm(lf, r, quarter).value;
  rep.lipschitz_bound_bounded = rep.lipschitz_norm_last <= 1.25 * rep.lipschitz_norm_first + 1e-12;
  if (!rep.lipschitz_bound_bounded) rep.warnings.push_back("L_f appears unbounded in the Stepanov r-norm");

  rep.u_report = epsilon_period_scan(u, p, eps, cfg);
  if (rep.u_report.verdict != Verdict::APConsistent) rep.warnings.push_back("u is not AP-consistent at exponent p");

  const auto q = composition_exponent(p, r).q;
  rep.q_label = q.label();
  const auto composed = ScalarFunction::composite([f2, u](double t) { return f2(t, u(t)); }, u.domain(),
                                                  "f(t,u(t))", [u](double a, double b) { return u.breakpoints(a, b); });
  rep.composed_report = epsilon_period_scan(composed, q, eps, cfg);
  rep.passes = rep.warnings.empty() && rep.composed_report.verdict == Verdict::APConsistent;
  return rep;
}

}  // namespace pxap
