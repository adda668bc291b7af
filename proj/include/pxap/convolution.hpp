#pragma once

/// \file
/// Convolutions against operator kernels: the infinite product
/// G(t) = int_{-inf}^t R(t-s) g(s) ds in unit windows, the finite product
/// H(t) = int_0^t R(t-s) f(s) ds on a graded mesh, kernel summability, the
/// mild solution of D^gamma u = A u + f and its Caputo residual.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pxap/exponents.hpp"
#include "pxap/funcspec.hpp"
#include "pxap/modular.hpp"
#include "pxap/operators.hpp"
#include "pxap/quadrature.hpp"
#include "pxap/specfun.hpp"
#include "pxap/stepanov.hpp"

namespace pxap {

class ConvolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = Eigen::VectorXd;

/// t -> R(t) for t > 0 with R(t) ~ t^sigma near 0.
struct Kernel {
  std::function<RMatrix(double)> value;
  Eigen::Index dimension = 1;
  double sigma = 0.0;
  std::string label;

  static Kernel matrix(std::function<RMatrix(double)> f, Eigen::Index n, std::string label, double sigma = 0.0) {
    return Kernel{std::move(f), n, sigma, std::move(label)};
  }

  static Kernel scalar(std::function<double(double)> f, std::string label, double sigma = 0.0) {
    return matrix([f = std::move(f)](double t) { return RMatrix::Constant(1, 1, f(t)); }, 1, std::move(label), sigma);
  }

  /// R_gamma of a subordinated family, with sigma = gamma beta - 1.
  static Kernel resolvent_family(std::shared_ptr<const SubordinatedFamily> fam) {
    const double beta = fam->op().claim() ? fam->op().claim()->beta : 1.0;
    const double sigma = fam->gamma() * beta - 1.0;
    const auto n = fam->op().dimension();
    return Kernel{[fam](double t) { return fam->R(t); }, n, sigma, "R_gamma"}.memoized();
  }

  /// The semigroup itself, the kernel of the gamma = 1 problem.
  static Kernel semigroup(std::shared_ptr<const Semigroup> T, Eigen::Index n) {
    return Kernel{[T](double t) { return (*T)(t); }, n, 0.0, "T"}.memoized();
  }

  /// Same kernel with values cached by argument.
  Kernel memoized() const {
    auto cache = std::make_shared<std::unordered_map<double, RMatrix>>();
    auto f = value;
    return Kernel{[cache, f](double t) {
                    auto it = cache->find(t);
                    if (it != cache->end()) return it->second;
                    RMatrix v = f(t);
                    cache->emplace(t, v);
                    return v;
                  },
                  dimension, sigma, label};
  }

  void require_integrable() const {
    if (!(sigma > -1.0)) throw ConvolutionError("kernel " + label + " has a nonintegrable singularity at 0");
  }
};

enum class TailModel { None, Exponential, Power };

inline const char* tail_model_name(TailModel m) {
  switch (m) {
    case TailModel::None: return "none";
    case TailModel::Exponential: return "exponential";
    case TailModel::Power: return "power";
  }
  return "?";
}

struct KernelSum {
  /// ||R(. + k)||_{L^{q(x)}[0,1]} for k = 0..K.
  std::vector<double> terms;
  /// Partial sum plus tail bound.
  double M = 0.0;
  double partial = 0.0;
  double tail_bound = 0.0;
  TailModel tail_model = TailModel::None;
  /// Fitted decay: log-rate per unit k (exponential) or power of k.
  double fit_rate = 0.0;
  bool summable = true;
  std::string note;
};

namespace detail {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double sse = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LineFit f;
  const double den = n * sxx - sx * sx;
  f.slope = den > 0.0 ? (n * sxy - sx * sy) / den : 0.0;
  f.intercept = (sy - f.slope * sx) / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    f.sse += r * r;
  }
  return f;
}

inline ScalarFunction window_norm_function(const Kernel& R, int k) {
  auto f = R.value;
  return ScalarFunction::composite(
      [f, k](double x) {
        const double s = x + k;
        if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
        return spectral_norm(f(s));
      },
      {0.0, 1.0}, "|" + R.label + "(.+" + std::to_string(k) + ")|");
}

}  // namespace detail

/// Window norms of R against q for k = 0..K, their sum and a tail bound from
/// the better of an exponential and a power fit over the last ten terms.
inline KernelSum kernel_sum(const Kernel& R, const VariableExponent& q, int K = 40, const NormOptions& opt = {}) {
  if (K < 2) throw std::invalid_argument("kernel_sum needs K >= 2");
  KernelSum out;
  for (int k = 0; k <= K; ++k) {
    const auto n = luxemburg_norm(detail::window_norm_function(R, k), q, {0.0, 1.0}, opt);
    out.terms.push_back(n.value);
    if (n.infinite()) {
      out.summable = false;
      out.M = std::numeric_limits<double>::infinity();
      out.note = "window k = " + std::to_string(k) + " has infinite norm";
      return out;
    }
    out.partial += n.value;
  }
  const std::size_t m = std::min<std::size_t>(10, out.terms.size() - 1);
  const std::size_t first = out.terms.size() - m;
  if (std::all_of(out.terms.begin() + first, out.terms.end(), [](double v) { return v == 0.0; })) {
    out.M = out.partial;
    out.note = "kernel vanishes on the last windows";
    return out;
  }
  std::vector<double> xe, xp, y;
  for (std::size_t i = first; i < out.terms.size(); ++i) {
    if (!(out.terms[i] > 0.0)) continue;
    xe.push_back(static_cast<double>(i));
    xp.push_back(std::log(static_cast<double>(i)));
    y.push_back(std::log(out.terms[i]));
  }
  if (y.size() < 3) {
    out.summable = false;
    out.M = std::numeric_limits<double>::infinity();
    out.note = "too few nonzero tail terms to fit";
    return out;
  }
  const auto fe = detail::fit_line(xe, y);
  const auto fp = detail::fit_line(xp, y);
  const double kk = static_cast<double>(K);
  if (fe.sse <= fp.sse) {
    out.tail_model = TailModel::Exponential;
    out.fit_rate = fe.slope;
    if (fe.slope < -1e-6) {
      out.tail_bound = std::exp(fe.intercept + fe.slope * (kk + 1.0)) / (1.0 - std::exp(fe.slope));
    } else {
      out.summable = false;
    }
  } else {
    out.tail_model = TailModel::Power;
    out.fit_rate = fp.slope;
    if (fp.slope < -1.0) {
      // sum_{k > K} C k^b <= int_K^inf C x^b dx.
      out.tail_bound = std::exp(fp.intercept) * std::pow(kk, fp.slope + 1.0) / (-fp.slope - 1.0);
    } else {
      out.summable = false;
    }
  }
  if (!out.summable) {
    out.M = std::numeric_limits<double>::infinity();
    out.note = "window norms do not decay";
    return out;
  }
  out.M = out.partial + out.tail_bound;
  return out;
}

/// Values on a time grid with per-point error estimates.
struct Trajectory {
  std::vector<double> t;
  std::vector<Vector> values;
  std::vector<double> error;

  void validate() const {
    if (t.size() != values.size() || t.size() != error.size()) throw std::invalid_argument("trajectory arrays differ in length");
    for (std::size_t i = 1; i < t.size(); ++i)
      if (!(t[i] > t[i - 1])) throw std::invalid_argument("trajectory grid must be strictly increasing");
    for (const auto& v : values)
      if (!v.allFinite()) throw std::invalid_argument("trajectory values must be finite");
  }
};

struct ConvolutionValue {
  Vector value;
  double error = 0.0;
};

namespace detail {

inline Vector default_direction(const Vector& x, Eigen::Index n) {
  if (x.size() == 0) return Vector::Ones(n);
  if (x.size() != n) throw std::invalid_argument("direction vector has the wrong dimension");
  return x;
}

// int_0^1 R(s + k) x g(t - s - k) ds, split at kinks of g; the first window
// of a singular kernel uses s = v^m, m = 1 / (1 + sigma).
inline ConvolutionValue window_integral(const Kernel& R, const ScalarFunction& g, double t, int k, const Vector& x,
                                        const quad::AdaptiveOptions& ad) {
  const double m = (k == 0 && R.sigma < 0.0) ? 1.0 / (1.0 + R.sigma) : 1.0;
  auto to_v = [m](double s) { return m == 1.0 ? s : std::pow(s, 1.0 / m); };
  std::vector<double> cuts{0.0, 1.0};
  for (double b : g.breakpoints(t - k - 1.0, t - k)) cuts.push_back(to_v(t - k - b));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  ConvolutionValue out{Vector::Zero(R.dimension), 0.0};
  auto integrand = [&](double v) -> Vector {
    const double s = m == 1.0 ? v : std::pow(v, m);
    const double jac = m == 1.0 ? 1.0 : m * std::pow(v, m - 1.0);
    return R.value(s + k) * x * (g(t - s - k) * jac);
  };
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (!(cuts[i + 1] > cuts[i])) continue;
    auto r = quad::integrate<Vector>(integrand, cuts[i], cuts[i + 1], ad);
    out.value += r.value;
    out.error += r.error;
  }
  return out;
}

}  // namespace detail

struct InfiniteOptions {
  int K = 40;
  quad::AdaptiveOptions adaptive{1e-14, 1e-12, 200};
  NormOptions norm{};
  /// Domain scanned for the Stepanov bound of g(-x).
  StepanovConfig bound_scan{};
  /// Skip the scan and use this bound.
  std::optional<double> g_bound;
};

/// G(t) = sum_{k=0}^K int_0^1 R(s + k) g(t - s - k) x ds, with the remainder
/// bounded by 2 * (kernel tail) * sup_t ||g(-(. - t))||_{L^{p(x)}[0,1]}, p the
/// conjugate of q.
class InfiniteConvolution {
 public:
  InfiniteConvolution(Kernel R, ScalarFunction g, VariableExponent q, InfiniteOptions opt = {})
      : R_(std::move(R)), g_(std::move(g)), q_(std::move(q)), p_(conjugate(q_)), opt_(std::move(opt)) {
    R_.require_integrable();
    sum_ = kernel_sum(R_, q_, opt_.K, opt_.norm);
    if (!sum_.summable) throw ConvolutionError("kernel " + R_.label + " is not summable: " + sum_.note);
    if (opt_.g_bound) {
      g_bound_ = *opt_.g_bound;
    } else {
      g_bound_ = stepanov_norm(g_.reflected(), p_, opt_.bound_scan).value;
    }
  }

  const KernelSum& kernel() const { return sum_; }
  double M() const { return sum_.M; }
  double g_bound() const { return g_bound_; }
  double tail_bound() const { return 2.0 * sum_.tail_bound * g_bound_; }
  const ScalarFunction& g() const { return g_; }
  const VariableExponent& q() const { return q_; }
  const VariableExponent& p() const { return p_; }
  int K() const { return opt_.K; }

  ConvolutionValue operator()(double t, const Vector& x = {}) const {
    const Vector dir = detail::default_direction(x, R_.dimension);
    ConvolutionValue out{Vector::Zero(R_.dimension), 0.0};
    for (int k = 0; k <= opt_.K; ++k) {
      const auto w = detail::window_integral(R_, g_, t, k, dir, opt_.adaptive);
      out.value += w.value;
      out.error += w.error;
    }
    out.error += tail_bound() * dir.lpNorm<Eigen::Infinity>();
    return out;
  }

 private:
  Kernel R_;
  ScalarFunction g_;
  VariableExponent q_;
  VariableExponent p_;
  InfiniteOptions opt_;
  KernelSum sum_;
  double g_bound_ = 0.0;
};

inline ConvolutionValue infinite_convolution(const Kernel& R, const ScalarFunction& g, double t, int K = 40,
                                             const VariableExponent& q = VariableExponent::constant(2.0)) {
  InfiniteOptions opt;
  opt.K = K;
  return InfiniteConvolution(R, g, q, opt)(t);
}

struct APTransferRow {
  double tau = 0.0;
  double t = 0.0;
  double difference = 0.0;
};

struct APTransferReport {
  bool applicable = true;
  std::string subject;
  std::string note;
  Verdict scan_verdict = Verdict::Inconclusive;
  double epsilon = 0.0;
  double M = 0.0;
  /// 2 M epsilon.
  double bound = 0.0;
  double slack = 0.0;
  int checks = 0;
  double max_difference = 0.0;
  std::vector<double> taus;
  std::vector<APTransferRow> violations;
};

/// ||G(t + tau) - G(t)|| <= 2 M eps + slack for every tau of a scan of
/// g(-x) and every t on the grid. A scan whose verdict is not AP-consistent
/// makes the check inapplicable.
inline APTransferReport ap_transfer_check(const InfiniteConvolution& G, double eps, const APDiagnosticReport& scan,
                                          const std::vector<double>& t_grid, double slack = 1e-7) {
  APTransferReport rep;
  rep.subject = scan.subject;
  rep.scan_verdict = scan.verdict;
  rep.epsilon = eps;
  rep.M = G.M();
  rep.bound = 2.0 * G.M() * eps;
  rep.slack = slack;
  if (scan.verdict != Verdict::APConsistent) {
    rep.applicable = false;
    rep.note = "scan of " + scan.subject + " is " + verdict_name(scan.verdict) + "; hypothesis unmet";
    return rep;
  }
  rep.taus = scan.accepted_periods;
  std::unordered_map<double, Vector> cache;
  auto at = [&](double t) -> const Vector& {
    auto it = cache.find(t);
    if (it == cache.end()) it = cache.emplace(t, G(t).value).first;
    return it->second;
  };
  for (double tau : rep.taus) {
    for (double t : t_grid) {
      const double d = (at(t + tau) - at(t)).lpNorm<Eigen::Infinity>();
      ++rep.checks;
      rep.max_difference = std::max(rep.max_difference, d);
      if (!(d <= rep.bound + slack)) rep.violations.push_back({tau, t, d});
    }
  }
  return rep;
}

/// Runs the period scan on the reflection g(-x) first.
inline APTransferReport ap_transfer_check(const InfiniteConvolution& G, const VariableExponent& p, double eps,
                                          const StepanovConfig& cfg, const std::vector<double>& t_grid,
                                          double slack = 1e-7) {
  const auto scan = epsilon_period_scan(G.g().reflected(), p, eps, cfg);
  return ap_transfer_check(G, eps, scan, t_grid, slack);
}

struct ContinuityRow {
  double delta = 0.0;
  /// sup_t ||g(-(. - t) - delta) - g(-(. - t))|| over the scan grid.
  double omega = 0.0;
  double max_difference = 0.0;
  bool holds = true;
};

/// |G(t + delta) - G(t)| <= 2 M omega(delta) + slack, with omega the scanned
/// lifted modulus of continuity of g(-x).
inline std::vector<ContinuityRow> continuity_check(const InfiniteConvolution& G, const std::vector<double>& deltas,
                                                   const std::vector<double>& t_grid, const StepanovConfig& cfg,
                                                   double slack = 1e-7) {
  const auto gr = G.g().reflected();
  std::vector<ContinuityRow> out;
  for (double d : deltas) {
    ContinuityRow row;
    row.delta = d;
    // The reflection turns G(t + d) - G(t) into a shift of g(-x) by -d.
    for (double t : detail::grid(cfg.scan_domain.lo, cfg.scan_domain.hi, cfg.t_step))
      row.omega = std::max(row.omega, bohr_lift_distance(gr, t, -d, G.p(), cfg.window, cfg.report_norm));
    for (double t : t_grid) {
      const double diff = (G(t + d).value - G(t).value).lpNorm<Eigen::Infinity>();
      row.max_difference = std::max(row.max_difference, diff);
    }
    row.holds = row.max_difference <= 2.0 * G.M() * row.omega + slack;
    out.push_back(row);
  }
  return out;
}

/// H(t) = int_0^t R(u) f(t - u) x du with u = t v^(1/(1+sigma)), which
/// clusters nodes at the kernel singularity.
inline ConvolutionValue finite_convolution(const Kernel& R, const ScalarFunction& f, double t, const Vector& x = {},
                                           const quad::AdaptiveOptions& ad = {1e-14, 1e-12, 400}) {
  if (!(t >= 0.0)) throw std::invalid_argument("finite_convolution needs t >= 0");
  R.require_integrable();
  const Vector dir = detail::default_direction(x, R.dimension);
  ConvolutionValue out{Vector::Zero(R.dimension), 0.0};
  if (t == 0.0) return out;
  const double m = 1.0 / (1.0 + R.sigma);
  std::vector<double> cuts{0.0, 1.0};
  for (double b : f.breakpoints(0.0, t)) cuts.push_back(std::pow((t - b) / t, 1.0 / m));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  auto integrand = [&](double v) -> Vector {
    const double u = t * std::pow(v, m);
    const double jac = t * m * std::pow(v, m - 1.0);
    return R.value(u) * dir * (f(t - u) * jac);
  };
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (!(cuts[i + 1] > cuts[i])) continue;
    auto r = quad::integrate<Vector>(integrand, cuts[i], cuts[i + 1], ad);
    out.value += r.value;
    out.error += r.error;
  }
  return out;
}

/// True for an expression that prints as the constant 0.
inline bool is_zero_function(const ScalarFunction& f) {
  const FuncExpr* e = f.expr();
  return e != nullptr && e->print() == "0";
}

struct DfpOptions {
  /// Direction b of the forcing f(t) b; empty means all ones.
  Vector forcing_direction;
  SubordinationOptions subordination{};
  quad::AdaptiveOptions adaptive{1e-14, 1e-12, 400};
};

/// u(t) = S_gamma(t) x0 + int_0^t R_gamma(t - s) f(s) b ds; gamma = 1 uses
/// T(t) in both places. The convolution is skipped when f is identically 0.
inline Trajectory solve_dfp(const OperatorFamily& op, double gamma, const Vector& x0, const ScalarFunction& f,
                            const std::vector<double>& t_grid, const DfpOptions& opt = {}) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("solve_dfp needs gamma in (0, 1]");
  if (x0.size() != op.dimension()) throw std::invalid_argument("initial value has the wrong dimension");
  if (op.claim()) {
    const auto rep = verify_condition_P(op);
    if (!rep.passed) throw PreconditionError("condition (P) fails: " + rep.failure);
  }
  const Vector b = detail::default_direction(opt.forcing_direction, op.dimension());
  const bool forced = !is_zero_function(f);
  std::shared_ptr<const SubordinatedFamily> fam;
  std::shared_ptr<const Semigroup> T;
  std::optional<Kernel> kernel;
  if (gamma < 1.0) {
    fam = std::make_shared<SubordinatedFamily>(op, gamma, opt.subordination);
    if (forced) kernel = Kernel::resolvent_family(fam);
  } else {
    T = std::make_shared<Semigroup>(op, opt.subordination.contour);
    if (forced) kernel = Kernel::semigroup(T, op.dimension());
  }
  Trajectory out;
  for (double t : t_grid) {
    if (!(t >= 0.0)) throw std::invalid_argument("solve_dfp grid must be nonnegative");
    Vector u;
    double err = 0.0;
    if (t == 0.0) {
      u = x0;
    } else {
      u = (gamma < 1.0 ? fam->S(t) : (*T)(t)) * x0;
      if (forced) {
        const auto h = finite_convolution(*kernel, f, t, b, opt.adaptive);
        u += h.value;
        err = h.error;
      }
    }
    out.t.push_back(t);
    out.values.push_back(u);
    out.error.push_back(err);
  }
  out.validate();
  return out;
}

struct CaputoResidual {
  std::vector<double> t;
  std::vector<double> residual;
  double max() const { return residual.empty() ? 0.0 : *std::max_element(residual.begin(), residual.end()); }
};

/// ||D^gamma u(t) - A u(t) - f(t) b|| at interior grid points. D^gamma is
/// d/dt of g_{1-gamma} * (u - u(0)) with u piecewise linear, integrated
/// exactly against the kernel and differentiated by three-point differences.
inline CaputoResidual caputo_residual(const Trajectory& u, const OperatorFamily& op, double gamma,
                                      const ScalarFunction& f, const Vector& forcing_direction = {}) {
  if (op.is_pencil()) throw ConvolutionError("caputo_residual is unsupported for pencils (needs a selection of the inclusion)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("caputo_residual needs gamma in (0, 1]");
  u.validate();
  const std::size_t n = u.t.size();
  if (n < 3) throw PreconditionError("caputo_residual needs at least three grid points");
  for (std::size_t i = 1; i < n; ++i)
    if (u.t[i] - u.t[i - 1] > 1e-3 * (1.0 + 1e-9))
      throw PreconditionError("caputo_residual needs grid steps <= 1e-3");
  const Vector b = detail::default_direction(forcing_direction, op.dimension());
  const RMatrix& A = op.A();
  std::vector<Vector> I(n, Vector::Zero(op.dimension()));
  if (gamma == 1.0) {
    for (std::size_t i = 0; i < n; ++i) I[i] = u.values[i] - u.values[0];
  } else {
    const double a1 = 1.0 - gamma, a2 = 2.0 - gamma;
    const double rg = specfun::reciprocal_gamma(a1);
    for (std::size_t i = 1; i < n; ++i) {
      Vector acc = Vector::Zero(op.dimension());
      for (std::size_t j = 0; j < i; ++j) {
        const double lo = u.t[i] - u.t[j + 1], hi = u.t[i] - u.t[j];
        const double h = u.t[j + 1] - u.t[j];
        const double m0 = (std::pow(hi, a1) - std::pow(lo, a1)) / a1;
        // int_lo^hi r^-gamma (hi - r) dr: weight of the slope term.
        const double m1 = hi * m0 - (std::pow(hi, a2) - std::pow(lo, a2)) / a2;
        const Vector w0 = u.values[j] - u.values[0];
        const Vector dw = (u.values[j + 1] - u.values[j]) / h;
        acc += w0 * m0 + dw * m1;
      }
      I[i] = acc * rg;
    }
  }
  CaputoResidual out;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hm = u.t[i] - u.t[i - 1], hp = u.t[i + 1] - u.t[i];
    const Vector d = (hm * hm * I[i + 1] - hp * hp * I[i - 1] + (hp * hp - hm * hm) * I[i]) / (hm * hp * (hm + hp));
    const Vector r = d - A * u.values[i] - f(u.t[i]) * b;
    out.t.push_back(u.t[i]);
    out.residual.push_back(r.lpNorm<Eigen::Infinity>());
  }
  return out;
}

struct WindowedDecay {
  std::string subject;
  /// (t, ||h(t + .)||_{L^{r(x)}[0,1]}) on the grid.
  std::vector<std::pair<double, double>> norms;
  double tolerance = 0.0;
  /// The last window norm is below the tolerance and the norms do not
  /// increase over the second half of the grid.
  bool vanishes = false;
};

/// Window norms of a scalar function h on [t, t + 1] for t on the grid, the
/// shape of the decay hypotheses on the forced part and on t -> m_t.
inline WindowedDecay windowed_decay(const ScalarFunction& h, const VariableExponent& r,
                                    const std::vector<double>& t_grid, double tolerance,
                                    const NormOptions& opt = {}) {
  if (t_grid.size() < 2) throw std::invalid_argument("windowed_decay needs at least two grid points");
  WindowedDecay out;
  out.subject = h.label();
  out.tolerance = tolerance;
  for (double t : t_grid) out.norms.emplace_back(t, luxemburg_norm(window_of(h, t), r, {0.0, 1.0}, opt).value);
  bool monotone = true;
  for (std::size_t i = out.norms.size() / 2 + 1; i < out.norms.size(); ++i)
    if (out.norms[i].second > out.norms[i - 1].second * (1.0 + 1e-9)) monotone = false;
  out.vanishes = monotone && out.norms.back().second < tolerance;
  return out;
}

/// t -> ||int_0^t R(t - s) q(s) x ds||_inf.
inline ScalarFunction forced_response(const Kernel& R, const ScalarFunction& q, const Vector& x = {}) {
  R.require_integrable();
  return ScalarFunction::composite(
      [R, q, x](double t) { return finite_convolution(R, q, t, x).value.lpNorm<Eigen::Infinity>(); },
      Interval{0.0, std::numeric_limits<double>::infinity()}, "forced(" + R.label + "," + q.label() + ")");
}

/// t -> m_t = sum_k ||R(. + t + k)||_{L^{q(x)}[0,1]}, each value from
/// kernel_sum on the shifted kernel (infinite when the tail does not decay).
inline ScalarFunction kernel_tail_mass(const Kernel& R, const VariableExponent& q, int K = 40,
                                       const NormOptions& opt = {}) {
  return ScalarFunction::composite(
      [R, q, K, opt](double t) {
        const Kernel shifted{[f = R.value, t](double s) { return f(s + t); }, R.dimension, t > 0.0 ? 0.0 : R.sigma,
                             R.label};
        return kernel_sum(shifted, q, K, opt).M;
      },
      Interval{0.0, std::numeric_limits<double>::infinity()}, "m(" + R.label + ")");
}

}  // namespace pxap
