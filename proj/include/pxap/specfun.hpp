#pragma once

/// \file
/// Mittag-Leffler and Wright functions and the power kernel g_zeta.
///
/// Series are summed with compensated (Kahan) summation. On the negative
/// real axis, where the Mittag-Leffler series cancels catastrophically, the
/// collapsed Hankel-contour integral is used instead; the Wright density
/// switches to its positive (Kanter) integral representation once its
/// alternating series loses more than a few digits.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "pxap/quadrature.hpp"

namespace pxap::specfun {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// sin(pi x), exact zero at integers.
inline double sin_pi(double x) {
  if (x == std::nearbyint(x)) return 0.0;
  double r = std::fmod(x, 2.0);
  if (r < 0) r += 2.0;
  if (r == 0.5) return 1.0;
  if (r == 1.5) return -1.0;
  return std::sin(std::numbers::pi * r);
}

/// 1/Gamma(x), zero at the poles 0, -1, -2, ...
inline double reciprocal_gamma(double x) {
  if (x <= 0.0 && x == std::nearbyint(x)) return 0.0;
  if (x > 171.0) return 0.0;
  if (x >= 0.5) return 1.0 / std::tgamma(x);
  // Reflection: 1/Gamma(x) = Gamma(1-x) sin(pi x) / pi.
  const double s = sin_pi(x);
  if (1.0 - x > 171.0) {
    const double lg = std::lgamma(1.0 - x);
    return std::copysign(std::exp(lg + std::log(std::abs(s)) - std::log(std::numbers::pi)), s);
  }
  return std::tgamma(1.0 - x) * s / std::numbers::pi;
}

/// g_zeta(t) = t^(zeta-1) / Gamma(zeta).
inline double gamma_kernel(double zeta, double t) {
  if (!(zeta > 0.0)) throw DomainError("gamma_kernel: zeta must be positive");
  if (!(t > 0.0)) throw DomainError("gamma_kernel: t must be positive");
  return std::pow(t, zeta - 1.0) * reciprocal_gamma(zeta);
}

struct MittagLefflerOptions {
  /// Largest |z| for which the power series is used.
  double z_switch = 5.0;
  /// Largest series term magnitude tolerated on the negative real axis
  /// before switching to the integral representation.
  double max_series_term = 1e3;
};

namespace detail {

template <class T>
struct Kahan {
  T sum{};
  T c{};
  void add(T v) {
    T y = v - c;
    T t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

inline double log_abs_ml_term(double alpha, double beta, double log_abs_z, int n) {
  return n * log_abs_z - std::lgamma(alpha * n + beta);
}

// Largest |z|^n / Gamma(alpha n + beta) over n.
inline double ml_max_term(double alpha, double beta, double abs_z) {
  if (abs_z == 0.0) return std::abs(reciprocal_gamma(beta));
  const double lz = std::log(abs_z);
  double best = -std::numeric_limits<double>::infinity();
  double prev = best;
  for (int n = 0; n < 100000; ++n) {
    const double v = log_abs_ml_term(alpha, beta, lz, n);
    best = std::max(best, v);
    if (n > 5 && v < prev && v < best - 40.0) break;
    prev = v;
  }
  return std::exp(best);
}

inline std::complex<double> ml_series(double alpha, double beta, std::complex<double> z) {
  Kahan<std::complex<double>> acc;
  std::complex<double> power = 1.0;
  int small = 0;
  bool past_peak = false;
  double last = std::numeric_limits<double>::infinity();
  for (int n = 0; n < 20000; ++n) {
    const double arg = alpha * n + beta;
    std::complex<double> term;
    if (arg < 170.0 && std::isfinite(power.real()) && std::isfinite(power.imag())) {
      term = power * reciprocal_gamma(arg);
    } else {
      const double mag = std::exp(n * std::log(std::abs(z)) - std::lgamma(arg));
      term = std::polar(mag, n * std::arg(z));
    }
    acc.add(term);
    const double m = std::abs(term);
    if (m < last) past_peak = true;
    last = m;
    if (past_peak && m <= 1e-17 * std::abs(acc.sum)) {
      if (++small >= 3) break;
    } else {
      small = 0;
    }
    if (m == 0.0 && past_peak && n > 3) break;
    power *= z;
  }
  return acc.sum;
}

// E_{alpha,beta}(-x), x > 0, alpha in (0,1) or (1,2), beta < alpha + 1:
// collapsed Hankel integral plus the residues of the poles on the principal
// sheet (only present for alpha > 1).
inline double ml_negative_integral(double alpha, double beta, double x) {
  const double pi = std::numbers::pi;
  const double sb = sin_pi(beta);
  const double sba = sin_pi(beta - alpha);
  const double ca = std::cos(pi * alpha);
  auto integrand = [&](double r) {
    if (r <= 0.0) return 0.0;
    const double ra = std::pow(r, alpha);
    const double den = ra * ra + 2.0 * x * ra * ca + x * x;
    return std::exp(-r) * std::pow(r, alpha - beta) * (ra * sb + x * sba) / den;
  };
  quad::AdaptiveOptions opt{1e-300, 1e-14, 4000};
  const double r1 = 1.0;
  // On [0, r1] substitute r = r1 v^m so that r^(alpha-beta) dr is regular.
  const double m = 1.0 / (alpha - beta + 1.0);
  auto head = quad::integrate<double>(
      [&](double v) {
        if (v <= 0.0) return 0.0;
        const double r = r1 * std::pow(v, m);
        return integrand(r) * r1 * m * std::pow(v, m - 1.0);
      },
      0.0, 1.0, opt);
  // Split [r1, inf) near the denominator's minimum r = x^(1/alpha), then map
  // the remaining tail onto [0, 1).
  const double peak = std::pow(x, 1.0 / alpha);
  double mid_end = std::max(r1 + 1.0, std::min(peak * 2.0, 60.0));
  auto middle = quad::integrate<double>(integrand, r1, mid_end, opt);
  auto tail = quad::integrate<double>(
      [&](double u) {
        if (u >= 1.0) return 0.0;
        const double w = 1.0 - u;
        return integrand(mid_end + u / w) / (w * w);
      },
      0.0, 1.0, opt);
  double value = (head.value + middle.value + tail.value) / pi;
  if (alpha > 1.0) {
    const std::complex<double> pole = std::polar(std::pow(x, 1.0 / alpha), pi / alpha);
    const std::complex<double> res = std::exp(pole) * std::pow(pole, 1.0 - beta);
    value += 2.0 / alpha * res.real();
  }
  return value;
}

}  // namespace detail

/// E_{alpha,beta}(z) = sum_n z^n / Gamma(alpha n + beta).
///
/// Supported: alpha in (0, 2], beta > 0; any z with |z| <= z_switch (unless
/// the series would cancel badly off the negative axis), and z on the
/// negative real axis at any distance.
inline std::complex<double> mittag_leffler(double alpha, double beta, std::complex<double> z,
                                           const MittagLefflerOptions& opt = {}) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw DomainError("mittag_leffler: alpha must lie in (0, 2]");
  if (!(beta > 0.0)) throw DomainError("mittag_leffler: beta must be positive");
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw DomainError("mittag_leffler: non-finite argument");
  if (z == 0.0) return reciprocal_gamma(beta);
  const double az = std::abs(z);
  const bool negative_real = z.imag() == 0.0 && z.real() < 0.0;
  const double max_term = detail::ml_max_term(alpha, beta, az);
  if (az <= opt.z_switch && (!negative_real || max_term <= opt.max_series_term)) {
    return detail::ml_series(alpha, beta, z);
  }
  if (!negative_real) {
    if (z.imag() == 0.0 && max_term < 1e300) return detail::ml_series(alpha, beta, z);
    throw DomainError("mittag_leffler: |z| beyond series range off the negative real axis");
  }
  const double x = -z.real();
  if (beta >= alpha + 1.0) {
    // E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z
    const std::complex<double> lower = mittag_leffler(alpha, beta - alpha, z, opt);
    return (lower - reciprocal_gamma(beta - alpha)) / z;
  }
  if (alpha == 1.0) {
    if (beta == 1.0) return std::exp(-x);
    throw DomainError("mittag_leffler: alpha = 1 with beta != 1 unsupported for large negative z");
  }
  if (alpha == 2.0) {
    if (beta == 1.0) return std::cos(std::sqrt(x));
    if (beta == 2.0) return std::sin(std::sqrt(x)) / std::sqrt(x);
    throw DomainError("mittag_leffler: alpha = 2 requires beta in {1, 2} for large negative z");
  }
  return detail::ml_negative_integral(alpha, beta, x);
}

/// Real-argument convenience overload.
inline double mittag_leffler(double alpha, double beta, double x,
                             const MittagLefflerOptions& opt = {}) {
  return mittag_leffler(alpha, beta, std::complex<double>(x, 0.0), opt).real();
}

/// E_alpha(x) = E_{alpha,1}(x).
inline double mittag_leffler(double alpha, double x) { return mittag_leffler(alpha, 1.0, x); }

struct WrightValue {
  double value = 0.0;
  bool underflow = false;
};

struct WrightOptions {
  /// Arguments beyond cutoff_scale / gamma return 0 with the underflow flag.
  double cutoff_scale = 40.0;
  /// Largest tolerated series term before the integral form is used.
  double max_series_term = 1e2;
};

namespace detail {

// Phi_g(s) = (1/pi) sum_n (-s)^n Gamma(g(n+1)) sin(pi g (n+1)) / n!
// (the reflection formula applied to 1/Gamma(1 - g - g n)).
inline double wright_series(double g, double s) {
  Kahan<double> acc;
  const double ls = s > 0.0 ? std::log(s) : -std::numeric_limits<double>::infinity();
  int small = 0;
  bool past_peak = false;
  double last = std::numeric_limits<double>::infinity();
  for (int n = 0; n < 5000; ++n) {
    // Terms in log form: the factorial and Gamma factors overflow separately.
    const double sn = sin_pi(g * (n + 1));
    double term = 0.0;
    if (sn != 0.0) {
      const double lm = (n == 0 ? 0.0 : n * ls) - std::lgamma(n + 1.0) + std::lgamma(g * (n + 1));
      term = (n % 2 == 0 ? 1.0 : -1.0) * sn * std::exp(lm) / std::numbers::pi;
    }
    acc.add(term);
    const double m = std::abs(term);
    if (m < last) past_peak = true;
    if (m != 0.0) last = m;
    if (past_peak && m <= 1e-17 * std::abs(acc.sum)) {
      if (++small >= 3) break;
    } else {
      small = 0;
    }
    if (s == 0.0) break;
  }
  return acc.sum;
}

inline double wright_max_term(double g, double s) {
  if (s == 0.0) return std::abs(reciprocal_gamma(1.0 - g));
  const double ls = std::log(s);
  double best = -std::numeric_limits<double>::infinity();
  for (int n = 0; n < 100000; ++n) {
    const double v = n * ls + std::lgamma(g * (n + 1)) - std::lgamma(n + 1.0);
    best = std::max(best, v);
    if (n > 5 && v < best - 40.0) break;
  }
  return std::exp(best) / std::numbers::pi;
}

// Positive integral representation through the one-sided stable density:
// Phi_g(s) = s^(g/(1-g)) / (pi (1-g)) int_0^pi A(phi) exp(-s^(1/(1-g)) A(phi)) dphi,
// A(phi) = (sin(g phi)/sin phi)^(1/(1-g)) sin((1-g) phi) / sin(g phi).
inline double wright_integral(double g, double s) {
  const double k = 1.0 / (1.0 - g);
  const double sk = std::pow(s, k);
  auto A = [&](double phi) {
    const double sg = std::sin(g * phi);
    return std::pow(sg / std::sin(phi), k) * std::sin((1.0 - g) * phi) / sg;
  };
  auto integrand = [&](double phi) {
    if (phi <= 0.0) {
      const double a0 = std::pow(g, g * k) * (1.0 - g);
      return a0 * std::exp(-sk * a0);
    }
    if (phi >= std::numbers::pi) return 0.0;
    const double a = A(phi);
    const double e = sk * a;
    if (e > 745.0) return 0.0;
    return a * std::exp(-e);
  };
  quad::AdaptiveOptions opt{1e-300, 1e-13, 4000};
  auto r = quad::integrate<double>(integrand, 0.0, std::numbers::pi, opt);
  return std::pow(s, g * k) * r.value / (std::numbers::pi * (1.0 - g));
}

}  // namespace detail

/// Wright (M-Wright) density Phi_gamma(s), gamma in (0, 1), s >= 0.
inline WrightValue wright_phi_eval(double gamma, double s, const WrightOptions& opt = {}) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("wright_phi: gamma must lie in (0, 1)");
  if (!(s >= 0.0)) throw DomainError("wright_phi: s must be nonnegative");
  if (s > opt.cutoff_scale / gamma) return {0.0, true};
  double v;
  if (detail::wright_max_term(gamma, s) <= opt.max_series_term) {
    v = detail::wright_series(gamma, s);
  } else {
    v = detail::wright_integral(gamma, s);
  }
  if (v < 0.0 && v > -1e-12) v = 0.0;
  return {v, false};
}

inline double wright_phi(double gamma, double s) { return wright_phi_eval(gamma, s).value; }

/// Point beyond which s^(nu+1) Phi_gamma(s) stays below `tol`.
inline double wright_support(double gamma, double nu = 1.0, double tol = 1e-18) {
  const double cutoff = 40.0 / gamma;
  double s = 1.0;
  while (s < cutoff) {
    const double v = wright_phi(gamma, s) * std::pow(s, nu + 1.0);
    if (v < tol && s > 1.0) break;
    s *= 1.1;
  }
  return std::min(s, cutoff);
}

struct MomentResult {
  double value = 0.0;
  double error_estimate = 0.0;
  /// Gamma(1+nu) / Gamma(1+gamma nu).
  double closed_form = 0.0;
};

/// int_0^inf s^nu Phi_gamma(s) ds by quadrature, with the classical moment
/// value attached for comparison.
inline MomentResult wright_moment(double gamma, double nu) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("wright_moment: gamma must lie in (0, 1)");
  if (!(nu > -1.0)) throw DomainError("wright_moment: nu must exceed -1");
  const double support = wright_support(gamma, std::max(nu, 0.0));
  quad::AdaptiveOptions opt{1e-300, 1e-12, 2000};
  MomentResult out;
  // [0, 1] with s = v^m, m = 1/(1+nu): s^nu ds = m dv.
  const double m = 1.0 / (1.0 + nu);
  auto head = quad::integrate<double>(
      [&](double v) { return v <= 0.0 ? m * wright_phi(gamma, 0.0) : m * wright_phi(gamma, std::pow(v, m)); },
      0.0, 1.0, opt);
  out.value = head.value;
  out.error_estimate = head.error;
  if (support > 1.0) {
    auto body = quad::integrate<double>(
        [&](double s) { return std::pow(s, nu) * wright_phi(gamma, s); }, 1.0, support, opt);
    out.value += body.value;
    out.error_estimate += body.error;
  }
  const double start = std::max(1.0, support);
  auto tail = quad::integrate<double>(
      [&](double u) {
        if (u >= 1.0) return 0.0;
        const double w = 1.0 - u;
        const double s = start + u / w;
        return std::pow(s, nu) * wright_phi(gamma, s) / (w * w);
      },
      0.0, 1.0, opt);
  out.value += tail.value;
  out.error_estimate += tail.error;
  out.closed_form = std::tgamma(1.0 + nu) / std::tgamma(1.0 + gamma * nu);
  return out;
}

}  // namespace pxap::specfun
