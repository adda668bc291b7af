#pragma once

/// \file
/// Finite-dimensional operators satisfying condition (P): dense matrices and
/// regular pencils (A, B) read as the relation A B^-1, their resolvents, the
/// contour-integral semigroup, Wright subordination and decay fits.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "pxap/funcspec.hpp"
#include "pxap/quadrature.hpp"
#include "pxap/specfun.hpp"

namespace pxap {

using RMatrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;
using cdouble = std::complex<double>;

class ResolventError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OperatorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Claimed constants: ||R(lambda)|| <= M (1 + |lambda|)^(-beta) on
/// Psi = {Re lambda >= -c (|Im lambda| + 1)}.
struct ConditionP {
  double c = 0.5;
  double beta = 1.0;
  double M = 1.0;
};

inline bool in_region(cdouble lambda, double c) { return lambda.real() >= -c * (std::abs(lambda.imag()) + 1.0); }

/// Largest singular value.
inline double spectral_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.cols() <= 64) return Eigen::JacobiSVD<CMatrix>(m).singularValues()(0);
  return Eigen::BDCSVD<CMatrix>(m).singularValues()(0);
}

inline double spectral_norm(const RMatrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.cols() <= 64) return Eigen::JacobiSVD<RMatrix>(m).singularValues()(0);
  return Eigen::BDCSVD<RMatrix>(m).singularValues()(0);
}

struct Resolvent {
  CMatrix matrix;
  /// Reciprocal of the LU condition estimate of lambda B - A.
  double condition = 1.0;
};

class OperatorFamily {
 public:
  static OperatorFamily matrix(RMatrix a, std::optional<ConditionP> claim = std::nullopt) {
    if (a.rows() != a.cols() || a.rows() == 0) throw OperatorError("operator matrix must be square and nonempty");
    OperatorFamily op;
    op.a_ = std::move(a);
    op.claim_ = claim;
    op.init_spectrum();
    return op;
  }

  /// Regular pencil: det(lambda B - A) must not vanish identically, checked at
  /// three pseudo-random lambda.
  static OperatorFamily pencil(RMatrix a, RMatrix b, std::optional<ConditionP> claim = std::nullopt) {
    if (a.rows() != a.cols() || a.rows() == 0) throw OperatorError("pencil matrix A must be square and nonempty");
    if (b.rows() != a.rows() || b.cols() != a.cols()) throw OperatorError("pencil matrices A and B differ in shape");
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    bool regular = false;
    for (int i = 0; i < 3 && !regular; ++i) {
      const cdouble l(u(rng), u(rng));
      Eigen::FullPivLU<CMatrix> lu(l * b.cast<cdouble>() - a.cast<cdouble>());
      regular = lu.isInvertible();
    }
    if (!regular) throw OperatorError("singular pencil: det(lambda B - A) vanishes identically");
    OperatorFamily op;
    op.a_ = std::move(a);
    op.b_ = std::move(b);
    op.claim_ = claim;
    op.init_spectrum();
    return op;
  }

  bool is_pencil() const { return b_.has_value(); }
  Eigen::Index dimension() const { return a_.rows(); }
  const RMatrix& A() const { return a_; }
  RMatrix B() const { return b_ ? *b_ : RMatrix::Identity(a_.rows(), a_.cols()); }
  const std::optional<ConditionP>& claim() const { return claim_; }

  OperatorFamily with_claim(ConditionP p) const {
    OperatorFamily op = *this;
    op.claim_ = p;
    return op;
  }

  /// Finite (generalized) eigenvalues.
  const std::vector<cdouble>& spectrum() const { return spectrum_; }

  /// (lambda - A)^-1, or B (lambda B - A)^-1 for a pencil.
  Resolvent resolvent(cdouble lambda) const {
    const CMatrix ac = a_.cast<cdouble>();
    CMatrix m = b_ ? CMatrix(lambda * b_->cast<cdouble>() - ac) : CMatrix(lambda * CMatrix::Identity(a_.rows(), a_.cols()) - ac);
    Eigen::FullPivLU<CMatrix> lu(m);
    const double rc = lu.rcond();
    if (!lu.isInvertible() || !(rc > 1e-14)) {
      std::ostringstream os;
      os << "lambda = (" << lambda.real() << ", " << lambda.imag() << ") not in resolvent set";
      throw ResolventError(os.str());
    }
    Resolvent out;
    const CMatrix inv = lu.inverse();
    out.matrix = b_ ? CMatrix(b_->cast<cdouble>() * inv) : inv;
    out.condition = 1.0 / rc;
    return out;
  }

  /// c used for the contour: the claimed one, otherwise half the largest
  /// admissible value for the spectrum.
  double contour_c() const {
    if (claim_) return claim_->c;
    if (spectrum_.empty()) return 1.0;
    double c = kInfinity;
    for (auto mu : spectrum_) c = std::min(c, -mu.real() / (std::abs(mu.imag()) + 1.0));
    if (!(c > 0.0)) throw OperatorError("spectrum reaches the closed right half-plane; no admissible contour");
    return 0.5 * c;
  }

  /// True when every finite eigenvalue lies strictly left of the contour for
  /// contour_c().
  bool contour_admissible() const {
    double c;
    try {
      c = contour_c();
    } catch (const OperatorError&) {
      return false;
    }
    if (!(c > 0.0)) return false;
    return std::none_of(spectrum_.begin(), spectrum_.end(), [c](cdouble mu) { return in_region(mu, c); });
  }

 private:
  static constexpr double kInfinity = std::numeric_limits<double>::infinity();

  OperatorFamily() = default;

  void init_spectrum() {
    spectrum_.clear();
    if (!b_) {
      Eigen::EigenSolver<RMatrix> es(a_, false);
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) spectrum_.push_back(es.eigenvalues()(i));
    } else {
      Eigen::GeneralizedEigenSolver<RMatrix> ges(a_, *b_, false);
      const double scale = std::max(1.0, std::max(a_.cwiseAbs().maxCoeff(), b_->cwiseAbs().maxCoeff()));
      for (Eigen::Index i = 0; i < ges.alphas().size(); ++i) {
        const cdouble al = ges.alphas()(i);
        const double be = ges.betas()(i);
        if (std::abs(be) > 1e-12 * scale) spectrum_.push_back(al / be);
      }
    }
    std::sort(spectrum_.begin(), spectrum_.end(), [](cdouble x, cdouble y) {
      return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
  }

  RMatrix a_;
  std::optional<RMatrix> b_;
  std::optional<ConditionP> claim_;
  std::vector<cdouble> spectrum_;
};

inline Resolvent resolvent(const OperatorFamily& op, cdouble lambda) { return op.resolvent(lambda); }

/// Largest entry of R(l) - R(m) - (m - l) R(l) R(m).
inline double resolvent_identity_residual(const OperatorFamily& op, cdouble l, cdouble m) {
  const CMatrix rl = op.resolvent(l).matrix;
  const CMatrix rm = op.resolvent(m).matrix;
  const CMatrix d = rl - rm - (m - l) * rl * rm;
  return d.cwiseAbs().maxCoeff();
}

struct ConditionPReport {
  ConditionP params;
  bool passed = true;
  /// max ||R(lambda)|| (1 + |lambda|)^beta / M over the samples.
  double worst_ratio = 0.0;
  cdouble worst_lambda{0.0, 0.0};
  int samples = 0;
  std::vector<cdouble> spectrum_in_region;
  std::string failure;
};

/// Points of Psi: the boundary curve and rays from the origin, |lambda| up to
/// 1e4, log-spaced with `per_decade` radii per decade.
inline std::vector<cdouble> condition_p_samples(double c, int per_decade = 8) {
  std::vector<double> radii{0.0};
  for (int k = -3 * per_decade; k <= 4 * per_decade; ++k) radii.push_back(std::pow(10.0, static_cast<double>(k) / per_decade));
  std::vector<cdouble> out;
  for (double r : radii) {
    const cdouble up(-c * (r + 1.0), r);
    if (std::abs(up) <= 1e4) {
      out.push_back(up);
      if (r > 0.0) out.push_back(std::conj(up));
    }
  }
  const int rays = 8;
  const double theta_max = std::numbers::pi / 2.0 + std::atan(c);
  for (int j = -rays; j <= rays; ++j) {
    const double th = theta_max * j / rays;
    for (double r : radii) {
      if (r == 0.0 && j != 0) continue;
      const cdouble l = std::polar(r, th);
      if (in_region(l, c)) out.push_back(l);
    }
  }
  return out;
}

/// Samples Psi for the claimed constants. A violated bound or a spectral
/// point inside Psi gives passed = false; only a missing claim throws.
inline ConditionPReport verify_condition_P(const OperatorFamily& op, int per_decade = 8) {
  if (!op.claim()) throw OperatorError("verify_condition_P needs claimed (c, beta, M)");
  ConditionPReport rep;
  rep.params = *op.claim();
  const auto& p = rep.params;
  if (!(p.c > 0.0 && p.M > 0.0 && p.beta > 0.0 && p.beta <= 1.0))
    throw OperatorError("condition (P) constants need c > 0, M > 0, 0 < beta <= 1");
  for (auto mu : op.spectrum()) {
    if (in_region(mu, p.c)) rep.spectrum_in_region.push_back(mu);
  }
  if (!rep.spectrum_in_region.empty()) {
    rep.passed = false;
    std::ostringstream os;
    os << "spectral point (" << rep.spectrum_in_region.front().real() << ", " << rep.spectrum_in_region.front().imag()
       << ") lies in Psi";
    rep.failure = os.str();
  }
  for (auto l : condition_p_samples(p.c, per_decade)) {
    ++rep.samples;
    double ratio;
    try {
      const double n = spectral_norm(op.resolvent(l).matrix);
      ratio = n * std::pow(1.0 + std::abs(l), p.beta) / p.M;
    } catch (const ResolventError&) {
      ratio = std::numeric_limits<double>::infinity();
    }
    if (ratio > rep.worst_ratio || std::isnan(ratio)) {
      rep.worst_ratio = ratio;
      rep.worst_lambda = l;
    }
  }
  if (!(rep.worst_ratio <= 1.0)) {
    if (rep.passed) {
      std::ostringstream os;
      os << "resolvent bound violated at lambda = (" << rep.worst_lambda.real() << ", " << rep.worst_lambda.imag()
         << "), ratio " << rep.worst_ratio;
      rep.failure = os.str();
    }
    rep.passed = false;
  }
  return rep;
}

struct ContourOptions {
  /// Smallest t the node set resolves.
  double tau_min = 1e-6;
  /// Doubling of H stops after two octaves whose envelope is below this.
  double tail_tol = 1e-9;
  /// Phase of e^(i eta t) allowed across one panel where the integrand matters.
  double phase_per_panel = 6.0;
};

struct SemigroupSample {
  double t = 0.0;
  RMatrix matrix;
  double truncation = 0.0;
  int nodes = 0;
  double error_estimate = 0.0;
};

/// T(t) = (1/2 pi i) int_Gamma e^(lambda t) R(lambda) d lambda on
/// lambda = -c(|eta| + 1) + i eta. A and B are real, so the integrand at -eta
/// is the conjugate of that at eta. Resolvents are evaluated once on a fixed
/// composite Gauss-Kronrod node set: uniform panels on |eta| <= eta0, then
/// octaves [eta0 2^k, eta0 2^(k+1)], so doubling H adds one octave per side.
class ContourSemigroup {
 public:
  explicit ContourSemigroup(const OperatorFamily& op, const ContourOptions& opt = {}) : opt_(opt), dim_(op.dimension()) {
    if (!op.contour_admissible()) throw OperatorError("spectrum is not left of the contour; condition (P) fails");
    c_ = op.contour_c();
    double eta_feature = 0.0, dist = kBig;
    for (auto mu : op.spectrum()) {
      eta_feature = std::max(eta_feature, std::abs(mu.imag()));
      dist = std::min(dist, -c_ * (std::abs(mu.imag()) + 1.0) - mu.real());
    }
    const double eta0 = std::max(4.0, 2.0 * (eta_feature + 1.0));
    // Beyond t = 23/c the factor e^(-ct) is below 1e-10.
    const double t_relevant = 23.0 / c_;
    const double w = std::max(eta0 / 20000.0, std::min({0.25, opt_.phase_per_panel / t_relevant, 0.5 * dist}));
    const int uniform = static_cast<int>(std::ceil(eta0 / w));
    const int per_octave = std::clamp(static_cast<int>(std::ceil(t_relevant / opt_.phase_per_panel)), 8, 400);
    const double h_max = 40.0 / (c_ * opt_.tau_min);

    std::vector<quad::Node> nodes;
    for (int i = 0; i < uniform; ++i) quad::append_panel(nodes, eta0 * i / uniform, eta0 * (i + 1) / uniform);
    add_octave(op, nodes, eta0);
    for (double lo = eta0; lo < h_max; lo *= 2.0) {
      nodes.clear();
      for (int i = 0; i < per_octave; ++i)
        quad::append_panel(nodes, lo + lo * i / per_octave, lo + lo * (i + 1) / per_octave);
      add_octave(op, nodes, 2.0 * lo);
    }
    init_interpolant(op);
  }

  double c() const { return c_; }
  double tau_min() const { return opt_.tau_min; }
  double negligible_tau() const { return negligible_tau_; }

  SemigroupSample sample(double t) const {
    if (!(t > 0.0)) throw OperatorError("semigroup_contour needs t > 0");
    if (t < opt_.tau_min) throw OperatorError("t below the contour rule resolution");
    const Eigen::Index nn = dim_ * dim_;
    Eigen::VectorXcd k = Eigen::VectorXcd::Zero(nn), g = Eigen::VectorXcd::Zero(nn);
    SemigroupSample out;
    out.t = t;
    int quiet = 0;
    double last_envelope = 0.0;
    for (std::size_t o = 0; o < octaves_.size(); ++o) {
      const auto& oc = octaves_[o];
      const Eigen::VectorXcd e = (oc.lambda * t).array().exp().matrix();
      k.noalias() += oc.wk * e;
      g.noalias() += oc.wg * e;
      const double envelope = (oc.lambda.real() * t).array().exp().matrix().dot(oc.envelope);
      out.nodes += static_cast<int>(2 * oc.lambda.size());
      out.truncation = bounds_[o];
      last_envelope = envelope;
      if (o > 0 && envelope < opt_.tail_tol) {
        if (++quiet >= 2) break;
      } else {
        quiet = 0;
      }
      if (o + 1 == octaves_.size()) throw OperatorError("contour tail did not converge");
    }
    // The node at -eta contributes the conjugate of the node at eta.
    out.matrix = Eigen::Map<const RMatrix>(Eigen::VectorXd(2.0 * k.real()).data(), dim_, dim_);
    out.error_estimate = 2.0 * (k - g).cwiseAbs().maxCoeff() + last_envelope;
    return out;
  }

  RMatrix operator()(double t) const { return sample(t).matrix; }

  /// T(t) from a piecewise Chebyshev interpolant in log t (degree 20 per
  /// piece), built piece by piece on first use. Below tau_min the value at
  /// tau_min is returned; beyond the point where the envelope bound
  /// e^(-ct) sum ||W_j|| drops under 1e-18 the result is 0.
  RMatrix interpolated(double t) const {
    const Eigen::Index n = dim_;
    if (t >= negligible_tau_) return RMatrix::Zero(n, n);
    const double x = std::log(std::max(t, opt_.tau_min));
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
    std::size_t i = it == breaks_.begin() ? 0 : static_cast<std::size_t>(it - breaks_.begin()) - 1;
    i = std::min(i, pieces_.size() - 1);
    const double x0 = breaks_[i], x1 = breaks_[i + 1];
    if (pieces_[i].size() == 0) build_piece(i);
    const double y = std::clamp((2.0 * x - x0 - x1) / (x1 - x0), -1.0, 1.0);
    Eigen::Matrix<double, kChebNodes, 1> tv;
    tv(0) = 1.0;
    tv(1) = y;
    for (int j = 2; j < kChebNodes; ++j) tv(j) = 2.0 * y * tv(j - 1) - tv(j - 2);
    const Eigen::VectorXd flat = pieces_[i] * tv;
    return Eigen::Map<const RMatrix>(flat.data(), n, n);
  }

 private:
  static constexpr double kBig = 1e300;
  static constexpr int kChebNodes = 21;

  void init_interpolant(const OperatorFamily& op) {
    double wsum = 0.0;
    for (const auto& oct : octaves_) wsum += oct.envelope.sum();
    negligible_tau_ = std::max(opt_.tau_min * 2.0, std::log(std::max(wsum, 1.0) / 1e-18) / c_);
    double rho = 1.0;
    for (auto mu : op.spectrum()) rho = std::max(rho, std::abs(mu));
    // Pieces at most 1/4 wide in log t and short enough that rho t changes by
    // at most about 5 across one.
    double x = std::log(opt_.tau_min);
    const double x_end = std::log(negligible_tau_);
    breaks_.push_back(x);
    while (x < x_end) {
      x += std::min(0.25, 5.0 / (rho * std::exp(x + 0.25)));
      breaks_.push_back(x);
    }
    pieces_.assign(breaks_.size() - 1, Eigen::MatrixXd());
  }

  void build_piece(std::size_t i) const {
    const double x0 = breaks_[i], x1 = breaks_[i + 1];
    const Eigen::Index nn = dim_ * dim_;
    Eigen::MatrixXd vals(nn, kChebNodes);
    for (int k = 0; k < kChebNodes; ++k) {
      const double y = std::cos(std::numbers::pi * (k + 0.5) / kChebNodes);
      const RMatrix v = sample(std::exp(0.5 * (x0 + x1) + 0.5 * (x1 - x0) * y)).matrix;
      vals.col(k) = Eigen::Map<const Eigen::VectorXd>(v.data(), nn);
    }
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(nn, kChebNodes);
    for (int j = 0; j < kChebNodes; ++j) {
      for (int k = 0; k < kChebNodes; ++k)
        coef.col(j) += vals.col(k) * std::cos(std::numbers::pi * j * (k + 0.5) / kChebNodes);
      coef.col(j) *= (j == 0 ? 1.0 : 2.0) / kChebNodes;
    }
    pieces_[i] = std::move(coef);
  }

  // Nodes with eta > 0 only: column j of wk / wg is vec(W_j) for the Kronrod
  // and embedded Gauss weights; envelope bounds |W_j| for both eta signs.
  struct Octave {
    Eigen::VectorXcd lambda;
    Eigen::MatrixXcd wk;
    Eigen::MatrixXcd wg;
    Eigen::VectorXd envelope;
  };

  void add_octave(const OperatorFamily& op, const std::vector<quad::Node>& nodes, double bound) {
    const Eigen::Index m = static_cast<Eigen::Index>(nodes.size());
    const Eigen::Index nn = dim_ * dim_;
    Octave oc{Eigen::VectorXcd(m), Eigen::MatrixXcd(nn, m), Eigen::MatrixXcd(nn, m), Eigen::VectorXd(m)};
    const cdouble two_pi_i(0.0, 2.0 * std::numbers::pi);
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& nd = nodes[j];
      const cdouble lambda(-c_ * (nd.x + 1.0), nd.x);
      const CMatrix r = op.resolvent(lambda).matrix * (cdouble(-c_, 1.0) / two_pi_i);
      const Eigen::Map<const Eigen::VectorXcd> flat(r.data(), nn);
      oc.lambda(j) = lambda;
      oc.wk.col(j) = flat * nd.wk;
      oc.wg.col(j) = flat * nd.wg;
      oc.envelope(j) = 2.0 * nd.wk * r.cwiseAbs().maxCoeff();
    }
    octaves_.push_back(std::move(oc));
    bounds_.push_back(bound);
  }

  ContourOptions opt_;
  double c_ = 0.0;
  std::vector<Octave> octaves_;
  std::vector<double> bounds_;
  Eigen::Index dim_ = 0;
  double negligible_tau_ = 0.0;
  std::vector<double> breaks_;
  mutable std::vector<Eigen::MatrixXd> pieces_;
};

inline SemigroupSample semigroup_contour(const OperatorFamily& op, double t, const ContourOptions& opt = {}) {
  return ContourSemigroup(op, opt).sample(t);
}

/// Semigroup source for subordination: the contour integral when the
/// spectrum allows it, otherwise exp(tA) for plain matrices.
class Semigroup {
 public:
  explicit Semigroup(const OperatorFamily& op, const ContourOptions& opt = {}) {
    if (op.contour_admissible()) {
      contour_.emplace(op, opt);
    } else if (!op.is_pencil()) {
      a_ = op.A();
    } else {
      throw OperatorError("pencil spectrum is not left of any contour; condition (P) fails");
    }
  }

  bool uses_contour() const { return contour_.has_value(); }
  /// T is constant below this t (the contour resolution).
  double floor_tau() const { return contour_ ? contour_->tau_min() : 0.0; }
  /// T vanishes beyond this t.
  double negligible_tau() const { return contour_ ? contour_->negligible_tau() : std::numeric_limits<double>::infinity(); }

  /// T(t) for t >= 0, from the contour interpolant when available.
  RMatrix operator()(double t) const {
    if (contour_) return contour_->interpolated(t);
    return RMatrix((t * a_).exp());
  }

 private:
  std::optional<ContourSemigroup> contour_;
  RMatrix a_;
};

struct SubordinationOptions {
  ContourOptions contour;
  /// The s rule reaches down to 2^-head_octaves.
  int head_octaves = 44;
  /// Panels per octave and panel width on [1, support] for a real spectrum;
  /// both scale with the oscillation ratio max |Im mu| / |Re mu|.
  int octave_panels = 4;
  double body_width = 0.25;
  int tail_panels = 16;
};

/// T_{gamma,nu}(t) = t^(gamma nu) int_0^inf s^nu Phi_gamma(s) T(s t^gamma) ds
/// and the derived S_gamma, P_gamma, R_gamma.
///
/// The s integral uses one composite Gauss-Kronrod rule per gamma with the
/// Wright density folded into the weights: [0, 2^-K] (substituted when
/// nu < 0), octaves up to 1, uniform panels up to the density support, and
/// the tail through s = S + u/(1-u). Octave panels keep e^(-a s t^gamma)
/// resolved for every rate a, so the same nodes serve all t. Caches weights
/// per nu; an instance must not be shared between threads.
class SubordinatedFamily {
 public:
  SubordinatedFamily(const OperatorFamily& op, double gamma, const SubordinationOptions& opt = {})
      : SubordinatedFamily(std::make_shared<const Semigroup>(op, opt.contour), op, gamma, opt) {}

  /// Shares a semigroup built for `op` with other families.
  SubordinatedFamily(std::shared_ptr<const Semigroup> semigroup, const OperatorFamily& op, double gamma,
                     const SubordinationOptions& opt = {})
      : op_(op), gamma_(gamma), semigroup_(std::move(semigroup)), opt_(opt) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw OperatorError("subordination needs gamma in (0, 1)");
    beta_ = op.claim() ? op.claim()->beta : 1.0;
    build_rule();
  }

  double gamma() const { return gamma_; }
  const OperatorFamily& op() const { return op_; }
  bool uses_contour() const { return semigroup_->uses_contour(); }
  const std::shared_ptr<const Semigroup>& semigroup() const { return semigroup_; }
  std::size_t rule_size() const { return s_.size() + head_v_.size(); }

  RMatrix T(double nu, double t) const {
    if (!(t > 0.0)) throw OperatorError("subordination needs t > 0");
    if (!(nu > -beta_)) throw OperatorError("subordination needs nu > -beta");
    return std::pow(t, gamma_ * nu) * moment(nu, std::pow(t, gamma_));
  }

  RMatrix S(double t) const { return T(0.0, t); }

  /// gamma T_{gamma,1}(t) / t^gamma.
  RMatrix P(double t) const {
    if (!(t > 0.0)) throw OperatorError("subordination needs t > 0");
    return gamma_ * moment(1.0, std::pow(t, gamma_));
  }

  RMatrix R(double t) const { return std::pow(t, gamma_ - 1.0) * P(t); }

 private:
  void build_rule() {
    double ratio = 0.0;
    for (auto mu : op_.spectrum())
      if (mu.real() < 0.0) ratio = std::max(ratio, std::abs(mu.imag()) / -mu.real());
    const int per_octave = std::clamp(static_cast<int>(std::ceil(opt_.octave_panels * std::max(1.0, ratio))), 1, 64);
    const double width = opt_.body_width / std::max(1.0, ratio);
    std::vector<quad::Node> nodes;
    eps_ = std::ldexp(1.0, -opt_.head_octaves);
    for (int k = opt_.head_octaves; k > 0; --k) {
      const double lo = std::ldexp(1.0, -k);
      for (int i = 0; i < per_octave; ++i) quad::append_panel(nodes, lo + lo * i / per_octave, lo + lo * (i + 1) / per_octave);
    }
    support_ = std::max(1.0, specfun::wright_support(gamma_, 1.0));
    const int body = static_cast<int>(std::ceil((support_ - 1.0) / width));
    for (int i = 0; i < body; ++i) quad::append_panel(nodes, 1.0 + (support_ - 1.0) * i / body, 1.0 + (support_ - 1.0) * (i + 1) / body);
    for (const auto& nd : nodes) {
      s_.push_back(nd.x);
      w_.push_back(nd.wk);
    }
    nodes.clear();
    for (int i = 0; i < opt_.tail_panels; ++i)
      quad::append_panel(nodes, static_cast<double>(i) / opt_.tail_panels, static_cast<double>(i + 1) / opt_.tail_panels);
    for (const auto& nd : nodes) {
      const double w = 1.0 - nd.x;
      s_.push_back(support_ + nd.x / w);
      w_.push_back(nd.wk / (w * w));
    }
    for (auto& s : s_) phi_.push_back(specfun::wright_phi(gamma_, s));
    nodes.clear();
    quad::append_panel(nodes, 0.0, 1.0);
    for (const auto& nd : nodes) {
      head_v_.push_back(nd.x);
      head_w_.push_back(nd.wk);
    }
  }

  struct Weights {
    /// Ascending nodes.
    std::vector<double> s;
    std::vector<double> w;
    /// prefix[i] = w[0] + ... + w[i-1].
    std::vector<double> prefix;
  };

  // Nodes and weights s^nu Phi(s) ds of the full rule for one nu, dropping
  // nodes where the density underflows.
  const Weights& weights(double nu) const {
    auto it = cache_.find(nu);
    if (it != cache_.end()) return it->second;
    Weights out;
    // [0, eps] with s = eps v^m, m = 1/(1+nu): s^nu ds = eps^(1+nu) m dv.
    const double m = nu < 0.0 ? 1.0 / (1.0 + nu) : 1.0;
    for (std::size_t i = 0; i < head_v_.size(); ++i) {
      const double s = eps_ * std::pow(head_v_[i], m);
      const double jac = nu < 0.0 ? std::pow(eps_, 1.0 + nu) * m : eps_ * std::pow(s, nu);
      out.s.push_back(s);
      out.w.push_back(head_w_[i] * jac * specfun::wright_phi(gamma_, s));
    }
    for (std::size_t i = 0; i < s_.size(); ++i) {
      if (phi_[i] == 0.0) continue;
      out.s.push_back(s_[i]);
      out.w.push_back(w_[i] * phi_[i] * std::pow(s_[i], nu));
    }
    std::vector<std::size_t> order(out.s.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return out.s[a] < out.s[b]; });
    Weights sorted;
    sorted.prefix.push_back(0.0);
    for (auto i : order) {
      sorted.s.push_back(out.s[i]);
      sorted.w.push_back(out.w[i]);
      sorted.prefix.push_back(sorted.prefix.back() + out.w[i]);
    }
    return cache_.emplace(nu, std::move(sorted)).first->second;
  }

  // Nodes where s * scale lies below the semigroup floor share one
  // evaluation; nodes beyond the negligible t are skipped.
  RMatrix moment(double nu, double scale) const {
    const auto& r = weights(nu);
    const Eigen::Index n = op_.dimension();
    RMatrix total = RMatrix::Zero(n, n);
    const double lo = semigroup_->floor_tau() / scale, hi = semigroup_->negligible_tau() / scale;
    const auto first = static_cast<std::size_t>(std::upper_bound(r.s.begin(), r.s.end(), lo) - r.s.begin());
    if (first > 0) total = r.prefix[first] * (*semigroup_)(semigroup_->floor_tau());
    for (std::size_t i = first; i < r.s.size() && r.s[i] < hi; ++i) total.noalias() += r.w[i] * (*semigroup_)(r.s[i] * scale);
    return total;
  }

  OperatorFamily op_;
  double gamma_;
  double beta_ = 1.0;
  std::shared_ptr<const Semigroup> semigroup_;
  SubordinationOptions opt_;
  double eps_ = 0.0;
  double support_ = 1.0;
  std::vector<double> s_, w_, phi_;
  std::vector<double> head_v_, head_w_;
  mutable std::unordered_map<double, Weights> cache_;
};

inline RMatrix subordinate(const OperatorFamily& op, double gamma, double nu, double t) {
  return SubordinatedFamily(op, gamma).T(nu, t);
}

enum class FamilySelector { S, P };

inline const char* family_name(FamilySelector f) { return f == FamilySelector::S ? "S" : "P"; }

struct DecayFit {
  FamilySelector family = FamilySelector::S;
  double gamma = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  /// Exponent of the bound being checked.
  double theoretical = 0.0;
  /// Grid in t >= 1 (decay at least as fast as t^theoretical) rather than
  /// t <= 1 (growth no faster than t^theoretical toward 0).
  bool large_time = true;
  double slack = 0.1;
  bool passed = false;
  std::vector<double> t;
  std::vector<double> norms;
};

/// Least-squares slope of log ||family(t)|| against log t, compared one-sided
/// with -gamma (S) or -2 gamma (P) for t >= 1 and gamma (beta - 1) for t <= 1.
inline DecayFit decay_fit(const SubordinatedFamily& fam, FamilySelector sel, const std::vector<double>& t_grid,
                          double slack = 0.1) {
  if (t_grid.size() < 2) throw PreconditionError("decay_fit needs at least two grid points");
  const bool large = std::all_of(t_grid.begin(), t_grid.end(), [](double t) { return t >= 1.0; });
  const bool small = std::all_of(t_grid.begin(), t_grid.end(), [](double t) { return t > 0.0 && t <= 1.0; });
  if (!large && !small) throw PreconditionError("decay_fit grid must lie in (0, 1] or in [1, inf)");
  DecayFit out;
  out.family = sel;
  out.gamma = fam.gamma();
  out.large_time = large;
  out.slack = slack;
  const double g = fam.gamma();
  const double beta = fam.op().claim() ? fam.op().claim()->beta : 1.0;
  out.theoretical = large ? (sel == FamilySelector::S ? -g : -2.0 * g) : g * (beta - 1.0);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double t : t_grid) {
    const RMatrix m = sel == FamilySelector::S ? fam.S(t) : fam.P(t);
    const double nv = spectral_norm(m);
    if (!(nv > 0.0)) throw PreconditionError("decay_fit: family norm vanishes on the grid");
    out.t.push_back(t);
    out.norms.push_back(nv);
    const double x = std::log(t), y = std::log(nv);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(t_grid.size());
  const double den = n * sxx - sx * sx;
  if (!(den > 0.0)) throw PreconditionError("decay_fit grid needs distinct points");
  out.slope = (n * sxy - sx * sy) / den;
  out.intercept = (sy - out.slope * sx) / n;
  out.passed = large ? out.slope <= out.theoretical + slack : out.slope >= out.theoretical - slack;
  return out;
}

inline DecayFit decay_fit(const OperatorFamily& op, double gamma, FamilySelector sel, const std::vector<double>& t_grid,
                          double slack = 0.1) {
  return decay_fit(SubordinatedFamily(op, gamma), sel, t_grid, slack);
}

namespace detail {

inline std::vector<double> parse_row(const std::string& row, const std::string& what) {
  std::vector<double> out;
  std::string cell;
  std::istringstream is(row);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    if (b == std::string::npos) throw OperatorError(what + ": empty matrix entry");
    const char* first = cell.data() + b;
    const char* last = cell.data() + e + 1;
    double v = 0.0;
    auto r = std::from_chars(first, last, v);
    if (r.ec != std::errc() || r.ptr != last) throw OperatorError(what + ": bad matrix entry '" + cell + "'");
    out.push_back(v);
  }
  return out;
}

inline RMatrix assemble(const std::vector<std::vector<double>>& rows, const std::string& what) {
  if (rows.empty()) throw OperatorError(what + ": empty matrix");
  RMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw OperatorError(what + ": ragged matrix rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace detail

/// Inline matrix: rows separated by ';', entries by ','. "-1" is 1x1;
/// "diag(-1,-2)" builds a diagonal matrix.
inline RMatrix parse_matrix(const std::string& text) {
  std::string s = text;
  s.erase(std::remove_if(s.begin(), s.end(), [](char ch) { return ch == ' ' || ch == '\t'; }), s.end());
  if (s.rfind("diag(", 0) == 0 && s.back() == ')') {
    const auto d = detail::parse_row(s.substr(5, s.size() - 6), "matrix '" + text + "'");
    RMatrix m = RMatrix::Zero(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }
  std::vector<std::vector<double>> rows;
  std::string row;
  std::istringstream is(s);
  while (std::getline(is, row, ';')) rows.push_back(detail::parse_row(row, "matrix '" + text + "'"));
  return detail::assemble(rows, "matrix '" + text + "'");
}

/// Row-major CSV; blank lines and lines starting with '#' are skipped.
inline RMatrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw OperatorError("cannot open matrix file " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    rows.push_back(detail::parse_row(line, path));
  }
  return detail::assemble(rows, path);
}

/// A matrix spec is either csv:<path> or the inline form of parse_matrix.
inline RMatrix matrix_from_spec(const std::string& spec) {
  if (spec.rfind("csv:", 0) == 0) return load_matrix_csv(spec.substr(4));
  return parse_matrix(spec);
}

}  // namespace pxap
