#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pxap/convolution.hpp"
#include "pxap/exponents.hpp"
#include "pxap/funcspec.hpp"
#include "pxap/modular.hpp"
#include "pxap/operators.hpp"
#include "pxap/specfun.hpp"
#include "pxap/stepanov.hpp"

namespace pxap::cli {

inline constexpr int kSuccess = 0;
inline constexpr int kVerificationFailed = 1;
inline constexpr int kUsageError = 2;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a subcommand reads. Strings hold unparsed specs; they are
/// validated by validate() before dispatch.
struct RunConfig {
  std::string subcommand;

  // Functions and exponents.
  std::string f = "sin(x)";
  std::string p = "2";
  std::string q = "2";
  std::string domain = "0,1";
  std::string kind = "luxemburg";

  // Stepanov scans.
  double eps = 0.1;
  double window = 1.0;
  std::string t_range = "0,100";
  double t_step = 0.05;
  std::string tau_range = "0,50";
  double tau_step = 0.01;
  double density_bound = 0.0;
  bool refine = true;
  std::string expect;

  // counterexample
  double lambda = 0.5;
  std::string deltas = "1e-3,1e-4,1e-5";
  std::optional<double> t0;
  std::optional<double> tau0;
  double growth_rtol = 0.25;

  // specfun
  std::string function = "ml";
  double alpha = 0.5;
  double beta = 1.0;

  // Operators.
  std::string matrix = "-1";
  std::string pencil;
  std::optional<double> c;
  double p_beta = 1.0;
  double p_M = 1.0;
  double gamma = 0.5;
  std::string family = "T";
  bool fit = false;
  double fit_slack = 0.1;

  // Shared sample grid: "a:b:n", "log:a:b:n" or a comma list.
  std::string grid;

  // convolve
  std::string kernel = "exp(-x)";
  double sigma = 0.0;
  std::string mode = "infinite";
  int K = 40;
  std::string direction;
  double ap_eps = 0.0;

  // solve-dfp
  std::string x0 = "1";
  std::string forcing = "0";
  double residual_tol = 1e-3;
  double residual_from = 0.1;

  std::string out_dir = ".";
  std::string name;
};

/// Shortest round-trip text of v rounded to 12 significant digits.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return std::string(buf, r.ptr);
}

inline double parse_number(std::string s, const std::string& what) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
  if (s == "inf" || s == "+inf") return kInf;
  if (s == "-inf") return -kInf;
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  auto r = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw UsageError(what + ": '" + s + "' is not a number");
  return v;
}

inline std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(item, what));
  if (out.empty()) throw UsageError(what + " is empty");
  return out;
}

inline Interval parse_interval(const std::string& text, const std::string& what) {
  const auto v = parse_list(text, what);
  if (v.size() != 2 || !(v[1] > v[0])) throw UsageError(what + " must be 'lo,hi' with lo < hi");
  return {v[0], v[1]};
}

/// "a:b:n" (n evenly spaced points), "log:a:b:n" (log spaced), or "t1,t2,...".
inline std::vector<double> parse_grid(const std::string& text, const std::string& what = "grid") {
  if (text.find(':') == std::string::npos) return parse_list(text, what);
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  const bool log = !parts.empty() && parts[0] == "log";
  if (log) parts.erase(parts.begin());
  if (parts.size() != 3) throw UsageError(what + " must be 'a:b:n' or 'log:a:b:n'");
  const double a = parse_number(parts[0], what), b = parse_number(parts[1], what);
  const double nd = parse_number(parts[2], what);
  if (!(nd >= 2.0) || nd != std::floor(nd) || nd > 1e7) throw UsageError(what + ": point count must be an integer >= 2");
  if (!(b > a) || !std::isfinite(a) || !std::isfinite(b)) throw UsageError(what + ": need finite a < b");
  if (log && !(a > 0.0)) throw UsageError(what + ": log grid needs a > 0");
  const auto n = static_cast<std::size_t>(nd);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(n - 1);
    out[i] = log ? a * std::pow(b / a, s) : a + (b - a) * s;
  }
  out.back() = b;
  return out;
}

/// Accumulates comma-separated rows.
class CsvTable {
 public:
  explicit CsvTable(const std::vector<std::string>& header) { line(header); }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    line(cells);
  }
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

/// "key: value" lines.
class Summary {
 public:
  Summary& add(const std::string& key, const std::string& value) {
    out_ << key << ": " << value << '\n';
    return *this;
  }
  Summary& add(const std::string& key, double value) { return add(key, format_number(value)); }
  Summary& add(const std::string& key, bool value) { return add(key, std::string(value ? "yes" : "no")); }
  Summary& add(const std::string& key, const char* value) { return add(key, std::string(value)); }
  Summary& add(const std::string& key, int value) { return add(key, std::to_string(value)); }
  Summary& add(const std::string& key, std::size_t value) { return add(key, std::to_string(value)); }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

struct Outcome {
  int status = kSuccess;
  std::string csv;
  std::string summary;
  /// One line for stderr when status is not success.
  std::string message;
};

namespace detail {

inline std::string complex_text(cdouble z) { return "(" + format_number(z.real()) + ", " + format_number(z.imag()) + ")"; }

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_number(v[i]);
  return s;
}

inline void require_file_specs(const std::string& spec, const std::string& what) {
  std::string path;
  if (spec.rfind("csv:", 0) == 0) {
    path = spec.substr(4);
    // csv:<path>[:time:value]; a path may not contain ':' here.
    path = path.substr(0, path.find(':'));
  }
  if (!path.empty() && !std::filesystem::is_regular_file(path))
    throw UsageError(what + ": file '" + path + "' does not exist");
}

inline StepanovConfig scan_config(const RunConfig& cfg) {
  StepanovConfig sc;
  sc.window = cfg.window;
  sc.scan_domain = parse_interval(cfg.t_range, "t-range");
  sc.t_step = cfg.t_step;
  sc.tau_range = parse_interval(cfg.tau_range, "tau-range");
  sc.tau_step = cfg.tau_step;
  sc.density_bound = cfg.density_bound;
  sc.refine = cfg.refine;
  sc.validate();
  return sc;
}

inline OperatorFamily operator_family(const RunConfig& cfg) {
  std::optional<ConditionP> claim;
  if (cfg.c) {
    if (!(*cfg.c > 0.0)) throw UsageError("c must be positive");
    if (!(cfg.p_M > 0.0)) throw UsageError("M must be positive");
    if (!(cfg.p_beta > 0.0 && cfg.p_beta <= 1.0)) throw UsageError("beta must lie in (0, 1]");
    claim = ConditionP{*cfg.c, cfg.p_beta, cfg.p_M};
  }
  const RMatrix a = matrix_from_spec(cfg.matrix);
  if (cfg.pencil.empty()) return OperatorFamily::matrix(a, claim);
  return OperatorFamily::pencil(a, matrix_from_spec(cfg.pencil), claim);
}

inline std::vector<std::string> vector_header(const std::string& first, Eigen::Index n, const std::string& prefix) {
  std::vector<std::string> h{first};
  for (Eigen::Index i = 0; i < n; ++i) h.push_back(prefix + std::to_string(i + 1));
  return h;
}

inline Vector direction(const RunConfig& cfg, Eigen::Index n) {
  if (cfg.direction.empty()) return Vector::Ones(n);
  const auto v = parse_list(cfg.direction, "direction");
  if (static_cast<Eigen::Index>(v.size()) != n) throw UsageError("direction needs " + std::to_string(n) + " entries");
  return Eigen::Map<const Vector>(v.data(), n);
}

inline std::string default_grid(const std::string& sub) {
  if (sub == "specfun") return "0:10:101";
  if (sub == "operator") return "log:0.1:10:21";
  if (sub == "convolve") return "0:20:201";
  return "0:5:5001";
}

inline Outcome run_norm(const RunConfig& cfg) {
  const auto f = parse_function_spec(cfg.f);
  const auto p = VariableExponent::parse(cfg.p);
  CsvTable csv({"quantity", "value"});
  Summary sum;
  sum.add("function", f.label()).add("exponent", p.label());
  if (cfg.kind == "luxemburg" || cfg.kind == "both") {
    const Interval dom = parse_interval(cfg.domain, "domain");
    const auto r = luxemburg_norm(f, p, dom);
    csv.line({"luxemburg", format_number(r.value)});
    csv.line({"modular_at_norm", format_number(r.modular_at_value)});
    sum.add("domain", "[" + format_number(dom.lo) + ", " + format_number(dom.hi) + "]");
    sum.add("luxemburg_norm", r.value).add("modular_at_norm", r.modular_at_value);
  }
  if (cfg.kind == "stepanov" || cfg.kind == "both") {
    const auto sc = scan_config(cfg);
    const auto s = stepanov_norm(f, p, sc);
    csv.line({"stepanov", format_number(s.value)});
    csv.line({"stepanov_argmax_t", format_number(s.argmax_t)});
    sum.add("window", sc.window).add("scan_domain", cfg.t_range).add("stepanov_norm", s.value).add("argmax_t", s.argmax_t);
  }
  return {kSuccess, csv.str(), sum.str(), {}};
}

inline Outcome run_ap_scan(const RunConfig& cfg) {
  const auto f = parse_function_spec(cfg.f);
  const auto p = VariableExponent::parse(cfg.p);
  const auto sc = scan_config(cfg);
  const auto rep = epsilon_period_scan(f, p, cfg.eps, sc);
  CsvTable csv({"tau", "accepted", "witness_t", "distance"});
  for (const auto& c : rep.candidates) csv.row({c.tau, c.accepted ? 1.0 : 0.0, c.witness_t, c.distance});
  Summary sum;
  sum.add("function", rep.subject).add("exponent", p.label()).add("epsilon", rep.epsilon);
  sum.add("scan_domain", cfg.t_range).add("tau_range", cfg.tau_range);
  sum.add("t_step", rep.t_step).add("tau_step", rep.tau_step);
  sum.add("candidates", rep.candidates.size()).add("accepted", rep.accepted_periods.size());
  sum.add("max_gap", rep.max_gap);
  sum.add("relative_density_l", rep.relative_density_l ? format_number(*rep.relative_density_l) : std::string("none"));
  sum.add("refinement_stable", rep.refinement_stable);
  sum.add("verdict", verdict_name(rep.verdict));
  for (std::size_t i = 0; i < rep.witnesses.size() && i < 5; ++i) {
    const auto& w = rep.witnesses[i];
    sum.add("witness", "t = " + format_number(w.t) + ", tau = " + format_number(w.tau) + ", distance = " +
                           format_number(w.distance));
  }
  if (!rep.note.empty()) sum.add("note", rep.note);
  Outcome out{kSuccess, csv.str(), {}, {}};
  if (!cfg.expect.empty()) {
    const bool ok = cfg.expect == verdict_name(rep.verdict);
    sum.add("expected_verdict", cfg.expect).add("verification", ok ? "passed" : "failed");
    if (!ok) {
      out.status = kVerificationFailed;
      out.message = std::string("verdict ") + verdict_name(rep.verdict) + " differs from expected " + cfg.expect;
    }
  }
  out.summary = sum.str();
  return out;
}

inline Outcome run_counterexample(const RunConfig& cfg) {
  const auto deltas = parse_list(cfg.deltas, "deltas");
  for (std::size_t i = 1; i < deltas.size(); ++i)
    if (!(deltas[i] < deltas[i - 1])) throw UsageError("deltas must be strictly decreasing");
  if (cfg.t0.has_value() != cfg.tau0.has_value()) throw UsageError("give both t and tau or neither");
  const auto [t, tau] = cfg.t0 ? std::pair{*cfg.t0, *cfg.tau0} : find_sign_flip_pair();
  const auto rep = counterexample_divergence(cfg.lambda, t, tau, deltas);
  CsvTable csv({"delta", "value", "growth", "growth_per_decade"});
  bool ok = true;
  double worst = kInf;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    double per_decade = 0.0;
    if (i > 0) {
      const double decades = std::log10(rep.rows[i - 1].delta / r.delta);
      per_decade = std::pow(r.growth, 1.0 / decades);
      if (!(std::abs(per_decade / rep.predicted_growth - 1.0) <= cfg.growth_rtol)) ok = false;
      worst = std::min(worst, per_decade);
    }
    csv.row({r.delta, r.value, r.growth, per_decade});
  }
  Summary sum;
  sum.add("lambda", rep.lambda).add("t", rep.t).add("tau", rep.tau);
  sum.add("sign_product", rep.product);
  sum.add("predicted_growth_per_decade", rep.predicted_growth);
  if (rep.rows.size() > 1) sum.add("smallest_growth_per_decade", worst);
  sum.add("relative_tolerance", cfg.growth_rtol);
  sum.add("verification", ok ? "passed" : "failed");
  Outcome out{ok ? kSuccess : kVerificationFailed, csv.str(), sum.str(), {}};
  if (!ok) out.message = "growth per decade departs from the predicted factor";
  return out;
}

inline Outcome run_specfun(const RunConfig& cfg) {
  const auto xs = parse_grid(cfg.grid.empty() ? default_grid("specfun") : cfg.grid);
  CsvTable csv({"x", "value"});
  Summary sum;
  std::function<double(double)> fn;
  if (cfg.function == "ml") {
    if (!(cfg.alpha > 0.0)) throw UsageError("alpha must be positive");
    fn = [&](double x) { return specfun::mittag_leffler(cfg.alpha, cfg.beta, x); };
    sum.add("function", "mittag_leffler").add("alpha", cfg.alpha).add("beta", cfg.beta);
  } else if (cfg.function == "wright") {
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw UsageError("gamma must lie in (0, 1)");
    fn = [&](double x) { return specfun::wright_phi(cfg.gamma, x); };
    sum.add("function", "wright_phi").add("gamma", cfg.gamma);
  } else {
    throw UsageError("function must be 'ml' or 'wright'");
  }
  double lo = kInf, hi = -kInf;
  for (double x : xs) {
    const double v = fn(x);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    csv.row({x, v});
  }
  sum.add("points", xs.size()).add("min_value", lo).add("max_value", hi);
  return {kSuccess, csv.str(), sum.str(), {}};
}

inline Outcome run_operator(const RunConfig& cfg) {
  const auto op = operator_family(cfg);
  const auto ts = parse_grid(cfg.grid.empty() ? default_grid("operator") : cfg.grid);
  for (double t : ts)
    if (!(t > 0.0)) throw UsageError("operator grid needs t > 0");
  const Eigen::Index n = op.dimension();
  Summary sum;
  sum.add("dimension", static_cast<int>(n)).add("pencil", op.is_pencil());
  for (const auto& mu : op.spectrum()) sum.add("eigenvalue", complex_text(mu));
  sum.add("contour_admissible", op.contour_admissible());
  Outcome out;
  if (op.claim()) {
    const auto rep = verify_condition_P(op);
    sum.add("claim_c", rep.params.c).add("claim_beta", rep.params.beta).add("claim_M", rep.params.M);
    sum.add("condition_p_samples", rep.samples).add("condition_p_worst_ratio", rep.worst_ratio);
    sum.add("condition_p_worst_lambda", complex_text(rep.worst_lambda));
    sum.add("condition_p", rep.passed ? "passed" : "failed");
    if (!rep.passed) {
      sum.add("condition_p_failure", rep.failure);
      out.status = kVerificationFailed;
      out.message = "condition (P) fails: " + rep.failure;
    }
  } else {
    sum.add("condition_p", "not claimed");
  }

  std::vector<std::string> header{"t"};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) header.push_back("m" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
  header.push_back("norm");
  CsvTable csv(header);

  std::function<RMatrix(double)> value;
  std::shared_ptr<SubordinatedFamily> fam;
  std::shared_ptr<Semigroup> T;
  if (cfg.family == "T") {
    T = std::make_shared<Semigroup>(op);
    value = [T](double t) { return (*T)(t); };
    sum.add("family", "T");
  } else if (cfg.family == "S" || cfg.family == "P" || cfg.family == "R") {
    fam = std::make_shared<SubordinatedFamily>(op, cfg.gamma);
    const char which = cfg.family[0];
    value = [fam, which](double t) { return which == 'S' ? fam->S(t) : which == 'P' ? fam->P(t) : fam->R(t); };
    sum.add("family", cfg.family).add("gamma", cfg.gamma);
  } else {
    throw UsageError("family must be T, S, P or R");
  }
  for (double t : ts) {
    const RMatrix m = value(t);
    std::vector<double> row{t};
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) row.push_back(m(i, j));
    row.push_back(spectral_norm(m));
    csv.row(row);
  }
  sum.add("points", ts.size());
  if (cfg.fit) {
    if (!fam || cfg.family == "R") throw UsageError("fit needs family S or P");
    const auto fit = decay_fit(*fam, cfg.family == "S" ? FamilySelector::S : FamilySelector::P, ts, cfg.fit_slack);
    sum.add("fit_regime", fit.large_time ? "t >= 1" : "t <= 1");
    sum.add("fit_slope", fit.slope).add("fit_theoretical", fit.theoretical).add("fit_slack", fit.slack);
    sum.add("fit", fit.passed ? "passed" : "failed");
    if (!fit.passed) {
      out.status = kVerificationFailed;
      out.message = "decay slope " + format_number(fit.slope) + " misses " + format_number(fit.theoretical);
    }
  }
  out.csv = csv.str();
  out.summary = sum.str();
  return out;
}

inline Kernel build_kernel(const RunConfig& cfg, Eigen::Index& n, Summary& sum) {
  if (cfg.kernel == "family" || cfg.kernel == "semigroup") {
    const auto op = operator_family(cfg);
    n = op.dimension();
    sum.add("kernel", cfg.kernel).add("matrix", cfg.matrix);
    if (cfg.kernel == "semigroup") return Kernel::semigroup(std::make_shared<const Semigroup>(op), n);
    sum.add("gamma", cfg.gamma);
    return Kernel::resolvent_family(std::make_shared<const SubordinatedFamily>(op, cfg.gamma));
  }
  const auto k = ScalarFunction::expression(cfg.kernel, {0.0, kInf});
  n = 1;
  sum.add("kernel", k.label()).add("sigma", cfg.sigma);
  return Kernel::scalar([k](double s) { return k(s); }, k.label(), cfg.sigma);
}

inline Outcome run_convolve(const RunConfig& cfg) {
  const auto ts = parse_grid(cfg.grid.empty() ? default_grid("convolve") : cfg.grid);
  const auto g = parse_function_spec(cfg.f);
  Summary sum;
  Eigen::Index n = 1;
  const Kernel R = build_kernel(cfg, n, sum);
  const Vector dir = direction(cfg, n);
  auto header = vector_header("t", n, "u");
  header.push_back("error_estimate");
  CsvTable csv(header);
  Outcome out;
  auto emit = [&](double t, const ConvolutionValue& v) {
    std::vector<double> row{t};
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(v.value(i));
    row.push_back(v.error);
    csv.row(row);
  };
  sum.add("function", g.label()).add("mode", cfg.mode);
  if (cfg.mode == "infinite") {
    if (cfg.K < 1) throw UsageError("K must be at least 1");
    InfiniteOptions opt;
    opt.K = cfg.K;
    opt.bound_scan = scan_config(cfg);
    const auto q = VariableExponent::parse(cfg.q);
    const InfiniteConvolution G(R, g, q, opt);
    const auto& ks = G.kernel();
    sum.add("q", q.label()).add("K", cfg.K).add("M", ks.M).add("partial_sum", ks.partial);
    sum.add("tail_model", tail_model_name(ks.tail_model)).add("tail_rate", ks.fit_rate).add("tail_bound", ks.tail_bound);
    sum.add("g_bound", G.g_bound()).add("truncation_bound", G.tail_bound());
    for (double t : ts) emit(t, G(t, dir));
    if (cfg.ap_eps > 0.0) {
      const auto rep = ap_transfer_check(G, G.p(), cfg.ap_eps, opt.bound_scan, ts);
      sum.add("ap_epsilon", rep.epsilon).add("ap_scan_verdict", verdict_name(rep.scan_verdict));
      if (!rep.applicable) {
        sum.add("ap_transfer", "not applicable").add("ap_note", rep.note);
      } else {
        sum.add("ap_periods", rep.taus.size()).add("ap_checks", rep.checks).add("ap_bound", rep.bound);
        sum.add("ap_max_difference", rep.max_difference).add("ap_violations", rep.violations.size());
        sum.add("ap_transfer", rep.violations.empty() ? "passed" : "failed");
        if (!rep.violations.empty()) {
          out.status = kVerificationFailed;
          out.message = "AP transfer bound violated " + std::to_string(rep.violations.size()) + " times";
        }
      }
    }
  } else if (cfg.mode == "finite") {
    for (double t : ts) {
      if (!(t >= 0.0)) throw UsageError("finite convolution grid needs t >= 0");
      emit(t, finite_convolution(R, g, t, dir));
    }
  } else {
    throw UsageError("mode must be 'infinite' or 'finite'");
  }
  sum.add("points", ts.size());
  out.csv = csv.str();
  out.summary = sum.str();
  return out;
}

inline Outcome run_solve_dfp(const RunConfig& cfg) {
  const auto op = operator_family(cfg);
  const auto ts = parse_grid(cfg.grid.empty() ? default_grid("solve-dfp") : cfg.grid);
  const auto x0v = parse_list(cfg.x0, "x0");
  const Eigen::Index n = op.dimension();
  if (static_cast<Eigen::Index>(x0v.size()) != n) throw UsageError("x0 needs " + std::to_string(n) + " entries");
  const Vector x0 = Eigen::Map<const Vector>(x0v.data(), n);
  const auto f = parse_function_spec(cfg.forcing);
  DfpOptions opt;
  opt.forcing_direction = direction(cfg, n);
  const auto u = solve_dfp(op, cfg.gamma, x0, f, ts, opt);

  Summary sum;
  sum.add("gamma", cfg.gamma).add("dimension", static_cast<int>(n)).add("forcing", f.label());
  sum.add("points", ts.size());
  std::vector<double> residual(ts.size(), std::numeric_limits<double>::quiet_NaN());
  Outcome out;
  double step = 0.0;
  for (std::size_t i = 1; i < ts.size(); ++i) step = std::max(step, ts[i] - ts[i - 1]);
  if (op.is_pencil()) {
    sum.add("residual", "not computed (pencil)");
  } else if (ts.size() < 3 || step > 1e-3 * (1.0 + 1e-9)) {
    sum.add("residual", "not computed (grid step above 1e-3)");
  } else {
    const auto r = caputo_residual(u, op, cfg.gamma, f, opt.forcing_direction);
    double worst = 0.0;
    for (std::size_t i = 0; i < r.t.size(); ++i) {
      residual[i + 1] = r.residual[i];
      if (r.t[i] >= cfg.residual_from) worst = std::max(worst, r.residual[i]);
    }
    const bool ok = worst <= cfg.residual_tol;
    sum.add("residual_from", cfg.residual_from).add("residual_max", worst).add("residual_tolerance", cfg.residual_tol);
    sum.add("residual", ok ? "passed" : "failed");
    if (!ok) {
      out.status = kVerificationFailed;
      out.message = "Caputo residual " + format_number(worst) + " exceeds " + format_number(cfg.residual_tol);
    }
  }
  auto header = vector_header("t", n, "u");
  header.push_back("error_estimate");
  header.push_back("residual");
  CsvTable csv(header);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::vector<std::string> cells{format_number(u.t[i])};
    for (Eigen::Index j = 0; j < n; ++j) cells.push_back(format_number(u.values[i](j)));
    cells.push_back(format_number(u.error[i]));
    cells.push_back(std::isnan(residual[i]) ? std::string() : format_number(residual[i]));
    csv.line(cells);
  }
  out.csv = csv.str();
  out.summary = sum.str();
  return out;
}

}  // namespace detail

/// Range and file checks that do not need any numerics.
inline void validate(const RunConfig& cfg) {
  static const std::vector<std::string> known{"norm", "ap-scan", "counterexample", "specfun",
                                              "operator", "convolve", "solve-dfp"};
  if (std::find(known.begin(), known.end(), cfg.subcommand) == known.end())
    throw UsageError("unknown subcommand '" + cfg.subcommand + "'");
  detail::require_file_specs(cfg.f, "f");
  detail::require_file_specs(cfg.forcing, "f");
  detail::require_file_specs(cfg.p, "p");
  detail::require_file_specs(cfg.q, "q");
  detail::require_file_specs(cfg.matrix, "matrix");
  detail::require_file_specs(cfg.pencil, "pencil");
  if (!(cfg.eps > 0.0)) throw UsageError("eps must be positive");
  if (!(cfg.window > 0.0)) throw UsageError("window must be positive");
  if (!(cfg.t_step > 0.0) || !(cfg.tau_step > 0.0)) throw UsageError("scan steps must be positive");
  if (cfg.kind != "luxemburg" && cfg.kind != "stepanov" && cfg.kind != "both")
    throw UsageError("kind must be luxemburg, stepanov or both");
  if (cfg.subcommand == "counterexample" && !(cfg.lambda > 0.0 && cfg.lambda < 2.0 / std::numbers::e))
    throw UsageError("lambda must lie in (0, 2/e)");
  if (!(cfg.growth_rtol > 0.0)) throw UsageError("growth-rtol must be positive");
  if ((cfg.subcommand == "solve-dfp" || cfg.subcommand == "convolve") && !(cfg.gamma > 0.0 && cfg.gamma <= 1.0))
    throw UsageError("gamma must lie in (0, 1]");
  if (!(cfg.residual_tol > 0.0)) throw UsageError("residual-tol must be positive");
  if (cfg.sigma <= -1.0) throw UsageError("sigma must exceed -1");
  if (cfg.ap_eps < 0.0) throw UsageError("ap-eps must be nonnegative");
}

/// Computes the artifacts of one run without touching the file system.
inline Outcome execute(const RunConfig& cfg) {
  validate(cfg);
  Outcome out;
  if (cfg.subcommand == "norm") out = detail::run_norm(cfg);
  else if (cfg.subcommand == "ap-scan") out = detail::run_ap_scan(cfg);
  else if (cfg.subcommand == "counterexample") out = detail::run_counterexample(cfg);
  else if (cfg.subcommand == "specfun") out = detail::run_specfun(cfg);
  else if (cfg.subcommand == "operator") out = detail::run_operator(cfg);
  else if (cfg.subcommand == "convolve") out = detail::run_convolve(cfg);
  else out = detail::run_solve_dfp(cfg);
  out.summary = "subcommand: " + cfg.subcommand + "\n" + out.summary + "status: " + std::to_string(out.status) + "\n";
  return out;
}

/// Runs `cfg` and writes <out_dir>/<name>.csv and <name>.summary.txt. Errors
/// in the inputs give kUsageError.
inline int run(const RunConfig& cfg, std::ostream& err = std::cerr) {
  Outcome out;
  try {
    out = execute(cfg);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
  const std::string name = cfg.name.empty() ? cfg.subcommand : cfg.name;
  const std::filesystem::path dir(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (const auto& [file, text] : {std::pair{dir / (name + ".csv"), &out.csv},
                                   std::pair{dir / (name + ".summary.txt"), &out.summary}}) {
    std::ofstream os(file, std::ios::binary);
    os << *text;
    if (!os) {
      err << "error: cannot write '" << file.string() << "'\n";
      return kUsageError;
    }
  }
  if (out.status != kSuccess) err << "verification failed: " << out.message << '\n';
  return out.status;
}

namespace detail {

// key = value lines, [subcommand] sections and '#' comments. Values are kept
// whole: "0,2" and "a,b;c,d" are single strings.
inline std::shared_ptr<CLI::ConfigBase> config_format() {
  auto fmt = std::make_shared<CLI::ConfigBase>();
  fmt->comment('#')->arrayBounds('\x01', '\x02')->arrayDelimiter('\x03');
  return fmt;
}

inline void add_scan_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--window", cfg.window, "window length")->capture_default_str();
  sub->add_option("--t-range", cfg.t_range, "window starts scanned, lo,hi")->capture_default_str();
  sub->add_option("--t-step", cfg.t_step, "window start step")->capture_default_str();
  sub->add_option("--tau-range", cfg.tau_range, "candidate periods, lo,hi")->capture_default_str();
  sub->add_option("--tau-step", cfg.tau_step, "period step")->capture_default_str();
  sub->add_option("--density-bound", cfg.density_bound, "largest admissible gap, 0 for half the tau range")
      ->capture_default_str();
  sub->add_option("--refine", cfg.refine, "re-test accepted periods at half the t step")->capture_default_str();
}

inline void add_operator_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--matrix", cfg.matrix, "A as 'a,b;c,d', 'diag(...)' or csv:<path>")->capture_default_str();
  sub->add_option("--pencil", cfg.pencil, "B of the pencil (A, B); empty for a plain matrix");
  sub->add_option("--c", cfg.c, "claimed condition (P) constant c; enables the check");
  sub->add_option("--p-beta", cfg.p_beta, "claimed condition (P) exponent beta")->capture_default_str();
  sub->add_option("--p-M", cfg.p_M, "claimed condition (P) constant M")->capture_default_str();
  sub->add_option("--gamma", cfg.gamma, "fractional order")->capture_default_str();
}

}  // namespace detail

/// Parses argv-style arguments (without the program name), applies the
/// optional --config file and runs. Flags override the file.
inline int main_with_args(const std::vector<std::string>& args, std::ostream& out = std::cout,
                          std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"Variable-exponent norms, Stepanov scans and fractional evolution tools", "pxap"};
  app.config_formatter(detail::config_format());
  app.set_config("--config", "", "key = value file with [subcommand] sections");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--out-dir", cfg.out_dir, "directory for the outputs")->capture_default_str();
  app.add_option("--name", cfg.name, "output base name (default: the subcommand)");

  auto* norm = app.add_subcommand("norm", "Luxemburg and Stepanov norms");
  norm->add_option("--f", cfg.f, "function: expression in x, catalog name or csv:<path>")->capture_default_str();
  norm->add_option("--p", cfg.p, "exponent: number, inf, expression or csv:<path>")->capture_default_str();
  norm->add_option("--domain", cfg.domain, "integration domain lo,hi")->capture_default_str();
  norm->add_option("--kind", cfg.kind, "luxemburg, stepanov or both")->capture_default_str();
  detail::add_scan_options(norm, cfg);

  auto* scan = app.add_subcommand("ap-scan", "epsilon-period scan");
  scan->add_option("--f", cfg.f, "function")->capture_default_str();
  scan->add_option("--p", cfg.p, "exponent")->capture_default_str();
  scan->add_option("--eps", cfg.eps, "epsilon")->capture_default_str();
  scan->add_option("--expect", cfg.expect, "expected verdict; a mismatch exits 1");
  detail::add_scan_options(scan, cfg);

  auto* ce = app.add_subcommand("counterexample", "truncated modulars of sign(sin x + sin sqrt2 x)");
  ce->add_option("--lambda", cfg.lambda, "scale in (0, 2/e)")->capture_default_str();
  ce->add_option("--deltas", cfg.deltas, "decreasing truncation points")->capture_default_str();
  ce->add_option("--t", cfg.t0, "window start (default: first sign-flip pair)");
  ce->add_option("--tau", cfg.tau0, "shift (default: first sign-flip pair)");
  ce->add_option("--growth-rtol", cfg.growth_rtol, "allowed relative departure from the predicted growth")
      ->capture_default_str();

  auto* sf = app.add_subcommand("specfun", "Mittag-Leffler and Wright tables");
  sf->add_option("--function", cfg.function, "ml or wright")->capture_default_str();
  sf->add_option("--alpha", cfg.alpha, "Mittag-Leffler alpha")->capture_default_str();
  sf->add_option("--beta", cfg.beta, "Mittag-Leffler beta")->capture_default_str();
  sf->add_option("--gamma", cfg.gamma, "Wright gamma")->capture_default_str();
  sf->add_option("--grid", cfg.grid, "x grid: a:b:n, log:a:b:n or a list (default 0:10:101)");

  auto* opr = app.add_subcommand("operator", "condition (P) report and family tables");
  detail::add_operator_options(opr, cfg);
  opr->add_option("--family", cfg.family, "T, S, P or R")->capture_default_str();
  opr->add_option("--grid", cfg.grid, "t grid (default log:0.1:10:21)");
  opr->add_flag("--fit", cfg.fit, "fit the log-log decay slope of S or P");
  opr->add_option("--fit-slack", cfg.fit_slack, "slope slack")->capture_default_str();

  auto* conv = app.add_subcommand("convolve", "infinite (G) or finite (H) convolutions");
  conv->add_option("--f", cfg.f, "g for G, f for H")->capture_default_str();
  conv->add_option("--kernel", cfg.kernel, "expression in x, 'family' (R_gamma) or 'semigroup'")
      ->capture_default_str();
  conv->add_option("--sigma", cfg.sigma, "kernel singularity order at 0")->capture_default_str();
  conv->add_option("--mode", cfg.mode, "infinite or finite")->capture_default_str();
  conv->add_option("--q", cfg.q, "kernel exponent q")->capture_default_str();
  conv->add_option("--K", cfg.K, "number of kernel windows")->capture_default_str();
  conv->add_option("--direction", cfg.direction, "vector x multiplying the kernel");
  conv->add_option("--grid", cfg.grid, "t grid (default 0:20:201)");
  conv->add_option("--ap-eps", cfg.ap_eps, "run the AP transfer check at this epsilon")->capture_default_str();
  detail::add_operator_options(conv, cfg);
  detail::add_scan_options(conv, cfg);

  auto* dfp = app.add_subcommand("solve-dfp", "mild solution of D^gamma u = A u + f b");
  detail::add_operator_options(dfp, cfg);
  dfp->add_option("--x0", cfg.x0, "initial value")->capture_default_str();
  dfp->add_option("--f", cfg.forcing, "forcing f(t)")->capture_default_str();
  dfp->add_option("--direction", cfg.direction, "forcing direction b");
  dfp->add_option("--grid", cfg.grid, "t grid (default 0:5:5001)");
  dfp->add_option("--residual-tol", cfg.residual_tol, "largest admissible Caputo residual")->capture_default_str();
  dfp->add_option("--residual-from", cfg.residual_from, "residual checked for t >= this")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsageError;
  }
  for (auto* sub : app.get_subcommands()) cfg.subcommand = sub->get_name();
  return run(cfg, err);
}

}  // namespace pxap::cli
