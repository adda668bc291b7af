#pragma once

/// \file
/// Scalar functions of one real variable: parsed expressions, a small named
/// catalog, and sampled CSV data with linear interpolation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pxap {

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  static Interval real_line() { return {}; }
  bool contains(double x) const { return x >= lo && x <= hi; }
  double length() const { return hi - lo; }
  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Raised for out-of-domain arguments and non-finite intermediate values.
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Func { Sin, Cos, Exp, Ln, Sqrt, Abs, Sign };

inline std::string_view func_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Ln: return "ln";
    case Func::Sqrt: return "sqrt";
    case Func::Abs: return "abs";
    case Func::Sign: return "sign";
  }
  return "?";
}

/// sign with sign(0) = 0.
inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Immutable expression tree.
class FuncExpr {
 public:
  enum class Kind { Number, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };

  struct Node {
    Kind kind;
    double number = 0.0;
    Func func = Func::Sin;
    std::shared_ptr<const Node> lhs, rhs;
  };
  using NodePtr = std::shared_ptr<const Node>;

  FuncExpr() = default;
  FuncExpr(std::string source, NodePtr root) : source_(std::move(source)), root_(std::move(root)) {
    compile(root_);
  }

  const std::string& source() const { return source_; }
  const NodePtr& root() const { return root_; }

  double operator()(double x) const { return run(x); }

  /// Fully parenthesized text that parses back to an identical tree.
  std::string print() const {
    std::string out;
    print_node(*root_, out);
    return out;
  }

  friend bool operator==(const FuncExpr& a, const FuncExpr& b) {
    return same(a.root_.get(), b.root_.get());
  }

  /// Arguments of every sign() and abs() call, as standalone expressions.
  std::vector<FuncExpr> kink_arguments() const {
    std::vector<FuncExpr> out;
    collect_kinks(root_, out);
    return out;
  }

 private:
  enum class Op : unsigned char { Push, X, Neg, Add, Sub, Mul, Div, Pow, Call };
  struct Instr {
    Op op;
    Func func;
    double value;
  };

  static bool same(const Node* a, const Node* b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind != b->kind) return false;
    if (a->kind == Kind::Number && !(a->number == b->number && std::signbit(a->number) == std::signbit(b->number)))
      return false;
    if (a->kind == Kind::Call && a->func != b->func) return false;
    return same(a->lhs.get(), b->lhs.get()) && same(a->rhs.get(), b->rhs.get());
  }

  static void print_number(double v, std::string& out) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
  }

  static void print_node(const Node& n, std::string& out) {
    switch (n.kind) {
      case Kind::Number: print_number(n.number, out); return;
      case Kind::Variable: out += 'x'; return;
      case Kind::Negate:
        out += "(-";
        print_node(*n.lhs, out);
        out += ')';
        return;
      case Kind::Call:
        out += func_name(n.func);
        out += '(';
        print_node(*n.lhs, out);
        out += ')';
        return;
      default: break;
    }
    const char* op = n.kind == Kind::Add ? " + " : n.kind == Kind::Sub ? " - " : n.kind == Kind::Mul ? " * " : n.kind == Kind::Div ? " / " : " ^ ";
    out += '(';
    print_node(*n.lhs, out);
    out += op;
    print_node(*n.rhs, out);
    out += ')';
  }

  void collect_kinks(const NodePtr& n, std::vector<FuncExpr>& out) const {
    if (!n) return;
    if (n->kind == Kind::Call && (n->func == Func::Sign || n->func == Func::Abs)) {
      out.emplace_back(std::string{}, n->lhs);
    }
    collect_kinks(n->lhs, out);
    collect_kinks(n->rhs, out);
  }

  void compile(const NodePtr& n) {
    if (!n) return;
    switch (n->kind) {
      case Kind::Number: code_.push_back({Op::Push, Func::Sin, n->number}); return;
      case Kind::Variable: code_.push_back({Op::X, Func::Sin, 0.0}); return;
      case Kind::Negate:
        compile(n->lhs);
        code_.push_back({Op::Neg, Func::Sin, 0.0});
        return;
      case Kind::Call:
        compile(n->lhs);
        code_.push_back({Op::Call, n->func, 0.0});
        return;
      default: break;
    }
    compile(n->lhs);
    compile(n->rhs);
    Op op = n->kind == Kind::Add ? Op::Add : n->kind == Kind::Sub ? Op::Sub : n->kind == Kind::Mul ? Op::Mul : n->kind == Kind::Div ? Op::Div : Op::Pow;
    code_.push_back({op, Func::Sin, 0.0});
  }

  static double call(Func f, double v) {
    switch (f) {
      case Func::Sin: return std::sin(v);
      case Func::Cos: return std::cos(v);
      case Func::Exp: return std::exp(v);
      case Func::Ln:
        if (!(v > 0.0)) throw EvalError("ln of nonpositive argument");
        return std::log(v);
      case Func::Sqrt:
        if (v < 0.0) throw EvalError("sqrt of negative argument");
        return std::sqrt(v);
      case Func::Abs: return std::abs(v);
      case Func::Sign: return sign(v);
    }
    return v;
  }

  double run(double x) const {
    double stack[64];
    std::vector<double> heap_stack;
    double* st = stack;
    if (code_.size() > 64) {
      heap_stack.resize(code_.size());
      st = heap_stack.data();
    }
    std::size_t top = 0;
    for (const auto& ins : code_) {
      switch (ins.op) {
        case Op::Push: st[top++] = ins.value; break;
        case Op::X: st[top++] = x; break;
        case Op::Neg: st[top - 1] = -st[top - 1]; break;
        case Op::Call: st[top - 1] = call(ins.func, st[top - 1]); break;
        case Op::Add: --top; st[top - 1] += st[top]; break;
        case Op::Sub: --top; st[top - 1] -= st[top]; break;
        case Op::Mul: --top; st[top - 1] *= st[top]; break;
        case Op::Div: --top; st[top - 1] /= st[top]; break;
        case Op::Pow: --top; st[top - 1] = std::pow(st[top - 1], st[top]); break;
      }
      if (!std::isfinite(st[top - 1])) throw EvalError("non-finite intermediate value");
    }
    return st[0];
  }

  std::string source_;
  NodePtr root_;
  std::vector<Instr> code_;
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view src) : s_(src) {}

  FuncExpr::NodePtr parse() {
    skip();
    if (pos_ >= s_.size()) throw ParseError("empty expression", pos_);
    auto n = expr();
    skip();
    if (pos_ < s_.size()) throw ParseError("unexpected character '" + std::string(1, s_[pos_]) + "'", pos_);
    return n;
  }

 private:
  using Kind = FuncExpr::Kind;
  using NodePtr = FuncExpr::NodePtr;

  static NodePtr make(Kind k, NodePtr l = nullptr, NodePtr r = nullptr) {
    auto n = std::make_shared<FuncExpr::Node>();
    n->kind = k;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
  }
  static NodePtr number(double v) {
    auto n = std::make_shared<FuncExpr::Node>();
    n->kind = Kind::Number;
    n->number = v;
    return n;
  }

  void skip() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    auto lhs = term();
    while (true) {
      if (eat('+')) lhs = make(Kind::Add, lhs, term());
      else if (eat('-')) lhs = make(Kind::Sub, lhs, term());
      else return lhs;
    }
  }
  NodePtr term() {
    auto lhs = unary();
    while (true) {
      if (eat('*')) lhs = make(Kind::Mul, lhs, unary());
      else if (eat('/')) lhs = make(Kind::Div, lhs, unary());
      else return lhs;
    }
  }
  NodePtr unary() {
    if (eat('-')) return make(Kind::Negate, unary());
    if (eat('+')) return unary();
    return power();
  }
  NodePtr power() {
    auto base = primary();
    if (eat('^')) return make(Kind::Pow, base, unary());
    return base;
  }
  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      auto inner = expr();
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if ((c >= '0' && c <= '9') || c == '.') {
      double v = 0.0;
      auto r = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
      if (r.ec != std::errc()) throw ParseError("malformed number", pos_);
      pos_ = static_cast<std::size_t>(r.ptr - s_.data());
      return number(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string_view id = s_.substr(start, pos_ - start);
      if (id == "x") return make(Kind::Variable);
      if (id == "pi") return number(std::numbers::pi);
      if (id == "e") return number(std::numbers::e);
      static const std::map<std::string_view, Func> funcs{
          {"sin", Func::Sin}, {"cos", Func::Cos},   {"exp", Func::Exp},  {"ln", Func::Ln},
          {"sqrt", Func::Sqrt}, {"abs", Func::Abs}, {"sign", Func::Sign}};
      auto it = funcs.find(id);
      if (it == funcs.end()) throw ParseError("unknown identifier '" + std::string(id) + "'", start);
      if (!eat('(')) throw ParseError("expected '(' after " + std::string(id), pos_);
      auto arg = expr();
      skip();
      if (pos_ < s_.size() && s_[pos_] == ',')
        throw ParseError(std::string(id) + " takes exactly one argument", pos_);
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      auto n = std::make_shared<FuncExpr::Node>();
      n->kind = Kind::Call;
      n->func = it->second;
      n->lhs = std::move(arg);
      return n;
    }
    throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline FuncExpr parse_expr(std::string_view source) {
  detail::Parser p(source);
  return FuncExpr(std::string(source), p.parse());
}

/// Zero crossings of g on [a, b]: sign changes between samples (at least
/// `min_samples`, otherwise `per_unit` per unit length) polished by the
/// Illinois variant of regula falsi.
inline std::vector<double> find_crossings(const std::function<double(double)>& g, double a, double b,
                                          double per_unit = 64.0, int min_samples = 64) {
  std::vector<double> roots;
  if (!(b > a)) return roots;
  const int n = std::max(min_samples, static_cast<int>(std::ceil(per_unit * (b - a))));
  const double h = (b - a) / n;
  double x0 = a;
  double g0 = g(x0);
  for (int i = 1; i <= n; ++i) {
    const double x1 = (i == n) ? b : a + i * h;
    const double g1 = g(x1);
    if (g0 == 0.0) {
      if (x0 > a && x0 < b) roots.push_back(x0);
    } else if (g1 != 0.0 && (g0 < 0.0) != (g1 < 0.0)) {
      double lo = x0, hi = x1, glo = g0, ghi = g1;
      int side = 0;
      double root = 0.5 * (lo + hi);
      for (int it = 0; it < 100; ++it) {
        const double width_tol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(lo));
        if (hi - lo <= width_tol) break;
        double m = (lo * ghi - hi * glo) / (ghi - glo);
        if (!(m > lo && m < hi)) m = 0.5 * (lo + hi);
        const double gm = g(m);
        root = m;
        if (gm == 0.0) break;
        if ((gm < 0.0) == (glo < 0.0)) {
          lo = m;
          glo = gm;
          if (side == -1) ghi *= 0.5;
          side = -1;
        } else {
          hi = m;
          ghi = gm;
          if (side == 1) glo *= 0.5;
          side = 1;
        }
        root = 0.5 * (lo + hi);
        if (std::abs(gm) <= 1e-300) break;
      }
      roots.push_back(root);
    }
    x0 = x1;
    g0 = g1;
  }
  return roots;
}

enum class Interpolation { Linear };

/// A real function of one real variable with a declared domain.
///
/// Sampled functions never extrapolate: queries outside the sample grid raise
/// EvalError.
class ScalarFunction {
 public:
  enum class Kind { Expression, Catalog, Sampled, Composite };

  ScalarFunction() : ScalarFunction(expression("0")) {}

  static ScalarFunction expression(std::string_view src, Interval domain = Interval::real_line()) {
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Expression;
    impl->expr = parse_expr(src);
    impl->domain = domain;
    impl->label = std::string(src);
    return ScalarFunction(std::move(impl));
  }

  /// Named entries: sin, cos, quasi_periodic (sin x + sin sqrt2 x), sign_sin,
  /// sign_quasi_periodic, log_exponent (1 - ln x on (0, 1]).
  static ScalarFunction catalog(std::string_view name) {
    static const std::map<std::string_view, std::pair<std::string_view, Interval>> entries{
        {"sin", {"sin(x)", Interval::real_line()}},
        {"cos", {"cos(x)", Interval::real_line()}},
        {"quasi_periodic", {"sin(x)+sin(sqrt(2)*x)", Interval::real_line()}},
        {"sign_sin", {"sign(sin(x))", Interval::real_line()}},
        {"sign_quasi_periodic", {"sign(sin(x)+sin(sqrt(2)*x))", Interval::real_line()}},
        {"log_exponent", {"1-ln(x)", Interval{0.0, 1.0}}},
    };
    auto it = entries.find(name);
    if (it == entries.end()) throw std::invalid_argument("unknown catalog function '" + std::string(name) + "'");
    auto f = expression(it->second.first, it->second.second);
    auto impl = std::make_shared<Impl>(*f.impl_);
    impl->kind = Kind::Catalog;
    impl->label = std::string(name);
    return ScalarFunction(std::move(impl));
  }

  static ScalarFunction sampled(std::vector<double> t, std::vector<double> v,
                                Interpolation rule = Interpolation::Linear) {
    if (t.size() != v.size()) throw std::invalid_argument("sample grid and values differ in length");
    if (t.size() < 2) throw std::invalid_argument("at least two samples are required");
    for (std::size_t i = 1; i < t.size(); ++i)
      if (!(t[i] > t[i - 1])) throw std::invalid_argument("sample times must be strictly increasing");
    for (double y : v)
      if (!std::isfinite(y)) throw std::invalid_argument("sample values must be finite");
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Sampled;
    impl->domain = {t.front(), t.back()};
    impl->t = std::move(t);
    impl->v = std::move(v);
    impl->rule = rule;
    impl->label = "samples";
    return ScalarFunction(std::move(impl));
  }

  /// Library-internal composition of other functions. `kinks` reports points
  /// in [a, b] where the callable may jump or lose smoothness.
  static ScalarFunction composite(std::function<double(double)> fn, Interval domain, std::string label,
                                  std::function<std::vector<double>(double, double)> kinks = {}) {
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Composite;
    impl->fn = std::move(fn);
    impl->kinks = std::move(kinks);
    impl->domain = domain;
    impl->label = std::move(label);
    return ScalarFunction(std::move(impl));
  }

  Kind kind() const { return impl_->kind; }
  const Interval& domain() const { return impl_->domain; }
  const std::string& label() const { return impl_->label; }
  const FuncExpr* expr() const {
    return impl_->kind == Kind::Expression || impl_->kind == Kind::Catalog ? &impl_->expr : nullptr;
  }
  Interpolation interpolation() const { return impl_->rule; }

  double operator()(double x) const {
    const Impl& m = *impl_;
    if (!m.domain.contains(x)) throw EvalError("argument " + std::to_string(x) + " outside domain of " + m.label);
    switch (m.kind) {
      case Kind::Expression:
      case Kind::Catalog: return m.expr(x);
      case Kind::Sampled: return m.interpolate(x);
      case Kind::Composite: return m.fn(x);
    }
    return 0.0;
  }

  /// Points in (a, b) where the function may jump or have a kink.
  std::vector<double> breakpoints(double a, double b) const {
    const Impl& m = *impl_;
    std::vector<double> out;
    switch (m.kind) {
      case Kind::Expression:
      case Kind::Catalog:
        for (const auto& arg : m.expr.kink_arguments()) {
          auto r = find_crossings([&](double x) { return arg(x); }, a, b);
          out.insert(out.end(), r.begin(), r.end());
        }
        break;
      case Kind::Sampled: {
        auto lo = std::upper_bound(m.t.begin(), m.t.end(), a);
        auto hi = std::lower_bound(m.t.begin(), m.t.end(), b);
        out.assign(lo, hi);
        break;
      }
      case Kind::Composite:
        if (m.kinks) out = m.kinks(a, b);
        break;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    std::erase_if(out, [&](double x) { return !(x > a && x < b); });
    return out;
  }

  /// x -> f(-x).
  ScalarFunction reflected() const {
    ScalarFunction self = *this;
    Interval d{-domain().hi, -domain().lo};
    return composite([self](double x) { return self(-x); }, d, "reflect(" + label() + ")",
                     [self](double a, double b) {
                       auto k = self.breakpoints(-b, -a);
                       for (auto& v : k) v = -v;
                       return k;
                     });
  }

  /// x -> f(x + a).
  ScalarFunction shifted(double a) const {
    ScalarFunction self = *this;
    Interval d{domain().lo - a, domain().hi - a};
    return composite([self, a](double x) { return self(x + a); }, d, "shift(" + label() + ")",
                     [self, a](double lo, double hi) {
                       auto k = self.breakpoints(lo + a, hi + a);
                       for (auto& v : k) v -= a;
                       return k;
                     });
  }

 private:
  struct Impl {
    Kind kind = Kind::Expression;
    Interval domain;
    std::string label;
    FuncExpr expr;
    std::vector<double> t, v;
    Interpolation rule = Interpolation::Linear;
    std::function<double(double)> fn;
    std::function<std::vector<double>(double, double)> kinks;

    double interpolate(double x) const {
      auto it = std::upper_bound(t.begin(), t.end(), x);
      if (it == t.end()) return v.back();
      const std::size_t i = static_cast<std::size_t>(it - t.begin());
      if (i == 0) return v.front();
      const double w = (x - t[i - 1]) / (t[i] - t[i - 1]);
      return v[i - 1] + w * (v[i] - v[i - 1]);
    }
  };

  explicit ScalarFunction(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  }
  return out;
}

inline double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) throw CsvError("line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
  return v;
}

inline std::size_t find_column(const std::vector<std::string>& header, const std::string& spec) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == spec) return i;
  std::size_t idx = 0;
  auto r = std::from_chars(spec.data(), spec.data() + spec.size(), idx);
  if (r.ec == std::errc() && r.ptr == spec.data() + spec.size() && idx < header.size()) return idx;
  throw CsvError("missing column '" + spec + "'");
}

}  // namespace detail

/// Reads a headed CSV; `time_column` and `value_column` are header names or
/// zero-based indices.
inline ScalarFunction load_samples(const std::string& path, const std::string& time_column = "0",
                                   const std::string& value_column = "1") {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw CsvError("empty file '" + path + "'");
  const auto header = detail::split_csv_line(line);
  const std::size_t tc = detail::find_column(header, time_column);
  const std::size_t vc = detail::find_column(header, value_column);
  std::vector<double> t, v;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() <= std::max(tc, vc)) throw CsvError("line " + std::to_string(line_no) + ": too few columns");
    t.push_back(detail::parse_double(cells[tc], line_no));
    v.push_back(detail::parse_double(cells[vc], line_no));
    if (t.size() >= 2 && !(t.back() > t[t.size() - 2]))
      throw CsvError("line " + std::to_string(line_no) + ": time column is not strictly increasing");
  }
  if (t.size() < 2) throw CsvError("need at least two data rows in '" + path + "'");
  return ScalarFunction::sampled(std::move(t), std::move(v));
}

/// Accepts a catalog name, "csv:<path>[:time_col:value_col]", or an expression.
inline ScalarFunction parse_function_spec(const std::string& spec) {
  if (spec.rfind("csv:", 0) == 0) {
    std::string rest = spec.substr(4);
    std::vector<std::string> parts;
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.empty()) throw CsvError("csv spec needs a path");
    return load_samples(parts[0], parts.size() > 1 ? parts[1] : "0", parts.size() > 2 ? parts[2] : "1");
  }
  try {
    return ScalarFunction::catalog(spec);
  } catch (const std::invalid_argument&) {
  }
  return ScalarFunction::expression(spec);
}

}  // namespace pxap
