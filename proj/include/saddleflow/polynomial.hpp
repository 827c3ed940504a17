#pragma once
// Multivariate polynomials with exact derivatives, plus a small expression
// grammar (+ - * / ^ over numbers and variables) that parses into them.

#include <Eigen/Dense>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "saddleflow/errors.hpp"

namespace saddleflow {

/// Multi-index of exponents, one per variable.
using Exponents = std::vector<int>;

class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(int nvars) : nvars_(nvars) {
    if (nvars < 0) throw InputError("Polynomial: negative variable count");
  }

  static Polynomial constant(int nvars, double c) {
    Polynomial p(nvars);
    p.add_term(Exponents(static_cast<std::size_t>(nvars), 0), c);
    return p;
  }

  static Polynomial variable(int nvars, int index) {
    if (index < 0 || index >= nvars) throw InputError("Polynomial: variable index out of range");
    Polynomial p(nvars);
    Exponents e(static_cast<std::size_t>(nvars), 0);
    e[static_cast<std::size_t>(index)] = 1;
    p.add_term(std::move(e), 1.0);
    return p;
  }

  int nvars() const { return nvars_; }
  const std::map<Exponents, double>& terms() const { return terms_; }

  void add_term(Exponents e, double coef) {
    if (static_cast<int>(e.size()) != nvars_) throw InputError("Polynomial: exponent length mismatch");
    for (int k : e)
      if (k < 0) throw InputError("Polynomial: negative exponent");
    if (!std::isfinite(coef)) throw InputError("Polynomial: non-finite coefficient");
    if (coef == 0.0) return;
    auto [it, inserted] = terms_.try_emplace(std::move(e), coef);
    if (!inserted) {
      it->second += coef;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  int degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) d = std::max(d, total(e));
    return d;
  }

  bool is_zero() const { return terms_.empty(); }

  double eval(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    check_arg(z);
    double s = 0.0;
    for (const auto& [e, c] : terms_) s += c * monomial(e, z);
    return s;
  }

  Polynomial derivative(int var) const {
    if (var < 0 || var >= nvars_) throw InputError("Polynomial: derivative index out of range");
    Polynomial d(nvars_);
    for (const auto& [e, c] : terms_) {
      const int k = e[static_cast<std::size_t>(var)];
      if (k == 0) continue;
      Exponents f = e;
      f[static_cast<std::size_t>(var)] = k - 1;
      d.add_term(std::move(f), c * k);
    }
    return d;
  }

  Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    Eigen::VectorXd g;
    gradient_into(z, g);
    return g;
  }

  /// Gradient written into `g` (no allocation when g already has the right size).
  void gradient_into(const Eigen::Ref<const Eigen::VectorXd>& z, Eigen::VectorXd& g) const {
    check_arg(z);
    g.setZero(nvars_);
    for (const auto& [e, c] : terms_) {
      for (int i = 0; i < nvars_; ++i) {
        const int k = e[static_cast<std::size_t>(i)];
        if (k == 0) continue;
        g(i) += c * k * monomial_except(e, z, i, 1);
      }
    }
  }

  Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    check_arg(z);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nvars_, nvars_);
    for (const auto& [e, c] : terms_) {
      for (int i = 0; i < nvars_; ++i) {
        const int ki = e[static_cast<std::size_t>(i)];
        if (ki == 0) continue;
        if (ki >= 2) H(i, i) += c * ki * (ki - 1) * monomial_except(e, z, i, 2);
        for (int j = i + 1; j < nvars_; ++j) {
          const int kj = e[static_cast<std::size_t>(j)];
          if (kj == 0) continue;
          Exponents f = e;
          f[static_cast<std::size_t>(i)] -= 1;
          f[static_cast<std::size_t>(j)] -= 1;
          const double v = c * ki * kj * monomial(f, z);
          H(i, j) += v;
          H(j, i) += v;
        }
      }
    }
    return H;
  }

  /// p(diag(s) z): each coefficient scaled by prod s_i^{e_i}.
  Polynomial scaled(const Eigen::VectorXd& s) const {
    if (s.size() != nvars_) throw InputError("Polynomial::scaled: dimension mismatch");
    Polynomial out(nvars_);
    for (const auto& [e, c] : terms_) out.add_term(e, c * monomial(e, s));
    return out;
  }

  /// Embeds into a larger variable set, placing variable i at offset + i.
  Polynomial embedded(int nvars, int offset) const {
    if (offset < 0 || offset + nvars_ > nvars) throw InputError("Polynomial::embedded: out of range");
    Polynomial out(nvars);
    for (const auto& [e, c] : terms_) {
      Exponents f(static_cast<std::size_t>(nvars), 0);
      for (int i = 0; i < nvars_; ++i) f[static_cast<std::size_t>(offset + i)] = e[static_cast<std::size_t>(i)];
      out.add_term(std::move(f), c);
    }
    return out;
  }

  /// Coefficient matrices C_a of the Hessian polynomial H(z) = sum_a C_a z^a.
  std::vector<Eigen::MatrixXd> hessian_coefficients() const {
    std::map<Exponents, Eigen::MatrixXd> by_monomial;
    for (int i = 0; i < nvars_; ++i) {
      const Polynomial di = derivative(i);
      for (int j = i; j < nvars_; ++j) {
        const Polynomial dij = di.derivative(j);
        for (const auto& [e, c] : dij.terms()) {
          auto [it, inserted] = by_monomial.try_emplace(e, Eigen::MatrixXd::Zero(nvars_, nvars_));
          it->second(i, j) += c;
          if (i != j) it->second(j, i) += c;
        }
      }
    }
    std::vector<Eigen::MatrixXd> out;
    out.reserve(by_monomial.size());
    for (auto& [e, M] : by_monomial) out.push_back(std::move(M));
    return out;
  }

  Polynomial operator+(const Polynomial& o) const {
    check_compatible(o);
    Polynomial r = *this;
    for (const auto& [e, c] : o.terms_) r.add_term(e, c);
    return r;
  }

  Polynomial operator-() const {
    Polynomial r(nvars_);
    for (const auto& [e, c] : terms_) r.add_term(e, -c);
    return r;
  }

  Polynomial operator-(const Polynomial& o) const { return *this + (-o); }

  Polynomial operator*(const Polynomial& o) const {
    check_compatible(o);
    Polynomial r(nvars_);
    for (const auto& [e1, c1] : terms_)
      for (const auto& [e2, c2] : o.terms_) {
        Exponents f = e1;
        for (std::size_t i = 0; i < f.size(); ++i) f[i] += e2[i];
        r.add_term(std::move(f), c1 * c2);
      }
    return r;
  }

  Polynomial operator*(double s) const {
    Polynomial r(nvars_);
    for (const auto& [e, c] : terms_) r.add_term(e, c * s);
    return r;
  }

  Polynomial pow(int k) const {
    if (k < 0) throw InputError("Polynomial: negative power");
    Polynomial r = constant(nvars_, 1.0);
    for (int i = 0; i < k; ++i) r = r * *this;
    return r;
  }

  /// Canonical text form used for fingerprints.
  std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "poly" << nvars_ << ":";
    for (const auto& [e, c] : terms_) {
      os << c << "[";
      for (int k : e) os << k << ",";
      os << "]";
    }
    return os.str();
  }

 private:
  static int total(const Exponents& e) {
    int s = 0;
    for (int k : e) s += k;
    return s;
  }

  static double ipow(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
  }

  static double monomial(const Exponents& e, const Eigen::Ref<const Eigen::VectorXd>& z) {
    double r = 1.0;
    for (std::size_t i = 0; i < e.size(); ++i)
      if (e[i]) r *= ipow(z(static_cast<Index>(i)), e[i]);
    return r;
  }

  static double monomial_except(const Exponents& e, const Eigen::Ref<const Eigen::VectorXd>& z, int var, int drop) {
    double r = 1.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const int k = static_cast<int>(i) == var ? e[i] - drop : e[i];
      if (k) r *= ipow(z(static_cast<Index>(i)), k);
    }
    return r;
  }

  using Index = Eigen::Index;

  void check_arg(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    if (z.size() != nvars_) throw InputError("Polynomial: argument dimension mismatch");
  }
  void check_compatible(const Polynomial& o) const {
    if (o.nvars_ != nvars_) throw InputError("Polynomial: variable count mismatch");
  }

  int nvars_ = 0;
  std::map<Exponents, double> terms_;
};

/// Parses an arithmetic expression over named variables into a polynomial.
///
/// Grammar: expr := term (('+'|'-') term)* ; term := unary (('*'|'/') unary)* ;
/// unary := '-' unary | power ; power := primary ('^' integer)? ;
/// primary := number | name | '(' expr ')'. Division is only by constants.
class ExpressionParser {
 public:
  ExpressionParser(std::vector<std::string> names) : names_(std::move(names)) {}

  Polynomial parse(std::string_view text) {
    src_ = text;
    pos_ = 0;
    Polynomial p = expr();
    skip();
    if (pos_ != src_.size()) fail("unexpected character");
    return p;
  }

 private:
  int nvars() const { return static_cast<int>(names_.size()); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError("expression: " + msg + " at offset " + std::to_string(pos_) + " in '" + std::string(src_) + "'");
  }

  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Polynomial expr() {
    Polynomial p = term();
    for (;;) {
      if (eat('+'))
        p = p + term();
      else if (eat('-'))
        p = p - term();
      else
        return p;
    }
  }

  Polynomial term() {
    Polynomial p = unary();
    for (;;) {
      if (eat('*')) {
        p = p * unary();
      } else if (eat('/')) {
        const Polynomial d = unary();
        if (d.degree() > 0) fail("division by a non-constant");
        const double c = d.is_zero() ? 0.0 : d.terms().begin()->second;
        if (c == 0.0) fail("division by zero");
        p = p * (1.0 / c);
      } else {
        return p;
      }
    }
  }

  Polynomial unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return power();
  }

  Polynomial power() {
    Polynomial base = primary();
    if (eat('^')) {
      skip();
      const std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (start == pos_) fail("expected a non-negative integer exponent");
      const int k = std::stoi(std::string(src_.substr(start, pos_ - start)));
      return base.pow(k);
    }
    return base;
  }

  Polynomial primary() {
    skip();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Polynomial p = expr();
      if (!eat(')')) fail("expected ')'");
      return p;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const std::string rest(src_.substr(pos_));
      char* end = nullptr;
      const double v = std::strtod(rest.c_str(), &end);
      if (end == rest.c_str()) fail("bad number");
      pos_ += static_cast<std::size_t>(end - rest.c_str());
      return Polynomial::constant(nvars(), v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      const std::string name(src_.substr(start, pos_ - start));
      for (int i = 0; i < nvars(); ++i)
        if (names_[static_cast<std::size_t>(i)] == name) return Polynomial::variable(nvars(), i);
      pos_ = start;
      fail("unknown variable '" + name + "'");
    }
    fail("unexpected character");
  }

  std::vector<std::string> names_;
  std::string_view src_;
  std::size_t pos_ = 0;
};

/// Variable names x1..xn followed by y1..ym.
inline std::vector<std::string> saddle_variable_names(int n, int m) {
  std::vector<std::string> names;
  for (int i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
  for (int j = 1; j <= m; ++j) names.push_back("y" + std::to_string(j));
  return names;
}

}  // namespace saddleflow
