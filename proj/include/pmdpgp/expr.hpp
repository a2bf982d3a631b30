#pragma once

// Monomials, posynomials, and signomials over strictly positive variables.
// Nonstandard versus algebraic polynomials: exponents may be arbitrary reals,
// monomial coefficients are strictly positive. Expressions are immutable value
// types; all constructors normalize (sorted exponent maps, no zero exponents,
// merged duplicate terms, pruned near-zero coefficients).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pmdpgp/errors.hpp"
#include "pmdpgp/vars.hpp"

namespace pmdpgp {

// Coefficients with magnitude at or below this are dropped when normalizing.
inline constexpr double kCoefficientEpsilon = 1e-15;

// Sorted (variable, exponent) pairs; no zero exponents.
using ExpMap = std::vector<std::pair<VarId, double>>;

namespace detail {

inline void normalize_expmap(ExpMap& m) {
  std::sort(m.begin(), m.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  ExpMap out;
  out.reserve(m.size());
  for (const auto& [v, e] : m) {
    if (!out.empty() && out.back().first == v)
      out.back().second += e;
    else
      out.emplace_back(v, e);
  }
  out.erase(std::remove_if(out.begin(), out.end(),
                           [](const auto& p) { return p.second == 0.0; }),
            out.end());
  m = std::move(out);
}

inline bool expmap_equal(const ExpMap& a, const ExpMap& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].first != b[i].first || a[i].second != b[i].second) return false;
  return true;
}

inline bool expmap_less(const ExpMap& a, const ExpMap& b) {
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].first != b[i].first) return a[i].first < b[i].first;
    if (a[i].second != b[i].second) return a[i].second < b[i].second;
  }
  return a.size() < b.size();
}

inline double eval_expmap(const ExpMap& m, const Valuation& u) {
  double prod = 1.0;
  for (const auto& [v, e] : m) {
    double base = u.at(v);
    prod *= (e == 1.0) ? base : std::pow(base, e);
  }
  return prod;
}

}  // namespace detail

// Single positive-coefficient term c * prod x_i^{a_i}.
class Monomial {
 public:
  Monomial() : coefficient_(1.0) {}
  explicit Monomial(double constant) : coefficient_(constant) { check(); }
  explicit Monomial(const VarId& v) : coefficient_(1.0), exponents_{{v, 1.0}} {}
  Monomial(double coefficient, ExpMap exponents)
      : coefficient_(coefficient), exponents_(std::move(exponents)) {
    detail::normalize_expmap(exponents_);
    check();
  }

  double coefficient() const { return coefficient_; }
  const ExpMap& exponents() const { return exponents_; }
  bool is_constant() const { return exponents_.empty(); }

  double exponent_of(const VarId& v) const {
    for (const auto& [w, e] : exponents_)
      if (w == v) return e;
    return 0.0;
  }

  double evaluate(const Valuation& u) const {
    return coefficient_ * detail::eval_expmap(exponents_, u);
  }

  Monomial pow(double e) const {
    ExpMap m = exponents_;
    for (auto& [v, a] : m) a *= e;
    return Monomial(std::pow(coefficient_, e), std::move(m));
  }

  Monomial inverse() const { return pow(-1.0); }

  friend Monomial operator*(const Monomial& a, const Monomial& b) {
    ExpMap m = a.exponents_;
    m.insert(m.end(), b.exponents_.begin(), b.exponents_.end());
    return Monomial(a.coefficient_ * b.coefficient_, std::move(m));
  }

  friend Monomial operator*(double c, const Monomial& a) {
    return Monomial(c * a.coefficient_, a.exponents_);
  }

  friend Monomial operator/(const Monomial& a, const Monomial& b) {
    return a * b.inverse();
  }

 private:
  void check() const {
    if (!(coefficient_ > 0.0) || !std::isfinite(coefficient_))
      throw ModelError("monomial coefficient must be strictly positive, got " +
                       std::to_string(coefficient_));
  }
  double coefficient_;
  ExpMap exponents_;
};

enum class ExprClass { Monomial, Posynomial, GeneralSignomial };

inline const char* to_string(ExprClass c) {
  switch (c) {
    case ExprClass::Monomial: return "monomial";
    case ExprClass::Posynomial: return "posynomial";
    case ExprClass::GeneralSignomial: return "general-signomial";
  }
  return "?";
}

// Sum of terms with arbitrary-sign coefficients. The empty term list denotes
// the zero signomial (the one expression outside Def.-1 proper that the
// calculus needs, e.g. as a derivative).
class Signomial {
 public:
  struct Term {
    double coefficient;
    ExpMap exponents;
  };

  Signomial() = default;
  Signomial(double constant) {  // NOLINT(google-explicit-constructor)
    if (constant != 0.0) terms_.push_back({constant, {}});
    normalize();
  }
  Signomial(const VarId& v) : terms_{{1.0, {{v, 1.0}}}} {}  // NOLINT
  Signomial(const Monomial& m)                              // NOLINT
      : terms_{{m.coefficient(), m.exponents()}} {}
  explicit Signomial(std::vector<Term> terms) : terms_(std::move(terms)) { normalize(); }

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  ExprClass classify() const {
    if (terms_.size() == 1 && terms_[0].coefficient > 0.0) return ExprClass::Monomial;
    for (const auto& t : terms_)
      if (t.coefficient < 0.0) return ExprClass::GeneralSignomial;
    if (terms_.empty()) return ExprClass::GeneralSignomial;  // zero signomial
    return ExprClass::Posynomial;
  }

  bool is_monomial() const { return classify() == ExprClass::Monomial; }
  bool is_posynomial() const { return classify() != ExprClass::GeneralSignomial; }
  bool is_constant() const {
    return terms_.empty() || (terms_.size() == 1 && terms_[0].exponents.empty());
  }

  double constant_value() const {
    if (terms_.empty()) return 0.0;
    if (terms_.size() == 1 && terms_[0].exponents.empty()) return terms_[0].coefficient;
    throw ModelError("expression is not constant");
  }

  Monomial as_monomial() const {
    if (!is_monomial()) throw ModelError("expression is not a monomial");
    return Monomial(terms_[0].coefficient, terms_[0].exponents);
  }

  double evaluate(const Valuation& u) const {
    double sum = 0.0;
    for (const auto& t : terms_) sum += t.coefficient * detail::eval_expmap(t.exponents, u);
    return sum;
  }

  std::vector<VarId> variables() const {
    std::vector<VarId> vars;
    for (const auto& t : terms_)
      for (const auto& [v, e] : t.exponents) vars.push_back(v);
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    return vars;
  }

  bool depends_on(const VarId& v) const {
    for (const auto& t : terms_)
      for (const auto& [w, e] : t.exponents)
        if (w == v) return true;
    return false;
  }

  // Exact symbolic partial derivative.
  Signomial derivative(const VarId& v) const {
    std::vector<Term> out;
    for (const auto& t : terms_) {
      for (const auto& [w, e] : t.exponents) {
        if (w != v) continue;
        Term d;
        d.coefficient = t.coefficient * e;
        d.exponents = t.exponents;
        for (auto& [x, a] : d.exponents)
          if (x == v) a -= 1.0;
        out.push_back(std::move(d));
        break;
      }
    }
    return Signomial(std::move(out));
  }

  // Replaces every occurrence of v by `replacement`. Raising a non-monomial
  // replacement to an exponent other than 1 is rejected.
  Signomial substitute(const VarId& v, const Signomial& replacement) const;

  friend Signomial operator+(const Signomial& a, const Signomial& b) {
    std::vector<Term> terms = a.terms_;
    terms.insert(terms.end(), b.terms_.begin(), b.terms_.end());
    return Signomial(std::move(terms));
  }

  friend Signomial operator-(const Signomial& a, const Signomial& b) {
    std::vector<Term> terms = a.terms_;
    for (const auto& t : b.terms_) terms.push_back({-t.coefficient, t.exponents});
    return Signomial(std::move(terms));
  }

  friend Signomial operator*(const Signomial& a, const Signomial& b) {
    std::vector<Term> terms;
    terms.reserve(a.terms_.size() * b.terms_.size());
    for (const auto& s : a.terms_) {
      for (const auto& t : b.terms_) {
        Term p;
        p.coefficient = s.coefficient * t.coefficient;
        p.exponents = s.exponents;
        p.exponents.insert(p.exponents.end(), t.exponents.begin(), t.exponents.end());
        terms.push_back(std::move(p));
      }
    }
    return Signomial(std::move(terms));
  }

  friend Signomial operator/(const Signomial& a, const Monomial& b) {
    return a * Signomial(b.inverse());
  }

  friend Signomial operator-(const Signomial& a) { return Signomial(0.0) - a; }

  Signomial pow(double e) const {
    if (is_monomial()) return Signomial(as_monomial().pow(e));
    if (e == 1.0) return *this;
    double rounded = std::round(e);
    if (e == rounded && rounded >= 0.0 && rounded <= 64.0) {
      Signomial acc(1.0);
      for (int i = 0; i < static_cast<int>(rounded); ++i) acc = acc * (*this);
      return acc;
    }
    throw SubstitutionError("cannot raise a non-monomial expression to exponent " +
                            std::to_string(e));
  }

  // Structural equality of normal forms.
  friend bool operator==(const Signomial& a, const Signomial& b) {
    if (a.terms_.size() != b.terms_.size()) return false;
    for (std::size_t i = 0; i < a.terms_.size(); ++i) {
      if (a.terms_[i].coefficient != b.terms_[i].coefficient) return false;
      if (!detail::expmap_equal(a.terms_[i].exponents, b.terms_[i].exponents)) return false;
    }
    return true;
  }

 private:
  void normalize() {
    for (auto& t : terms_) detail::normalize_expmap(t.exponents);
    std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) {
      return detail::expmap_less(a.exponents, b.exponents);
    });
    std::vector<Term> out;
    out.reserve(terms_.size());
    for (auto& t : terms_) {
      if (!out.empty() && detail::expmap_equal(out.back().exponents, t.exponents))
        out.back().coefficient += t.coefficient;
      else
        out.push_back(std::move(t));
    }
    out.erase(std::remove_if(out.begin(), out.end(),
                             [](const Term& t) {
                               return std::abs(t.coefficient) <= kCoefficientEpsilon;
                             }),
              out.end());
    terms_ = std::move(out);
  }

  std::vector<Term> terms_;
};

// Nonempty sum of monomials.
class Posynomial {
 public:
  Posynomial(const Monomial& m) : sig_(m) {}  // NOLINT(google-explicit-constructor)
  explicit Posynomial(const Signomial& s) : sig_(s) {
    if (!s.is_posynomial() || s.is_zero())
      throw ModelError("expression is not a posynomial");
  }

  const Signomial& as_signomial() const { return sig_; }
  const std::vector<Signomial::Term>& terms() const { return sig_.terms(); }
  double evaluate(const Valuation& u) const { return sig_.evaluate(u); }
  std::vector<VarId> variables() const { return sig_.variables(); }
  Signomial derivative(const VarId& v) const { return sig_.derivative(v); }
  bool is_monomial() const { return sig_.is_monomial(); }
  Monomial as_monomial() const { return sig_.as_monomial(); }

  friend Posynomial operator+(const Posynomial& a, const Posynomial& b) {
    return Posynomial(a.sig_ + b.sig_);
  }
  friend Posynomial operator*(const Posynomial& a, const Posynomial& b) {
    return Posynomial(a.sig_ * b.sig_);
  }
  friend Posynomial operator/(const Posynomial& a, const Monomial& b) {
    return Posynomial(a.sig_ / b);
  }

 private:
  Signomial sig_;
};

inline Signomial Signomial::substitute(const VarId& v, const Signomial& replacement) const {
  std::vector<Term> keep;
  Signomial acc(0.0);
  bool touched = false;
  for (const auto& t : terms_) {
    double exp_v = 0.0;
    for (const auto& [w, e] : t.exponents)
      if (w == v) exp_v = e;
    if (exp_v == 0.0) {
      keep.push_back(t);
      continue;
    }
    touched = true;
    ExpMap rest;
    for (const auto& [w, e] : t.exponents)
      if (w != v) rest.emplace_back(w, e);
    Signomial factor = replacement.pow(exp_v);  // throws for non-monomial, exp != 1
    acc = acc + Signomial(std::vector<Term>{{t.coefficient, std::move(rest)}}) * factor;
  }
  if (!touched) return *this;
  return acc + Signomial(std::move(keep));
}

// Defining expression of a lifted variable l = definition, where definition is
// `1 - complement` with posynomial complement. simple_pair marks l = 1 - base
// for a single base variable, the case normalize_solution can rescale jointly.
struct LiftedDef {
  Signomial definition;
  Signomial complement;
  bool simple_pair = false;
  VarId base;
};

}  // namespace pmdpgp
