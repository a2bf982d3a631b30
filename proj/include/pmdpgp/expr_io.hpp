#pragma once

// Text form of signomials: numbers, identifiers, + - * / ^ and parentheses.
// `^` takes a real literal exponent. Printing uses shortest round-trip float
// formatting, so print -> parse is exact for double-representable values.

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <string>
#include <string_view>

#include "pmdpgp/expr.hpp"
#include "pmdpgp/vars.hpp"

namespace pmdpgp {

inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string to_string(const Monomial& m) {
  std::string out;
  if (m.is_constant() || m.coefficient() != 1.0) out = format_double(m.coefficient());
  for (const auto& [v, e] : m.exponents()) {
    if (!out.empty()) out += "*";
    out += v.name();
    if (e != 1.0) out += "^" + format_double(e);
  }
  return out;
}

inline std::string to_string(const Signomial& s) {
  if (s.is_zero()) return "0";
  std::string out;
  for (const auto& t : s.terms()) {
    double c = t.coefficient;
    if (out.empty()) {
      if (c < 0.0) out += "-";
    } else {
      out += c < 0.0 ? " - " : " + ";
    }
    double mag = std::abs(c);
    std::string term;
    if (t.exponents.empty() || mag != 1.0) term = format_double(mag);
    for (const auto& [v, e] : t.exponents) {
      if (!term.empty()) term += "*";
      term += v.name();
      if (e != 1.0) term += "^" + format_double(e);
    }
    out += term;
  }
  return out;
}

inline std::string to_string(const Posynomial& p) { return to_string(p.as_signomial()); }

namespace detail {

class ExprParser {
 public:
  ExprParser(std::string_view text, VarTable& table, bool auto_declare)
      : text_(text), table_(table), auto_declare_(auto_declare) {}

  Signomial parse() {
    Signomial result = parse_sum();
    skip_ws();
    if (pos_ != text_.size())
      throw ParseError("unexpected character '" + std::string(1, text_[pos_]) +
                       "' in expression '" + std::string(text_) + "'");
    return result;
  }

 private:
  Signomial parse_sum() {
    Signomial acc = parse_product();
    for (;;) {
      skip_ws();
      if (peek() == '+') {
        ++pos_;
        acc = acc + parse_product();
      } else if (peek() == '-') {
        ++pos_;
        acc = acc - parse_product();
      } else {
        return acc;
      }
    }
  }

  Signomial parse_product() {
    Signomial acc = parse_power();
    for (;;) {
      skip_ws();
      if (peek() == '*') {
        ++pos_;
        acc = acc * parse_power();
      } else if (peek() == '/') {
        ++pos_;
        Signomial denom = parse_power();
        if (!denom.is_monomial())
          throw ParseError("division requires a monomial divisor in '" +
                           std::string(text_) + "'");
        acc = acc / denom.as_monomial();
      } else {
        return acc;
      }
    }
  }

  Signomial parse_power() {
    Signomial base = parse_atom();
    skip_ws();
    if (peek() != '^') return base;
    ++pos_;
    skip_ws();
    double e = parse_number_literal();
    try {
      return base.pow(e);
    } catch (const SubstitutionError& ex) {
      throw ParseError(std::string(ex.what()) + " in '" + std::string(text_) + "'");
    }
  }

  Signomial parse_atom() {
    skip_ws();
    char c = peek();
    if (c == '(') {
      ++pos_;
      Signomial inner = parse_sum();
      skip_ws();
      if (peek() != ')') throw ParseError("missing ')' in '" + std::string(text_) + "'");
      ++pos_;
      return inner;
    }
    if (c == '-') {
      ++pos_;
      return -parse_atom();
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return Signomial(parse_number_literal());
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      std::string name(text_.substr(start, pos_ - start));
      if (table_.contains(name)) return Signomial(table_.find(name));
      if (!auto_declare_)
        throw ParseError("unknown variable '" + name + "' in '" + std::string(text_) + "'");
      return Signomial(table_.declare(name, VarKind::ModelParameter));
    }
    throw ParseError("expected number, variable or '(' in '" + std::string(text_) + "'");
  }

  double parse_number_literal() {
    skip_ws();
    bool negative = false;
    if (peek() == '-') {
      negative = true;
      ++pos_;
      skip_ws();
    }
    const char* begin = text_.data() + pos_;
    char* end = nullptr;
    double value = std::strtod(begin, &end);
    if (end == begin)
      throw ParseError("expected a numeric literal in '" + std::string(text_) + "'");
    pos_ += static_cast<std::size_t>(end - begin);
    return negative ? -value : value;
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view text_;
  VarTable& table_;
  bool auto_declare_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Parses an expression, resolving identifiers against `table`. With
// auto_declare, unknown identifiers become fresh model parameters.
inline Signomial parse_signomial(std::string_view text, VarTable& table,
                                 bool auto_declare = false) {
  return detail::ExprParser(text, table, auto_declare).parse();
}

}  // namespace pmdpgp
