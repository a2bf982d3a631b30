#pragma once

// Signomial and geometric program containers. SGP constraints keep the
// factored shape sum_i base_i * carrier_i (<=|=) rhs with monomial rhs: the
// bases carry transition expressions (possibly general signomials), the
// carriers the decision-variable products. That factoring is what the lifting
// rewrite and the SCP monomial approximation operate on.

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pmdpgp/expr.hpp"
#include "pmdpgp/expr_io.hpp"

namespace pmdpgp {

struct SgpTerm {
  Signomial base;    // coefficient expression (over model parameters)
  Monomial carrier;  // decision-variable product (sigma, p_s, c_s, ...)
};

struct SgpConstraint {
  std::vector<SgpTerm> lhs;  // sum of base*carrier
  Monomial rhs{1.0};
  bool equality = false;
  std::string label;

  Signomial lhs_flat() const {
    Signomial acc(0.0);
    for (const auto& t : lhs) acc = acc + t.base * Signomial(t.carrier);
    return acc;
  }
};

struct RegionConstraint {
  VarId variable;
  double lo = 0.0, hi = 0.0;
};

struct SignomialProgram {
  Signomial objective{1.0};  // minimized
  std::vector<SgpConstraint> constraints;
  std::vector<VarId> variables;
  std::vector<RegionConstraint> region;  // box part, used for lifted complements
  bool trivially_infeasible = false;
  std::string infeasible_reason;
};

struct GpConstraint {
  Posynomial lhs{Monomial(1.0)};  // <= 1
  std::string label;
};

struct GpEquality {
  Monomial lhs;  // = 1
  std::string label;
};

struct GeometricProgram {
  Posynomial objective{Monomial(1.0)};  // minimized
  std::vector<GpConstraint> inequalities;
  std::vector<GpEquality> equalities;
  std::vector<VarId> variables;
  std::map<VarId, double> constants;  // excluded variables fixed to a value
  bool trivially_infeasible = false;
  std::string infeasible_reason;

  // Structural well-formedness: constraints classify as posynomial/monomial by
  // construction; here we check that they only mention declared variables.
  void validate() const {
    std::set<VarId> declared(variables.begin(), variables.end());
    auto check_vars = [&](const Signomial& e, const std::string& label) {
      for (const VarId& v : e.variables())
        if (!declared.count(v))
          throw EncodeError("constraint '" + label + "' references undeclared variable '" +
                            v.name() + "'");
    };
    if (!objective.as_signomial().is_posynomial())
      throw EncodeError("objective is not a posynomial");
    check_vars(objective.as_signomial(), "objective");
    for (const auto& c : inequalities) {
      if (!c.lhs.as_signomial().is_posynomial())
        throw EncodeError("constraint '" + c.label + "' is not posynomial");
      check_vars(c.lhs.as_signomial(), c.label);
    }
    for (const auto& e : equalities) check_vars(Signomial(e.lhs), e.label);
  }
};

// Debug dump, one constraint per line in the expression grammar.
inline std::string to_string(const GeometricProgram& gp) {
  std::ostringstream out;
  out << "# geometric program: " << gp.variables.size() << " variables, "
      << gp.inequalities.size() << " inequalities, " << gp.equalities.size()
      << " equalities\n";
  if (gp.trivially_infeasible)
    out << "# trivially infeasible: " << gp.infeasible_reason << "\n";
  for (const VarId& v : gp.variables)
    out << "var " << v.name() << "  # " << to_string(v.kind()) << "\n";
  for (const auto& [v, value] : gp.constants)
    out << "const " << v.name() << " = " << format_double(value) << "\n";
  out << "minimize " << to_string(gp.objective) << "\n";
  for (const auto& c : gp.inequalities)
    out << "st " << to_string(c.lhs) << " <= 1  # " << c.label << "\n";
  for (const auto& e : gp.equalities)
    out << "eq " << to_string(e.lhs) << " = 1  # " << e.label << "\n";
  return out.str();
}

}  // namespace pmdpgp
