#pragma once

// Builds the synthesis SGP for a pMDP with reachability / expected-cost
// specifications, and convexifies it into a geometric program: equalities are
// relaxed, f <= h is division-transformed to f/h <= 1, signomial transition
// entries are lifted into fresh variables with relaxed coupling rows, and the
// objective becomes the reciprocal regularization sum whose monotonicity makes
// the relaxed simplex/stochasticity rows tight at the optimum. Also contains
// the model-repair encoding and parameter-region restriction.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pmdpgp/model.hpp"
#include "pmdpgp/program.hpp"

namespace pmdpgp {

// Strict positivity floor imposed on every GP variable.
inline constexpr double kGpVariableFloor = 1e-8;
// Weight of the regularization sum added to a repair objective.
inline constexpr double kRepairRegularizationWeight = 1e-3;

struct LiftingMap {
  // All lifted variables (each VarId carries its LiftedDef in the meta).
  std::vector<VarId> lifted;
  // Designated signomial successor per (state, action): lifted variable used.
  std::map<std::pair<int, int>, VarId> row_lift;
  // Structural key (printed normal form of the complement) -> lifted var.
  std::map<std::string, VarId> by_expr;

  bool empty() const { return lifted.empty(); }
};

struct Objective {
  enum class Mode { FeasibilityOnly, MaximizeReach, Explicit };
  Mode mode = Mode::FeasibilityOnly;
  int spec_index = -1;       // MaximizeReach: which spec family to maximize
  Signomial expression{1.0}; // Explicit
  double regularization_weight = 0.0;  // Explicit: weight of the added 1/x sum

  static Objective feasibility() { return {}; }
  static Objective maximize_reach(int spec_index) {
    Objective o;
    o.mode = Mode::MaximizeReach;
    o.spec_index = spec_index;
    return o;
  }
  static Objective explicit_posy(Signomial f, double reg_weight) {
    Objective o;
    o.mode = Mode::Explicit;
    o.expression = std::move(f);
    o.regularization_weight = reg_weight;
    return o;
  }
};

// One probability/cost variable family per specification.
struct SpecFamily {
  SpecProperty spec;
  Prob01Result qual;            // prob0/prob1 for reach; prob1 requirement for cost
  std::vector<VarId> vars;      // by state; invalid VarId where constant/absent
  std::vector<double> fixed;    // constant value where vars[s] is invalid
  std::vector<VarId> consts;    // display-only ids for the fixed states
};

struct Encoding {
  SignomialProgram sgp;
  LiftingMap lifting;
  std::vector<SpecFamily> families;
  std::vector<std::vector<VarId>> sched_vars;  // [state][row index]; empty for pMCs
  std::vector<std::vector<bool>> pruned;       // [state][row index]
  VarTable table;                              // encoder-created variables
  const Pmdp* model = nullptr;
  Objective objective;
};

namespace detail {

// Prunes actions whose choice would force divergent expected cost: an action
// entering a region that does not reach the goal almost surely cannot carry
// positive scheduler weight. Iterates because pruning shrinks the graph.
inline void prune_for_cost(const Pmdp& m, const std::vector<int>& goal,
                           std::vector<std::vector<bool>>& pruned) {
  const int n = m.state_count();
  std::vector<bool> in_goal(n, false);
  for (int g : goal) in_goal[g] = true;
  for (;;) {
    // Prob1 under every scheduler, on the currently unpruned graph.
    Pmdp shim;
    shim.state_names = m.state_names;
    shim.initial = m.initial;
    shim.action_names = m.action_names;
    shim.rows.resize(n);
    for (int s = 0; s < n; ++s) {
      for (std::size_t r = 0; r < m.rows[s].size(); ++r) {
        if (pruned[s][r]) continue;
        ActionRow row;
        row.action = m.rows[s][r].action;
        for (const auto& e : m.rows[s][r].entries)
          row.entries.push_back({e.succ, Signomial(1.0)});
        shim.rows[s].push_back(std::move(row));
      }
      if (shim.rows[s].empty())  // fully pruned state: absorbing shim row
        shim.rows[s].push_back(ActionRow{0, 0.0, {{s, Signomial(1.0)}}});
    }
    Prob01Result qual = prob01_analysis(shim, goal);
    bool changed = false;
    for (int s = 0; s < n; ++s) {
      if (in_goal[s]) continue;
      for (std::size_t r = 0; r < m.rows[s].size(); ++r) {
        if (pruned[s][r]) continue;
        for (const auto& e : m.rows[s][r].entries) {
          if (!qual.prob1[e.succ]) {
            pruned[s][r] = true;
            changed = true;
            break;
          }
        }
      }
    }
    if (!changed) return;
  }
}

inline std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_') ? c : '_';
  return out;
}

}  // namespace detail

// Creates (or reuses) the lifted variable standing for a signomial transition
// entry. The definition is 1 - complement with posynomial complement, verified
// by the model's row-shape analysis.
inline VarId lift_variable(Encoding& enc, const Signomial& expr, const RowShape& shape) {
  std::string key = to_string(expr);
  auto it = enc.lifting.by_expr.find(key);
  if (it != enc.lifting.by_expr.end()) return it->second;

  auto def = std::make_shared<LiftedDef>();
  def->definition = expr;
  def->complement = shape.has_siblings ? shape.sibling_sum.as_signomial() : Signomial(0.0);
  std::string name;
  if (def->complement.is_monomial() && def->complement.terms().size() == 1 &&
      def->complement.terms()[0].coefficient == 1.0 &&
      def->complement.terms()[0].exponents.size() == 1 &&
      def->complement.terms()[0].exponents[0].second == 1.0) {
    def->simple_pair = true;
    def->base = def->complement.terms()[0].exponents[0].first;
    name = def->base.name() + "_bar";
  } else {
    name = "lift_" + std::to_string(enc.lifting.lifted.size() + 1);
  }
  VarMeta meta;
  meta.lifted = def;
  VarId v = enc.table.declare_fresh(detail::sanitize(name), VarKind::Lifting, meta);
  enc.lifting.lifted.push_back(v);
  enc.lifting.by_expr.emplace(std::move(key), v);
  return v;
}

// Paper SGP: threshold constraints, scheduler simplex rows, row-stochasticity
// for parametric rows, Bellman equalities per family, with Prob0/Prob1 states
// folded to constants.
inline Encoding encode_sgp(const Pmdp& m, const std::vector<SpecProperty>& specs,
                           const Objective& objective) {
  if (specs.empty()) throw EncodeError("at least one specification is required");
  m.validate();

  Encoding enc;
  enc.model = &m;
  enc.objective = objective;
  for (const VarId& v : m.parameters) enc.table.block(v.name());

  const int n = m.state_count();
  for (const auto& spec : specs)
    for (int t : spec.target)
      if (t < 0 || t >= n) throw EncodeError("specification target outside the state set");

  // Action pruning (cost families only).
  enc.pruned.resize(n);
  for (int s = 0; s < n; ++s) enc.pruned[s].assign(m.rows[s].size(), false);
  for (const auto& spec : specs)
    if (spec.kind == SpecProperty::Kind::ExpCostLeq)
      detail::prune_for_cost(m, spec.target, enc.pruned);

  // States reachable from the initial state through unpruned actions. A fully
  // pruned state only matters if it is still reachable.
  std::vector<bool> reachable(n, false);
  {
    std::vector<int> stack = {m.initial};
    reachable[m.initial] = true;
    while (!stack.empty()) {
      int s = stack.back();
      stack.pop_back();
      for (std::size_t r = 0; r < m.rows[s].size(); ++r) {
        if (enc.pruned[s][r]) continue;
        for (const auto& e : m.rows[s][r].entries)
          if (!reachable[e.succ]) {
            reachable[e.succ] = true;
            stack.push_back(e.succ);
          }
      }
    }
  }
  for (int s = 0; s < n; ++s) {
    bool any = false;
    for (std::size_t r = 0; r < m.rows[s].size(); ++r) any |= !enc.pruned[s][r];
    if (!any && reachable[s])
      throw CostDivergenceError("every action at state '" + m.state_names[s] +
                                "' leads to divergent expected cost");
  }

  // Scheduler variables (pMDPs only).
  enc.sched_vars.resize(n);
  if (!m.is_mc) {
    for (int s = 0; s < n; ++s) {
      enc.sched_vars[s].resize(m.rows[s].size());
      for (std::size_t r = 0; r < m.rows[s].size(); ++r) {
        if (enc.pruned[s][r]) continue;
        VarMeta meta;
        meta.state = s;
        meta.action = m.rows[s][r].action;
        enc.sched_vars[s][r] = enc.table.declare_fresh(
            detail::sanitize("sig_" + m.state_names[s] + "_" + m.action_names[m.rows[s][r].action]),
            VarKind::Scheduler, meta);
      }
    }
  } else {
    for (int s = 0; s < n; ++s) enc.sched_vars[s].resize(m.rows[s].size());
  }

  SignomialProgram& sgp = enc.sgp;
  auto add_constraint = [&](SgpConstraint c) { sgp.constraints.push_back(std::move(c)); };

  // Scheduler simplex and bounds.
  if (!m.is_mc) {
    for (int s = 0; s < n; ++s) {
      SgpConstraint simplex;
      simplex.equality = true;
      simplex.rhs = Monomial(1.0);
      simplex.label = "simplex " + m.state_names[s];
      for (std::size_t r = 0; r < m.rows[s].size(); ++r) {
        if (enc.pruned[s][r]) continue;
        simplex.lhs.push_back({Signomial(1.0), Monomial(enc.sched_vars[s][r])});
        SgpConstraint bound;
        bound.rhs = Monomial(1.0);
        bound.label = "bound " + enc.sched_vars[s][r].name();
        bound.lhs.push_back({Signomial(1.0), Monomial(enc.sched_vars[s][r])});
        add_constraint(std::move(bound));
      }
      if (!simplex.lhs.empty()) add_constraint(std::move(simplex));
    }
  }

  // Row-stochasticity for parametric rows (all rows, pruned or not: the
  // valuation must be well-defined for the whole model). Rows with identical
  // entry-expression multisets would produce the same constraint and are
  // emitted once.
  std::set<std::string> row_keys;
  std::set<std::string> entry_keys;
  for (int s = 0; s < n; ++s) {
    for (std::size_t r = 0; r < m.rows[s].size(); ++r) {
      const ActionRow& row = m.rows[s][r];
      RowShape shape = m.analyze_row(row, m.state_names[s]);
      if (shape.all_constant) continue;  // included only if not all constant
      std::vector<std::string> parts;
      for (const auto& e : row.entries) parts.push_back(to_string(e.prob));
      std::sort(parts.begin(), parts.end());
      std::string key;
      for (const auto& p : parts) key += p + ";";
      if (!row_keys.insert(key).second) continue;
      SgpConstraint stoch;
      stoch.equality = true;
      stoch.rhs = Monomial(1.0);
      stoch.label = "row " + m.state_names[s] + "/" + m.action_names[row.action];
      for (const auto& e : row.entries) stoch.lhs.push_back({e.prob, Monomial(1.0)});
      add_constraint(std::move(stoch));
      // Entry bounds P(s,a,s') <= 1 for parametric entries.
      for (const auto& e : row.entries) {
        if (e.prob.is_constant()) continue;
        if (!entry_keys.insert(to_string(e.prob)).second) continue;
        SgpConstraint bound;
        bound.rhs = Monomial(1.0);
        bound.label = "entry " + m.state_names[s] + "/" + m.action_names[row.action];
        bound.lhs.push_back({e.prob, Monomial(1.0)});
        add_constraint(std::move(bound));
      }
    }
  }

  // Families: one block of probability (or cost) variables per specification.
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const SpecProperty& spec = specs[k];
    SpecFamily fam;
    fam.spec = spec;
    fam.vars.resize(n);
    fam.fixed.assign(n, -1.0);
    std::string tag = std::to_string(k);

    if (spec.kind == SpecProperty::Kind::ReachLeq) {
      fam.qual = prob01_analysis(m, spec.target);
      fam.consts.resize(n);
      for (int s = 0; s < n; ++s) {
        VarMeta meta;
        meta.state = s;
        meta.spec = static_cast<int>(k);
        if (fam.qual.prob1[s]) {
          fam.fixed[s] = 1.0;  // Prob1 (includes targets): constant one
          fam.consts[s] = enc.table.declare_fresh(
              detail::sanitize("p" + tag + "_" + m.state_names[s]), VarKind::Probability, meta);
        } else if (fam.qual.prob0[s]) {
          fam.fixed[s] = 0.0;  // removed from the encoding
          fam.consts[s] = enc.table.declare_fresh(
              detail::sanitize("p" + tag + "_" + m.state_names[s]), VarKind::Probability, meta);
        } else {
          fam.vars[s] = enc.table.declare_fresh(
              detail::sanitize("p" + tag + "_" + m.state_names[s]), VarKind::Probability, meta);
        }
      }
      // Threshold p_init <= lambda.
      if (fam.vars[m.initial].valid()) {
        SgpConstraint thr;
        thr.rhs = Monomial(std::max(spec.threshold, 1e-12));
        thr.label = "threshold[" + tag + "]";
        thr.lhs.push_back({Signomial(1.0), Monomial(fam.vars[m.initial])});
        add_constraint(std::move(thr));
      } else if (fam.fixed[m.initial] > spec.threshold) {
        sgp.trivially_infeasible = true;
        sgp.infeasible_reason = "initial state reaches '" + spec.label +
                                "' almost surely but the threshold is " +
                                format_double(spec.threshold);
      }
      // Bellman equalities.
      for (int s = 0; s < n; ++s) {
        if (!fam.vars[s].valid()) continue;
        SgpConstraint bell;
        bell.equality = true;
        bell.rhs = Monomial(fam.vars[s]);
        bell.label = "bellman[" + tag + "] " + m.state_names[s];
        for (std::size_t r = 0; r < m.rows[s].size(); ++r) {
          if (enc.pruned[s][r]) continue;
          Monomial sched_part = m.is_mc ? Monomial(1.0) : Monomial(enc.sched_vars[s][r]);
          for (const auto& e : m.rows[s][r].entries) {
            if (fam.qual.prob0[e.succ]) continue;  // p = 0 terms vanish
            Monomial carrier = fam.qual.prob1[e.succ]
                                   ? sched_part
                                   : sched_part * Monomial(fam.vars[e.succ]);
            bell.lhs.push_back({e.prob, carrier});
          }
        }
        if (!bell.lhs.empty()) add_constraint(std::move(bell));
      }
    } else {
      // Expected cost to G: requires almost-sure reachability of G everywhere
      // on the unpruned graph.
      std::vector<bool> in_goal(n, false);
      for (int g : spec.target) in_goal[g] = true;
      {
        Pmdp shim;
        shim.state_names = m.state_names;
        shim.initial = m.initial;
        shim.action_names = m.action_names;
        shim.rows.resize(n);
        for (int s = 0; s < n; ++s) {
          for (std::size_t r = 0; r < m.rows[s].size(); ++r) {
            if (enc.pruned[s][r]) continue;
            ActionRow row;
            row.action = m.rows[s][r].action;
            for (const auto& e : m.rows[s][r].entries)
              row.entries.push_back({e.succ, Signomial(1.0)});
            shim.rows[s].push_back(std::move(row));
          }
        }
        fam.qual = prob01_analysis(shim, spec.target);
        for (int s = 0; s < n; ++s)
          if (reachable[s] && !fam.qual.prob1[s])
            throw CostDivergenceError("state '" + m.state_names[s] +
                                      "' does not reach the goal almost surely; expected cost "
                                      "is unbounded");
      }
      fam.consts.resize(n);
      for (int s = 0; s < n; ++s) {
        if (!reachable[s]) continue;  // unreachable: no cost variable at all
        VarMeta meta;
        meta.state = s;
        meta.spec = static_cast<int>(k);
        if (in_goal[s]) {
          fam.fixed[s] = 0.0;  // boundary: zero cost on the goal
          fam.consts[s] = enc.table.declare_fresh(
              detail::sanitize("c" + tag + "_" + m.state_names[s]), VarKind::Cost, meta);
          continue;
        }
        fam.vars[s] = enc.table.declare_fresh(
            detail::sanitize("c" + tag + "_" + m.state_names[s]), VarKind::Cost, meta);
      }
      if (fam.vars[m.initial].valid()) {
        SgpConstraint thr;
        thr.rhs = Monomial(std::max(spec.threshold, 1e-12));
        thr.label = "threshold[" + tag + "]";
        thr.lhs.push_back({Signomial(1.0), Monomial(fam.vars[m.initial])});
        add_constraint(std::move(thr));
      }
      for (int s = 0; s < n; ++s) {
        if (!fam.vars[s].valid()) continue;
        SgpConstraint bell;
        bell.equality = true;
        bell.rhs = Monomial(fam.vars[s]);
        bell.label = "bellman[" + tag + "] " + m.state_names[s];
        for (std::size_t r = 0; r < m.rows[s].size(); ++r) {
          if (enc.pruned[s][r]) continue;
          Monomial sched_part = m.is_mc ? Monomial(1.0) : Monomial(enc.sched_vars[s][r]);
          if (m.rows[s][r].cost > 0.0)
            bell.lhs.push_back({Signomial(m.rows[s][r].cost), sched_part});
          for (const auto& e : m.rows[s][r].entries) {
            if (in_goal[e.succ]) continue;  // c = 0 terms vanish
            bell.lhs.push_back({e.prob, sched_part * Monomial(fam.vars[e.succ])});
          }
        }
        if (!bell.lhs.empty()) add_constraint(std::move(bell));
      }
    }
    enc.families.push_back(std::move(fam));
  }

  // Variable list: parameters, schedulers, probability/cost variables
  // (excluding the display-only ids of constant states).
  std::set<VarId> const_ids;
  for (const SpecFamily& fam : enc.families)
    for (const VarId& v : fam.consts)
      if (v.valid()) const_ids.insert(v);
  sgp.variables = m.parameters;
  for (const VarId& v : enc.table.all())
    if (v.kind() != VarKind::Lifting && !const_ids.count(v)) sgp.variables.push_back(v);

  // Build the lifting map now so both convexify and the SCP can use it.
  for (int s = 0; s < n; ++s) {
    for (std::size_t r = 0; r < m.rows[s].size(); ++r) {
      const ActionRow& row = m.rows[s][r];
      RowShape shape = m.analyze_row(row, m.state_names[s]);
      if (shape.signomial_entry < 0) continue;
      VarId l = lift_variable(enc, row.entries[shape.signomial_entry].prob, shape);
      enc.lifting.row_lift[{s, row.action}] = l;
    }
  }

  // Objective.
  switch (objective.mode) {
    case Objective::Mode::FeasibilityOnly:
      sgp.objective = Signomial(1.0);
      break;
    case Objective::Mode::MaximizeReach: {
      if (objective.spec_index < 0 ||
          objective.spec_index >= static_cast<int>(enc.families.size()))
        throw EncodeError("maximize-reach objective references an unknown specification");
      const SpecFamily& fam = enc.families[objective.spec_index];
      if (fam.vars[m.initial].valid())
        sgp.objective = Signomial(Monomial(fam.vars[m.initial]).inverse());
      else  // probability constant at the initial state: nothing to optimize
        sgp.objective = Signomial(1.0);
      break;
    }
    case Objective::Mode::Explicit: {
      Signomial f = objective.expression;
      if (objective.regularization_weight > 0.0) {
        Signomial reg(0.0);
        for (const VarId& v : m.parameters)
          reg = reg + Signomial(Monomial(objective.regularization_weight, {{v, -1.0}}));
        for (const auto& vars : enc.sched_vars)
          for (const VarId& v : vars)
            if (v.valid())
              reg = reg + Signomial(Monomial(objective.regularization_weight, {{v, -1.0}}));
        for (const VarId& l : enc.lifting.lifted)
          reg = reg + Signomial(Monomial(objective.regularization_weight, {{l, -1.0}}));
        f = f + reg;
      }
      if (!f.is_posynomial())
        throw EncodeError("explicit objective must be a posynomial");
      sgp.objective = f;
      break;
    }
  }
  return enc;
}

// Box restriction: x/hi <= 1 and lo * x^-1 <= 1 per parameter.
inline void add_region(Encoding& enc, const RegionBox& box) {
  std::set<VarId> params(enc.model->parameters.begin(), enc.model->parameters.end());
  for (const auto& [v, bounds] : box.bounds) {
    auto [lo, hi] = bounds;
    if (!(lo > 0.0) || !(lo <= hi)) throw EncodeError("region bounds must satisfy 0 < lo <= hi");
    if (!params.count(v))
      throw EncodeError("region bound on '" + v.name() + "', which is not a model parameter");
    SgpConstraint upper;
    upper.rhs = Monomial(hi);
    upper.label = "region " + v.name() + " hi";
    upper.lhs.push_back({Signomial(1.0), Monomial(v)});
    enc.sgp.constraints.push_back(std::move(upper));
    SgpConstraint lower;
    lower.rhs = Monomial(1.0);
    lower.label = "region " + v.name() + " lo";
    lower.lhs.push_back({Signomial(1.0), Monomial(lo, {{v, -1.0}})});
    enc.sgp.constraints.push_back(std::move(lower));
    enc.sgp.region.push_back({v, lo, hi});
  }
}

// Positive-coefficient linear restriction sum_i c_i x_i <= d, division-
// transformed into a posynomial constraint. Negative coefficients are not
// posynomial-expressible and are rejected.
inline void add_region_linear(Encoding& enc, const std::vector<std::pair<VarId, double>>& terms,
                              double bound) {
  if (!(bound > 0.0)) throw EncodeError("linear region bound must be positive");
  SgpConstraint c;
  c.rhs = Monomial(bound);
  c.label = "region linear";
  for (const auto& [v, coef] : terms) {
    if (!(coef > 0.0))
      throw EncodeError("linear region constraint with non-positive coefficient on '" +
                        v.name() + "' is not expressible in GP form");
    c.lhs.push_back({Signomial(coef), Monomial(v)});
  }
  enc.sgp.constraints.push_back(std::move(c));
}

namespace detail {

// Rewrites one SGP constraint into lifted, division-transformed form:
// posynomial lhs' and monomial rhs with lhs' <=|= rhs. General-signomial bases
// must match a lifting entry.
struct LiftedConstraint {
  Signomial lhs;  // posynomial (possibly constant)
  Monomial rhs{1.0};
  bool equality = false;
  std::string label;
};

inline LiftedConstraint lift_constraint(const SgpConstraint& c, const LiftingMap& lifting) {
  LiftedConstraint out;
  out.rhs = c.rhs;
  out.equality = c.equality;
  out.label = c.label;
  Signomial acc(0.0);
  for (const SgpTerm& t : c.lhs) {
    Signomial base = t.base;
    if (!base.is_posynomial()) {
      auto it = lifting.by_expr.find(to_string(base));
      if (it == lifting.by_expr.end())
        throw ShapeRestrictionError("constraint '" + c.label +
                                    "' contains an unliftable signomial '" + to_string(base) +
                                    "'");
      base = Signomial(it->second);
    }
    acc = acc + base * Signomial(t.carrier);
  }
  out.lhs = acc;
  if (!out.lhs.is_posynomial())
    throw ShapeRestrictionError("constraint '" + c.label + "' is not posynomial after lifting");
  return out;
}

}  // namespace detail

// Reciprocal regularization sum over parameter, lifted, and scheduler
// variables. Optional per-variable weights support the rebalancing loop that
// drives relaxed rows to equality when a threshold binds at the optimum.
inline Posynomial regularization(const Encoding& enc,
                                 const std::map<VarId, double>* weights = nullptr) {
  auto weight_of = [&](const VarId& v) {
    if (!weights) return 1.0;
    auto it = weights->find(v);
    return it == weights->end() ? 1.0 : it->second;
  };
  Signomial f(0.0);
  for (const VarId& v : enc.model->parameters)
    f = f + Signomial(Monomial(weight_of(v), {{v, -1.0}}));
  for (const VarId& l : enc.lifting.lifted)
    f = f + Signomial(Monomial(weight_of(l), {{l, -1.0}}));
  for (const auto& vars : enc.sched_vars)
    for (const VarId& v : vars)
      if (v.valid()) f = f + Signomial(Monomial(weight_of(v), {{v, -1.0}}));
  if (f.is_zero()) return Posynomial(Monomial(1.0));
  return Posynomial(f);
}

// The tightened GP: relaxed, lifted, division-transformed constraints under
// the regularization objective, plus positivity floors and lifted-variable
// boxes induced by any parameter region.
inline GeometricProgram convexify(const Encoding& enc,
                                  const std::map<VarId, double>* reg_weights = nullptr) {
  const SignomialProgram& sgp = enc.sgp;
  GeometricProgram gp;
  gp.trivially_infeasible = sgp.trivially_infeasible;
  gp.infeasible_reason = sgp.infeasible_reason;

  std::set<std::string> seen;
  for (const SgpConstraint& c : sgp.constraints) {
    detail::LiftedConstraint lc = detail::lift_constraint(c, enc.lifting);
    Signomial divided = lc.lhs / lc.rhs;
    if (divided.is_constant()) {
      double value = divided.is_zero() ? 0.0 : divided.constant_value();
      bool violated = lc.equality ? std::abs(value - 1.0) > 1e-9 : value > 1.0 + 1e-9;
      if (violated && !gp.trivially_infeasible) {
        gp.trivially_infeasible = true;
        gp.infeasible_reason = "constraint '" + lc.label + "' folds to the constant " +
                               format_double(value);
      }
      continue;
    }
    if (lc.equality && divided.is_monomial()) {
      // Monomial equalities stay equalities in a GP.
      std::string key = "eq " + to_string(divided);
      if (seen.insert(key).second)
        gp.equalities.push_back({divided.as_monomial(), lc.label});
      continue;
    }
    // Relax (for equalities) and keep as posynomial <= 1.
    std::string key = "le " + to_string(divided);
    if (seen.insert(key).second) gp.inequalities.push_back({Posynomial(divided), lc.label});
  }

  // Region boxes constrain lifted complements too: l = 1 - g with posynomial
  // g monotone in each variable, so bounds for g over the box give bounds for l.
  if (!sgp.region.empty()) {
    std::map<VarId, std::pair<double, double>> box;
    for (const auto& rc : sgp.region) box[rc.variable] = {rc.lo, rc.hi};
    for (const VarId& l : enc.lifting.lifted) {
      const auto& def = l.meta().lifted;
      if (def->complement.is_zero()) continue;
      bool covered = true;
      Valuation at_lo, at_hi;
      for (const VarId& v : def->complement.variables()) {
        auto it = box.find(v);
        if (it == box.end()) {
          covered = false;
          break;
        }
        at_lo.set(v, it->second.first);
        at_hi.set(v, it->second.second);
      }
      if (!covered) continue;
      double l_hi = 1.0 - def->complement.evaluate(at_lo);
      double l_lo = 1.0 - def->complement.evaluate(at_hi);
      if (l_hi <= kGpVariableFloor) {
        gp.trivially_infeasible = true;
        gp.infeasible_reason = "region forces lifted variable '" + l.name() + "' to " +
                               format_double(l_hi);
        continue;
      }
      GpConstraint upper;
      upper.lhs = Posynomial(Monomial(1.0 / l_hi, {{l, 1.0}}));
      upper.label = "region " + l.name() + " hi";
      gp.inequalities.push_back(std::move(upper));
      if (l_lo > kGpVariableFloor) {
        GpConstraint lower;
        lower.lhs = Posynomial(Monomial(l_lo, {{l, -1.0}}));
        lower.label = "region " + l.name() + " lo";
        gp.inequalities.push_back(std::move(lower));
      }
    }
  }

  // Variables: everything the SGP declared plus lifted ones; constants from
  // the families.
  gp.variables = sgp.variables;
  for (const VarId& l : enc.lifting.lifted) gp.variables.push_back(l);
  std::sort(gp.variables.begin(), gp.variables.end());
  for (const SpecFamily& fam : enc.families)
    for (int s = 0; s < enc.model->state_count(); ++s)
      if (fam.consts.size() > static_cast<std::size_t>(s) && fam.consts[s].valid())
        gp.constants.emplace(fam.consts[s], fam.fixed[s]);

  // Positivity floors.
  for (const VarId& v : gp.variables) {
    GpConstraint floor;
    floor.lhs = Posynomial(Monomial(kGpVariableFloor, {{v, -1.0}}));
    floor.label = "floor " + v.name();
    gp.inequalities.push_back(std::move(floor));
  }

  gp.objective = regularization(enc, reg_weights);
  gp.validate();
  return gp;
}

// Model repair: every changeable probability a becomes r*a with a fresh
// multiplier r, the quadratic cost sum r^2 becomes the SGP objective (with a
// lightly weighted regularization sum), and an optional cost bound turns the
// optimization into a single feasibility GP.
struct RepairSetup {
  Pmdp model;  // parametric repair model
  Encoding encoding;
  std::vector<VarId> multipliers;
  std::vector<std::tuple<int, int, int, double>> changed;  // (s, action, succ, original prob)
};

inline RepairSetup encode_repair(const Pmdp& m, const std::vector<SpecProperty>& specs,
                                 const std::vector<std::tuple<int, int, int>>& changeable,
                                 std::optional<double> cost_bound = std::nullopt) {
  if (!m.parameters.empty())
    throw EncodeError("model repair expects a parameter-free model");
  if (changeable.empty()) throw EncodeError("no changeable transitions given");

  RepairSetup setup;
  Pmdp& rm = setup.model;
  rm = m;  // copy; fresh parameters get declared into the copy's table

  for (const auto& [s, action, succ] : changeable) {
    if (s < 0 || s >= rm.state_count()) throw EncodeError("changeable state out of range");
    ActionRow* row = nullptr;
    for (auto& r : rm.rows[s])
      if (r.action == action) row = &r;
    if (!row) throw EncodeError("changeable transition names a disabled action");
    TransitionEntry* entry = nullptr;
    for (auto& e : row->entries)
      if (e.succ == succ) entry = &e;
    if (!entry)
      throw EncodeError("changeable transition " + rm.state_names[s] + " -> " +
                        rm.state_names[succ] + " has probability zero");
    double a = entry->prob.constant_value();
    if (!(a > 0.0))
      throw EncodeError("changeable transition " + rm.state_names[s] + " -> " +
                        rm.state_names[succ] + " has probability zero");
    VarId r = rm.table.declare_fresh(
        detail::sanitize("r_" + rm.state_names[s] + "_" + rm.state_names[succ]),
        VarKind::ModelParameter);
    rm.parameters.push_back(r);
    entry->prob = Signomial(Monomial(a, {{r, 1.0}}));
    setup.multipliers.push_back(r);
    setup.changed.emplace_back(s, action, succ, a);
  }
  rm.validate();

  Signomial cost(0.0);
  for (const VarId& r : setup.multipliers)
    cost = cost + Signomial(Monomial(1.0, {{r, 2.0}}));
  setup.encoding =
      encode_sgp(rm, specs, Objective::explicit_posy(cost, kRepairRegularizationWeight));
  if (cost_bound) {
    if (*cost_bound < 0.0) throw EncodeError("cost bound must be nonnegative");
    SgpConstraint bound;
    bound.rhs = Monomial(std::max(*cost_bound, 1e-12));
    bound.label = "repair-cost-bound";
    for (const VarId& r : setup.multipliers)
      bound.lhs.push_back({Signomial(1.0), Monomial(1.0, {{r, 2.0}})});
    setup.encoding.sgp.constraints.push_back(std::move(bound));
  }
  return setup;
}

}  // namespace pmdpgp
