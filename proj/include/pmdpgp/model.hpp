#pragma once

// Parametric MDP/MC data model: transition rows carry signomials over the
// model parameters. Models are immutable after validate(); the analyses here
// are pure functions.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pmdpgp/expr.hpp"
#include "pmdpgp/expr_io.hpp"
#include "pmdpgp/vars.hpp"

namespace pmdpgp {

inline constexpr double kRowSumTolInstantiate = 1e-6;
inline constexpr double kRowSumTolNormalized = 1e-9;
inline constexpr double kSchedulerSumTol = 1e-9;

struct SpecProperty {
  enum class Kind { ReachLeq, ExpCostLeq };
  Kind kind = Kind::ReachLeq;
  double threshold = 1.0;
  std::vector<int> target;  // T for reach, G for expected cost
  std::string label;        // label name, for reporting

  static SpecProperty reach(double lambda, std::vector<int> t, std::string lbl = "") {
    if (lambda < 0.0 || lambda > 1.0)
      throw ModelError("reachability threshold must lie in [0,1]");
    if (t.empty()) throw ModelError("target set must be nonempty");
    return {Kind::ReachLeq, lambda, std::move(t), std::move(lbl)};
  }
  static SpecProperty expcost(double kappa, std::vector<int> g, std::string lbl = "") {
    if (kappa < 0.0) throw ModelError("expected-cost threshold must be nonnegative");
    if (g.empty()) throw ModelError("goal set must be nonempty");
    return {Kind::ExpCostLeq, kappa, std::move(g), std::move(lbl)};
  }
};

struct TransitionEntry {
  int succ = -1;
  Signomial prob;
};

// Axis-aligned parameter region (0 < lo <= hi per variable).
struct RegionBox {
  std::vector<std::pair<VarId, std::pair<double, double>>> bounds;
};

struct ActionRow {
  int action = -1;
  double cost = 0.0;
  std::vector<TransitionEntry> entries;
};

// Shape facts about one transition row, shared by validation, the encoder's
// lifting, and normalize_solution.
struct RowShape {
  bool all_constant = false;
  int signomial_entry = -1;            // index into entries, -1 if none
  Signomial complement;                // the designated signomial successor's expression
  Posynomial sibling_sum{Monomial{1.0}};  // sum of the posynomial entries (1 if none)
  bool has_siblings = false;
  // Row sum is sum_i c_i * v_i (+ c0) with unit exponents and each v distinct:
  // the form the group rescale in normalize_solution can repair.
  bool linear_unit_row = false;
  std::vector<std::pair<VarId, double>> linear_vars;  // (v_i, c_i)
  double linear_const = 0.0;
};

class Pmdp {
 public:
  bool is_mc = false;
  std::string name = "model";
  std::vector<std::string> state_names;
  int initial = 0;
  std::vector<std::string> action_names;
  std::vector<std::vector<ActionRow>> rows;  // per state, nonempty
  std::vector<VarId> parameters;
  VarTable table;
  std::map<std::string, std::vector<int>> labels;

  int state_count() const { return static_cast<int>(state_names.size()); }

  int state_index(const std::string& s) const {
    auto it = std::find(state_names.begin(), state_names.end(), s);
    if (it == state_names.end()) throw ModelError("unknown state '" + s + "'");
    return static_cast<int>(it - state_names.begin());
  }

  const std::vector<int>& label_set(const std::string& l) const {
    auto it = labels.find(l);
    if (it == labels.end()) throw ModelError("unknown label '" + l + "'");
    return it->second;
  }

  // Checks Def.-4 invariants plus the one-signomial-successor row shape.
  void validate() const {
    if (state_names.empty()) throw ModelError("model has no states");
    if (initial < 0 || initial >= state_count()) throw ModelError("invalid initial state");
    if (rows.size() != state_names.size())
      throw ModelError("transition rows missing for some states");
    std::set<VarId> declared(parameters.begin(), parameters.end());
    for (int s = 0; s < state_count(); ++s) {
      if (rows[s].empty())
        throw ModelError("deadlock state '" + state_names[s] + "' has no enabled action");
      if (is_mc && rows[s].size() != 1)
        throw ModelError("pmc state '" + state_names[s] + "' must have exactly one action");
      std::set<int> seen_actions;
      for (const auto& row : rows[s]) {
        if (row.action < 0 || row.action >= static_cast<int>(action_names.size()))
          throw ModelError("invalid action index at state '" + state_names[s] + "'");
        if (!seen_actions.insert(row.action).second)
          throw ModelError("duplicate action at state '" + state_names[s] + "'");
        if (row.cost < 0.0) throw ModelError("negative cost at state '" + state_names[s] + "'");
        if (row.entries.empty())
          throw ModelError("action with no successors at state '" + state_names[s] + "'");
        std::set<int> seen_succ;
        for (const auto& e : row.entries) {
          if (e.succ < 0 || e.succ >= state_count())
            throw ModelError("invalid successor at state '" + state_names[s] + "'");
          if (!seen_succ.insert(e.succ).second)
            throw ModelError("duplicate successor entry at state '" + state_names[s] + "'");
          if (e.prob.is_zero())
            throw ModelError("explicit zero transition at state '" + state_names[s] + "'");
          for (const VarId& v : e.prob.variables())
            if (!declared.count(v))
              throw ModelError("transition at state '" + state_names[s] +
                               "' uses undeclared parameter '" + v.name() + "'");
        }
        analyze_row(row, state_names[s]);  // throws on shape violations
      }
    }
    for (const auto& [lbl, set] : labels)
      for (int s : set)
        if (s < 0 || s >= state_count())
          throw ModelError("label '" + lbl + "' references an unknown state");
  }

  RowShape analyze_row(const ActionRow& row, const std::string& state_name) const {
    RowShape shape;
    shape.all_constant = true;
    Signomial posy_sum(0.0);
    int n_posy = 0;
    for (std::size_t i = 0; i < row.entries.size(); ++i) {
      const Signomial& p = row.entries[i].prob;
      if (!p.is_constant()) shape.all_constant = false;
      if (p.is_posynomial()) {
        posy_sum = posy_sum + p;
        ++n_posy;
      } else if (shape.signomial_entry < 0) {
        shape.signomial_entry = static_cast<int>(i);
        shape.complement = p;
      } else {
        throw ShapeRestrictionError("state '" + state_name +
                                    "' has two general-signomial successors");
      }
    }
    if (shape.all_constant) {
      double sum = 0.0;
      for (const auto& e : row.entries) {
        double v = e.prob.constant_value();
        if (v < -1e-12 || v > 1.0 + 1e-9)
          throw ModelError("constant probability outside [0,1] at state '" + state_name + "'");
        sum += v;
      }
      if (std::abs(sum - 1.0) > kRowSumTolNormalized)
        throw ModelError("constant row at state '" + state_name + "' sums to " +
                         format_double(sum) + ", expected 1");
      return shape;
    }
    if (shape.signomial_entry >= 0) {
      shape.has_siblings = n_posy > 0;
      if (n_posy > 0) shape.sibling_sum = Posynomial(posy_sum);
      // Required shape: complement == 1 - sum of posynomial siblings.
      Signomial residual = shape.complement - (Signomial(1.0) - posy_sum);
      if (!residual.is_zero())
        throw ShapeRestrictionError(
            "signomial successor at state '" + state_name +
            "' does not equal one minus the remaining probabilities (got '" +
            to_string(shape.complement) + "')");
    }
    // Detect sum = c0 + sum_i c_i v_i with distinct vars, unit exponents.
    Signomial total = posy_sum + shape.complement;
    shape.linear_unit_row = true;
    std::set<VarId> seen;
    for (const auto& t : total.terms()) {
      if (t.exponents.empty()) {
        shape.linear_const += t.coefficient;
      } else if (t.exponents.size() == 1 && t.exponents[0].second == 1.0 &&
                 t.coefficient > 0.0 && seen.insert(t.exponents[0].first).second) {
        shape.linear_vars.emplace_back(t.exponents[0].first, t.coefficient);
      } else {
        shape.linear_unit_row = false;
        shape.linear_vars.clear();
        break;
      }
    }
    return shape;
  }
};

// Memoryless randomized scheduler: weights over enabled actions per state.
struct Scheduler {
  // weights[s] lists (action, weight) for the enabled actions of s.
  std::vector<std::vector<std::pair<int, double>>> weights;

  void validate(const Pmdp& m) const {
    if (weights.size() != m.rows.size())
      throw ModelError("scheduler defined for wrong number of states");
    for (std::size_t s = 0; s < weights.size(); ++s) {
      double sum = 0.0;
      for (auto [a, w] : weights[s]) {
        bool enabled = false;
        for (const auto& row : m.rows[s])
          if (row.action == a) enabled = true;
        if (w > 0.0 && !enabled)
          throw ModelError("scheduler puts weight on disabled action at state '" +
                           m.state_names[s] + "'");
        if (w < -1e-12 || w > 1.0 + 1e-9)
          throw ModelError("scheduler weight outside [0,1]");
        sum += w;
      }
      if (std::abs(sum - 1.0) > kSchedulerSumTol)
        throw ModelError("scheduler weights at state '" + m.state_names[s] + "' sum to " +
                         format_double(sum));
    }
  }

  double weight(int s, int a) const {
    for (auto [act, w] : weights[s])
      if (act == a) return w;
    return 0.0;
  }

  static Scheduler uniform(const Pmdp& m) {
    Scheduler sched;
    sched.weights.resize(m.rows.size());
    for (std::size_t s = 0; s < m.rows.size(); ++s)
      for (const auto& row : m.rows[s])
        sched.weights[s].emplace_back(row.action, 1.0 / static_cast<double>(m.rows[s].size()));
    return sched;
  }
};

// Model with numeric transition probabilities (a pMDP instantiated at u).
struct InstantiatedMdp {
  struct Entry {
    int succ;
    double prob;
  };
  struct Row {
    int action;
    double cost;
    std::vector<Entry> entries;
  };
  int initial = 0;
  std::vector<std::string> state_names;
  std::vector<std::vector<Row>> rows;
  bool well_defined = true;  // all rows sum to 1 within tolerance
  double worst_row_error = 0.0;
};

// Row-stochastic Markov chain with a per-state cost.
struct InstantiatedMc {
  int initial = 0;
  std::vector<std::string> state_names;
  std::vector<std::vector<std::pair<int, double>>> transitions;  // per state
  std::vector<double> state_cost;

  int state_count() const { return static_cast<int>(transitions.size()); }
};

// Replaces every signomial by its value at u. Sub- or super-stochastic rows
// only clear the well_defined flag; callers decide whether that is an error.
inline InstantiatedMdp instantiate(const Pmdp& m, const Valuation& u) {
  InstantiatedMdp out;
  out.initial = m.initial;
  out.state_names = m.state_names;
  out.rows.resize(m.rows.size());
  for (std::size_t s = 0; s < m.rows.size(); ++s) {
    for (const auto& row : m.rows[s]) {
      InstantiatedMdp::Row r;
      r.action = row.action;
      r.cost = row.cost;
      double sum = 0.0;
      for (const auto& e : row.entries) {
        double p = e.prob.evaluate(u);
        sum += p;
        if (p != 0.0) r.entries.push_back({e.succ, p});
      }
      double err = std::abs(sum - 1.0);
      out.worst_row_error = std::max(out.worst_row_error, err);
      if (err > kRowSumTolInstantiate) out.well_defined = false;
      out.rows[s].push_back(std::move(r));
    }
  }
  return out;
}

// Instantiation that stays in the parametric representation: every expression
// is replaced by its constant value. Labels, names and costs survive, so the
// result can feed workflows expecting a parameter-free model (e.g. repair).
inline Pmdp instantiate_model(const Pmdp& m, const Valuation& u) {
  Pmdp out;
  out.is_mc = m.is_mc;
  out.name = m.name;
  out.state_names = m.state_names;
  out.initial = m.initial;
  out.action_names = m.action_names;
  out.labels = m.labels;
  out.rows.resize(m.rows.size());
  for (std::size_t s = 0; s < m.rows.size(); ++s)
    for (const auto& row : m.rows[s]) {
      ActionRow r;
      r.action = row.action;
      r.cost = row.cost;
      for (const auto& e : row.entries) {
        double p = e.prob.evaluate(u);
        if (p != 0.0) r.entries.push_back({e.succ, Signomial(p)});
      }
      out.rows[s].push_back(std::move(r));
    }
  out.validate();
  return out;
}

// Def. 6: P^sigma(s,s') = sum_alpha sigma(s)(alpha) * P(s,alpha,s').
inline InstantiatedMc induce(const InstantiatedMdp& m, const Scheduler& sigma) {
  InstantiatedMc mc;
  mc.initial = m.initial;
  mc.state_names = m.state_names;
  mc.transitions.resize(m.rows.size());
  mc.state_cost.assign(m.rows.size(), 0.0);
  for (std::size_t s = 0; s < m.rows.size(); ++s) {
    std::map<int, double> mix;
    for (auto [a, w] : sigma.weights[s]) {
      if (w == 0.0) continue;
      const InstantiatedMdp::Row* row = nullptr;
      for (const auto& r : m.rows[s])
        if (r.action == a) row = &r;
      if (!row)
        throw ModelError("scheduler references disabled action at state '" +
                         m.state_names[s] + "'");
      for (const auto& e : row->entries) mix[e.succ] += w * e.prob;
      mc.state_cost[s] += w * row->cost;
    }
    mc.transitions[s].assign(mix.begin(), mix.end());
  }
  return mc;
}

struct Prob01Result {
  std::vector<bool> prob0;  // target unreachable in the graph, any scheduler
  std::vector<bool> prob1;  // target reached almost surely, every scheduler
};

// Graph-based qualitative analysis. Parametric edges count as present: GP
// variables are strictly positive, so no transition is instantiated to zero.
inline Prob01Result prob01_analysis(const Pmdp& m, const std::vector<int>& target) {
  const int n = m.state_count();
  std::vector<bool> is_target(n, false);
  for (int t : target) is_target[t] = true;

  // Backward reachability to the target over all edges.
  std::vector<std::vector<int>> pred(n);
  for (int s = 0; s < n; ++s)
    for (const auto& row : m.rows[s])
      for (const auto& e : row.entries) pred[e.succ].push_back(s);
  std::vector<bool> reaches(n, false);
  std::vector<int> stack(target.begin(), target.end());
  for (int t : target) reaches[t] = true;
  while (!stack.empty()) {
    int s = stack.back();
    stack.pop_back();
    for (int p : pred[s])
      if (!reaches[p]) {
        reaches[p] = true;
        stack.push_back(p);
      }
  }

  Prob01Result res;
  res.prob0.assign(n, false);
  for (int s = 0; s < n; ++s) res.prob0[s] = !reaches[s];

  // Greatest fixpoint: states with some action whose successors all avoid the
  // target forever.
  std::vector<bool> avoid(n, false);
  for (int s = 0; s < n; ++s) avoid[s] = !is_target[s];
  for (bool changed = true; changed;) {
    changed = false;
    for (int s = 0; s < n; ++s) {
      if (!avoid[s]) continue;
      bool has_safe_action = false;
      for (const auto& row : m.rows[s]) {
        bool all_in = true;
        for (const auto& e : row.entries)
          if (!avoid[e.succ]) all_in = false;
        if (all_in) has_safe_action = true;
      }
      if (!has_safe_action) {
        avoid[s] = false;
        changed = true;
      }
    }
  }
  // prob1 = states that cannot reach the avoid set without passing the target.
  std::vector<bool> bad = avoid;
  std::vector<int> bstack;
  for (int s = 0; s < n; ++s)
    if (bad[s]) bstack.push_back(s);
  while (!bstack.empty()) {
    int s = bstack.back();
    bstack.pop_back();
    for (int p : pred[s])
      if (!bad[p] && !is_target[p]) {
        bad[p] = true;
        bstack.push_back(p);
      }
  }
  res.prob1.assign(n, false);
  for (int s = 0; s < n; ++s) res.prob1[s] = !bad[s];
  return res;
}

// Same analysis on a concrete MC (edges present iff probability > 0).
inline Prob01Result prob01_analysis(const InstantiatedMc& mc, const std::vector<int>& target) {
  Pmdp shim;
  shim.state_names = mc.state_names;
  shim.initial = mc.initial;
  shim.is_mc = true;
  shim.action_names = {"a"};
  shim.rows.resize(mc.transitions.size());
  for (std::size_t s = 0; s < mc.transitions.size(); ++s) {
    ActionRow row;
    row.action = 0;
    for (auto [succ, p] : mc.transitions[s])
      if (p > 0.0) row.entries.push_back({succ, Signomial(Monomial(p))});
    if (row.entries.empty()) row.entries.push_back({static_cast<int>(s), Signomial(Monomial(1.0))});
    shim.rows[s].push_back(std::move(row));
  }
  return prob01_analysis(shim, target);
}

// Rescales a raw solver assignment into a well-defined scheduler and valuation:
// scheduler weights per state, simple lifted pairs (p, pbar) jointly, other
// lifted variables recomputed from their definitions, and row-local linear
// parameter groups by their row sum.
inline std::pair<Valuation, Scheduler> normalize_solution(const Valuation& raw,
                                                          const Pmdp& m) {
  // Scheduler: collect sigma variables by their (state, action) payload.
  Scheduler sched;
  sched.weights.resize(m.rows.size());
  for (const auto& [v, val] : raw) {
    if (v.kind() != VarKind::Scheduler) continue;
    const VarMeta& meta = v.meta();
    if (meta.state < 0 || meta.action < 0)
      throw NormalizationError("scheduler variable '" + v.name() + "' lacks state/action info");
    sched.weights[meta.state].emplace_back(meta.action, val);
  }
  for (std::size_t s = 0; s < sched.weights.size(); ++s) {
    if (sched.weights[s].empty()) {
      // No scheduler variables for this state (pMC, or all but one action pruned).
      double w = 1.0 / static_cast<double>(m.rows[s].size());
      for (const auto& row : m.rows[s]) sched.weights[s].emplace_back(row.action, w);
      continue;
    }
    double sum = 0.0;
    for (auto& [a, w] : sched.weights[s]) sum += w;
    if (!(sum > 0.0))
      throw NormalizationError("scheduler weights at state '" + m.state_names[s] +
                               "' sum to zero");
    for (auto& [a, w] : sched.weights[s]) w /= sum;
    std::sort(sched.weights[s].begin(), sched.weights[s].end());
  }

  Valuation u;
  std::vector<std::pair<VarId, const LiftedDef*>> general_lifts;
  for (const auto& [v, val] : raw) {
    if (v.kind() == VarKind::ModelParameter) {
      u.set(v, val);
    } else if (v.kind() == VarKind::Lifting) {
      const auto& def = v.meta().lifted;
      if (!def) throw NormalizationError("lifted variable '" + v.name() + "' has no definition");
      if (def->simple_pair)
        u.set(v, val);  // rescaled jointly with its base below
      else
        general_lifts.emplace_back(v, def.get());
    }
  }

  // Simple pairs: p <- p/(p+pbar), pbar <- pbar/(p+pbar).
  for (const auto& [v, val] : raw) {
    if (v.kind() != VarKind::Lifting || !v.meta().lifted || !v.meta().lifted->simple_pair)
      continue;
    VarId base = v.meta().lifted->base;
    if (!u.contains(base))
      throw NormalizationError("lifted variable '" + v.name() + "' without its base parameter");
    double sum = u.at(base) + u.at(v);
    u.set(base, u.at(base) / sum);
    u.set(v, u.at(v) / sum);
  }
  // General lifted variables: recompute from the definition at the (partially
  // normalized) parameters.
  for (auto& [v, def] : general_lifts) {
    double value = def->definition.evaluate(u);
    if (!(value > 0.0))
      throw NormalizationError("lifted variable '" + v.name() +
                               "' is nonpositive after normalization");
    u.set(v, value);
  }

  // Row-local linear groups (e.g. repair rows a1*p1 + a2*p2): rescale the
  // row's parameters so the instantiated sum is exactly 1. Only valid when the
  // parameters occur in no other row.
  std::map<VarId, int> occurrences;
  for (const auto& state_rows : m.rows)
    for (const auto& row : state_rows) {
      std::set<VarId> row_vars;
      for (const auto& e : row.entries)
        for (const VarId& v : e.prob.variables()) row_vars.insert(v);
      for (const VarId& v : row_vars) ++occurrences[v];
    }
  for (std::size_t s = 0; s < m.rows.size(); ++s) {
    for (const auto& row : m.rows[s]) {
      RowShape shape = m.analyze_row(row, m.state_names[s]);
      if (shape.all_constant) continue;
      double sum = 0.0;
      for (const auto& e : row.entries) sum += e.prob.evaluate(u);
      if (std::abs(sum - 1.0) <= kRowSumTolNormalized) continue;
      if (!shape.linear_unit_row || shape.linear_vars.empty())
        throw NormalizationError("row at state '" + m.state_names[s] +
                                 "' cannot be rescaled to a distribution (sum " +
                                 format_double(sum) + ")");
      if (shape.linear_const >= 1.0)
        throw NormalizationError("row at state '" + m.state_names[s] +
                                 "' has constant mass >= 1; rescaling impossible");
      for (const auto& [v, c] : shape.linear_vars)
        if (occurrences[v] != 1)
          throw NormalizationError("parameter '" + v.name() +
                                   "' is shared across rows; row rescaling impossible");
      double var_mass = sum - shape.linear_const;
      double scale = (1.0 - shape.linear_const) / var_mass;
      for (const auto& [v, c] : shape.linear_vars) u.set(v, u.at(v) * scale);
    }
  }

  // Final validation against the original expressions.
  for (std::size_t s = 0; s < m.rows.size(); ++s)
    for (const auto& row : m.rows[s]) {
      double sum = 0.0;
      for (const auto& e : row.entries) sum += e.prob.evaluate(u);
      if (std::abs(sum - 1.0) > kRowSumTolNormalized)
        throw NormalizationError("row at state '" + m.state_names[s] +
                                 "' sums to " + format_double(sum) + " after normalization");
    }
  return {std::move(u), std::move(sched)};
}

}  // namespace pmdpgp
