#pragma once

// Sequential convex programming over the synthesis SGP: posynomials in
// equality constraints are replaced by their best local monomial
// approximations around the current iterate, multiplicative trust regions
// keep the approximation faithful, and every candidate is normalized and
// re-evaluated exactly before it may be accepted. Accepted objective values
// are strictly monotone by construction.

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pmdpgp/encoder.hpp"
#include "pmdpgp/feasibility.hpp"
#include "pmdpgp/gp_solver.hpp"
#include "pmdpgp/mc_analysis.hpp"

namespace pmdpgp {

struct TrustRegion {
  Valuation center;  // strictly positive
  double t = 1.5;    // > 1: multiplicative half-width
};

struct ScpOptions {
  double epsilon = 1e-3;  // stop once an accepted step improves by less than this
  double t0 = 1.5;
  double t_expand = 1.25;
  double t_max = 4.0;
  double t_floor = 1.0 + 1e-4;              // give up when t collapses to here
  double strong_improvement_ratio = 0.01;   // relative gain that earns a larger region
  int max_iterations = 50;
  SolverOptions solver;
};

struct ScpIterationLog {
  int k = 0;
  double objective = 0.0;  // exact objective of the candidate
  double t = 0.0;
  bool accepted = false;
  int solver_iterations = 0;
  double wall_seconds = 0.0;
};

struct ScpState {
  enum class Status { Converged, MaxIterations, TrustRegionCollapsed, SolverFailure };
  Status status = Status::MaxIterations;
  int k = 0;                 // accepted iterations
  Valuation u;               // parameters (with lifted values filled in)
  Scheduler scheduler;
  double objective = std::numeric_limits<double>::quiet_NaN();  // exact value
  double t = 0.0;
  std::vector<ScpIterationLog> history;
  std::vector<CheckResult> checks;  // exact per-spec results at u
};

inline const char* to_string(ScpState::Status s) {
  switch (s) {
    case ScpState::Status::Converged: return "converged";
    case ScpState::Status::MaxIterations: return "max-iterations";
    case ScpState::Status::TrustRegionCollapsed: return "trust-region-collapsed";
    case ScpState::Status::SolverFailure: return "solver-failure";
  }
  return "?";
}

// Best local monomial approximation of f near u:
//   fhat = f[u] * prod (x_i/u(x_i))^{a_i},  a_i = u(x_i)/f[u] * df/dx_i[u].
inline Monomial monomial_approx(const Posynomial& f, const Valuation& u) {
  double value = f.evaluate(u);
  ExpMap exps;
  double scale = 1.0;
  for (const VarId& v : f.variables()) {
    double uv = u.at(v);
    double a = uv / value * f.derivative(v).evaluate(u);
    if (a == 0.0) continue;
    exps.emplace_back(v, a);
    scale *= std::pow(uv, a);
  }
  return Monomial(value / scale, std::move(exps));
}

namespace detail {

// Exact evaluation of an iterate: scheduler weights become sigma values,
// lifted variables take their defining values, and probability/cost variables
// take the exact analysis results (floored away from zero so they remain in
// the GP domain).
struct ExactEval {
  Valuation full;  // over all SGP + lifted variables
  Valuation params_and_lifted;
  std::vector<CheckResult> checks;
  double objective = 0.0;
  bool feasible = false;
};

inline ExactEval exact_evaluate(const Encoding& enc, const Valuation& params,
                                const Scheduler& sched) {
  const Pmdp& m = *enc.model;
  ExactEval out;
  for (const VarId& v : m.parameters) {
    out.full.set(v, params.at(v));
    out.params_and_lifted.set(v, params.at(v));
  }
  for (const VarId& l : enc.lifting.lifted) {
    double value = l.meta().lifted->definition.evaluate(params);
    value = std::max(value, 1e-12);
    out.full.set(l, value);
    out.params_and_lifted.set(l, value);
  }
  for (std::size_t s = 0; s < enc.sched_vars.size(); ++s)
    for (std::size_t r = 0; r < enc.sched_vars[s].size(); ++r) {
      const VarId& v = enc.sched_vars[s][r];
      if (!v.valid()) continue;
      double w = sched.weight(static_cast<int>(s), m.rows[s][r].action);
      out.full.set(v, std::max(w, kGpVariableFloor));
    }

  InstantiatedMc mc = induce(instantiate(m, params), sched);
  out.feasible = true;
  for (const SpecFamily& fam : enc.families) {
    std::vector<double> values;
    if (fam.spec.kind == SpecProperty::Kind::ReachLeq)
      values = reachability(mc, fam.spec.target);
    else
      values = expected_cost(mc, mc.state_cost, fam.spec.target);
    double achieved = values[m.initial];
    bool sat = achieved <= fam.spec.threshold;
    out.checks.push_back({sat, achieved});
    if (!sat) out.feasible = false;
    for (int s = 0; s < m.state_count(); ++s)
      if (fam.vars[s].valid()) out.full.set(fam.vars[s], std::max(values[s], 1e-7));
  }
  out.objective = enc.sgp.objective.evaluate(out.full);
  return out;
}

}  // namespace detail

// The local GP around u: lifted posynomial inequalities survive unchanged,
// every (non-monomial) equality is replaced by the monomial approximation of
// its division-transformed posynomial, and trust-region rows (1/t) u <= x <=
// t u are added for scheduler and parameter (including lifted) variables.
inline GeometricProgram build_local_gp(const Encoding& enc, const Valuation& u_full,
                                       const TrustRegion& tr) {
  const SignomialProgram& sgp = enc.sgp;
  GeometricProgram gp;

  std::set<std::string> seen;
  for (const SgpConstraint& c : sgp.constraints) {
    detail::LiftedConstraint lc = detail::lift_constraint(c, enc.lifting);
    Signomial divided = lc.lhs / lc.rhs;
    if (divided.is_constant()) {
      double value = divided.is_zero() ? 0.0 : divided.constant_value();
      bool violated = lc.equality ? std::abs(value - 1.0) > 1e-9 : value > 1.0 + 1e-9;
      if (violated && !gp.trivially_infeasible) {
        gp.trivially_infeasible = true;
        gp.infeasible_reason = "constraint '" + lc.label + "' folds to " + format_double(value);
      }
      continue;
    }
    if (lc.equality) {
      Monomial approx = divided.is_monomial() ? divided.as_monomial()
                                              : monomial_approx(Posynomial(divided), u_full);
      std::string key = "eq " + to_string(Signomial(approx));
      if (seen.insert(key).second) gp.equalities.push_back({approx, lc.label});
      continue;
    }
    std::string key = "le " + to_string(divided);
    if (seen.insert(key).second) gp.inequalities.push_back({Posynomial(divided), c.label});
  }

  // Trust region for scheduler and parameter variables (lifted included).
  std::vector<VarId> tr_vars = enc.model->parameters;
  for (const VarId& l : enc.lifting.lifted) tr_vars.push_back(l);
  for (const auto& vars : enc.sched_vars)
    for (const VarId& v : vars)
      if (v.valid()) tr_vars.push_back(v);
  for (const VarId& v : tr_vars) {
    double center = tr.center.at(v);
    GpConstraint upper;
    upper.lhs = Posynomial(Monomial(1.0 / (tr.t * center), {{v, 1.0}}));
    upper.label = "trust " + v.name() + " hi";
    gp.inequalities.push_back(std::move(upper));
    GpConstraint lower;
    lower.lhs = Posynomial(Monomial(center / tr.t, {{v, -1.0}}));
    lower.label = "trust " + v.name() + " lo";
    gp.inequalities.push_back(std::move(lower));
  }

  gp.variables = sgp.variables;
  for (const VarId& l : enc.lifting.lifted) gp.variables.push_back(l);
  std::sort(gp.variables.begin(), gp.variables.end());
  for (const VarId& v : gp.variables) {
    GpConstraint floor;
    floor.lhs = Posynomial(Monomial(kGpVariableFloor, {{v, -1.0}}));
    floor.label = "floor " + v.name();
    gp.inequalities.push_back(std::move(floor));
  }

  // Objective: the SGP objective, which must be posynomial after lifting.
  Signomial obj = enc.sgp.objective;
  if (!obj.is_posynomial()) {
    // Attempt lifting through the shared rewrite.
    SgpConstraint shim;
    shim.rhs = Monomial(1.0);
    shim.label = "objective";
    shim.lhs.push_back({obj, Monomial(1.0)});
    obj = detail::lift_constraint(shim, enc.lifting).lhs;
  }
  if (!obj.is_posynomial() || obj.is_zero())
    throw EncodeError("SCP objective is not a posynomial after lifting");
  gp.objective = Posynomial(obj);
  gp.validate();
  return gp;
}

// The SCP loop (accepts an already-verified feasible start).
inline ScpState run_scp(const Encoding& enc, const Valuation& params0, const Scheduler& sched0,
                        const ScpOptions& opts = {}) {
  ScpState state;
  detail::ExactEval current = detail::exact_evaluate(enc, params0, sched0);
  if (!current.feasible)
    throw EncodeError("SCP requires a feasible starting point");
  Scheduler sched = sched0;
  state.objective = current.objective;
  state.checks = current.checks;
  state.t = opts.t0;
  double t = opts.t0;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    auto tick = std::chrono::steady_clock::now();
    TrustRegion tr{current.full, t};
    ScpIterationLog log;
    log.k = state.k + 1;
    log.t = t;

    bool solver_failed = false;
    detail::ExactEval candidate;
    Valuation cand_params;
    Scheduler cand_sched;
    try {
      GeometricProgram local = build_local_gp(enc, current.full, tr);
      SolverOptions sopts = opts.solver;
      std::vector<double> warm;
      warm.reserve(local.variables.size());
      for (const VarId& v : local.variables)
        warm.push_back(std::log(std::max(current.full.at(v), kGpVariableFloor)));
      sopts.warm_start_y = std::move(warm);
      SolveResult res = solve(local, sopts);
      log.solver_iterations = res.iterations;
      if (res.status != SolveResult::Status::Optimal) {
        solver_failed = true;
      } else {
        auto [u_norm, sched_norm] = normalize_solution(res.primal, *enc.model);
        cand_params = std::move(u_norm);
        cand_sched = std::move(sched_norm);
        candidate = detail::exact_evaluate(enc, cand_params, cand_sched);
      }
    } catch (const Error&) {
      solver_failed = true;
    }

    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - tick).count();
    log.objective = solver_failed ? std::numeric_limits<double>::quiet_NaN()
                                  : candidate.objective;

    bool accept = !solver_failed && candidate.feasible &&
                  candidate.objective < current.objective;
    log.accepted = accept;
    state.history.push_back(log);

    if (accept) {
      double gain = current.objective - candidate.objective;
      double rel = gain / std::max(std::abs(current.objective), 1e-12);
      current = candidate;
      sched = cand_sched;
      state.k += 1;
      t = rel >= opts.strong_improvement_ratio ? std::min(t * opts.t_expand, opts.t_max)
                                               : std::max(1.0 + (t - 1.0) / 2.0, opts.t_floor);
      if (gain < opts.epsilon) {
        state.status = ScpState::Status::Converged;
        break;
      }
    } else {
      t = std::max(1.0 + (t - 1.0) / 2.0, opts.t_floor);
      if (t <= opts.t_floor) {
        state.status = solver_failed ? ScpState::Status::SolverFailure
                                     : ScpState::Status::TrustRegionCollapsed;
        break;
      }
    }
  }

  state.u = current.params_and_lifted;
  state.scheduler = sched;
  state.objective = current.objective;
  state.checks = current.checks;
  state.t = t;
  return state;
}

// CSV trace of an SCP run: one row per attempted iteration.
inline std::string scp_trace_csv(const ScpState& state) {
  std::string out = "k,objective,t,accepted,solver_iters,wall_seconds\n";
  for (const auto& row : state.history) {
    out += std::to_string(row.k) + "," + format_double(row.objective) + "," +
           format_double(row.t) + "," + (row.accepted ? "1" : "0") + "," +
           std::to_string(row.solver_iterations) + "," + format_double(row.wall_seconds) + "\n";
  }
  return out;
}

}  // namespace pmdpgp
