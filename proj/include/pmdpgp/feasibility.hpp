#pragma once

// Feasibility solve for an encoded problem. A single solve of the tightened
// GP can leave relaxed simplex/row constraints slack when a specification
// threshold binds at the optimum: the reciprocal objective then prefers
// trading row mass for threshold room, and the induced distributions come out
// sub-stochastic. Rebalancing the per-variable weights of the regularization
// sum restores tightness; this loop re-solves with boosted weights on the
// variables of any slack row until every relaxed row is tight (or gives up).

#include <map>
#include <string>
#include <vector>

#include "pmdpgp/encoder.hpp"
#include "pmdpgp/gp_solver.hpp"

namespace pmdpgp {

inline constexpr double kTighteningTol = 1e-6;
inline constexpr int kMaxRebalanceRounds = 12;

struct FeasibilityResult {
  SolveResult solve;
  GeometricProgram gp;        // the GP of the final round
  int rounds = 1;
  bool rows_tight = false;    // relaxed simplex/row constraints tight at the optimum
  double worst_slack = 0.0;
};

inline bool is_tightening_constraint(const std::string& label) {
  return label.rfind("simplex", 0) == 0 || label.rfind("row ", 0) == 0;
}

inline FeasibilityResult solve_feasibility(const Encoding& enc, const SolverOptions& opts = {}) {
  FeasibilityResult out;
  std::map<VarId, double> weights;
  for (int round = 0; round < kMaxRebalanceRounds; ++round) {
    out.rounds = round + 1;
    out.gp = convexify(enc, weights.empty() ? nullptr : &weights);
    out.solve = solve(out.gp, opts);
    if (out.solve.status != SolveResult::Status::Optimal) return out;

    out.worst_slack = 0.0;
    std::vector<const GpConstraint*> slack_rows;
    for (const auto& c : out.gp.inequalities) {
      if (!is_tightening_constraint(c.label)) continue;
      double slack = 1.0 - c.lhs.evaluate(out.solve.primal);
      if (slack > out.worst_slack) out.worst_slack = slack;
      if (slack > kTighteningTol) slack_rows.push_back(&c);
    }
    if (slack_rows.empty()) {
      out.rows_tight = true;
      return out;
    }
    // Boost the reciprocal weight of every variable in a slack row: filling
    // those rows becomes more valuable than threshold room elsewhere.
    for (const GpConstraint* c : slack_rows)
      for (const VarId& v : c->lhs.variables()) {
        double& w = weights[v];
        if (w == 0.0) w = 1.0;
        w = std::min(w * 8.0, 1e9);
      }
  }
  return out;  // rows_tight stays false; caller decides how to report
}

}  // namespace pmdpgp
