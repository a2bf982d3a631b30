#pragma once

// Exact reachability probabilities and expected costs on instantiated MCs.
// The Bellman equalities become sparse linear systems after the qualitative
// states are eliminated; solved directly (sparse LU) up to a size cutoff,
// iteratively (Gauss-Seidel) beyond it.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <string>
#include <vector>

#include "pmdpgp/errors.hpp"
#include "pmdpgp/model.hpp"

namespace pmdpgp {

inline constexpr int kDirectSolveLimit = 50000;
inline constexpr double kGaussSeidelTol = 1e-10;
inline constexpr int kGaussSeidelMaxSweeps = 100000;
inline constexpr double kResidualTol = 1e-9;

struct SparseLinearSystem {
  int dimension = 0;
  std::vector<Eigen::Triplet<double>> entries;
  std::vector<double> rhs;

  void add(int r, int c, double v) { entries.emplace_back(r, c, v); }
};

struct McAnalysisOptions {
  // Force the iterative path regardless of size (used by tests).
  bool force_iterative = false;
};

inline std::vector<double> solve_sparse(const SparseLinearSystem& sys,
                                        const McAnalysisOptions& opts = {}) {
  const int n = sys.dimension;
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(sys.entries.begin(), sys.entries.end());
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(sys.rhs.data(), n);
  Eigen::VectorXd x;

  if (n <= kDirectSolveLimit && !opts.force_iterative) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
      throw LinearSolveError("sparse LU factorization failed (singular system)");
    x = lu.solve(b);
  } else {
    // Gauss-Seidel sweeps on the row-compressed matrix.
    Eigen::SparseMatrix<double, Eigen::RowMajor> R(A);
    x = Eigen::VectorXd::Zero(n);
    double resid = 0.0;
    for (int sweep = 0; sweep < kGaussSeidelMaxSweeps; ++sweep) {
      for (int i = 0; i < n; ++i) {
        double diag = 0.0, acc = 0.0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(R, i); it; ++it) {
          if (it.col() == i)
            diag = it.value();
          else
            acc += it.value() * x[it.col()];
        }
        if (diag == 0.0) throw LinearSolveError("zero diagonal in Gauss-Seidel sweep");
        x[i] = (b[i] - acc) / diag;
      }
      resid = (A * x - b).cwiseAbs().maxCoeff();
      if (resid < kGaussSeidelTol) break;
    }
    if (resid >= kGaussSeidelTol)
      throw LinearSolveError("Gauss-Seidel did not converge, residual " +
                             std::to_string(resid));
  }

  double resid = n > 0 ? (A * x - b).cwiseAbs().maxCoeff() : 0.0;
  if (!std::isfinite(resid) || resid > kResidualTol)
    throw LinearSolveError("linear solve residual too large: " + std::to_string(resid));
  return std::vector<double>(x.data(), x.data() + n);
}

// Probability of reaching `target` from every state.
inline std::vector<double> reachability(const InstantiatedMc& mc,
                                        const std::vector<int>& target,
                                        const McAnalysisOptions& opts = {}) {
  const int n = mc.state_count();
  Prob01Result q = prob01_analysis(mc, target);
  std::vector<int> index(n, -1);
  int unknowns = 0;
  for (int s = 0; s < n; ++s)
    if (!q.prob0[s] && !q.prob1[s]) index[s] = unknowns++;

  SparseLinearSystem sys;
  sys.dimension = unknowns;
  sys.rhs.assign(unknowns, 0.0);
  for (int s = 0; s < n; ++s) {
    if (index[s] < 0) continue;
    int r = index[s];
    double diag = 1.0;
    for (auto [succ, p] : mc.transitions[s]) {
      if (q.prob1[succ])
        sys.rhs[r] += p;
      else if (!q.prob0[succ]) {
        if (succ == s)
          diag -= p;
        else
          sys.add(r, index[succ], -p);
      }
    }
    sys.add(r, r, diag);
  }
  std::vector<double> x = unknowns > 0 ? solve_sparse(sys, opts) : std::vector<double>{};

  std::vector<double> probs(n, 0.0);
  for (int s = 0; s < n; ++s) {
    if (q.prob1[s])
      probs[s] = 1.0;
    else if (!q.prob0[s])
      probs[s] = std::min(1.0, std::max(0.0, x[index[s]]));
  }
  return probs;
}

// Expected cost of reaching `goal` from every state; requires that the goal is
// reached with probability one from everywhere.
inline std::vector<double> expected_cost(const InstantiatedMc& mc,
                                         const std::vector<double>& state_cost,
                                         const std::vector<int>& goal,
                                         const McAnalysisOptions& opts = {}) {
  const int n = mc.state_count();
  std::vector<double> reach = reachability(mc, goal, opts);
  for (int s = 0; s < n; ++s)
    if (reach[s] < 1.0 - kRowSumTolNormalized)
      throw CostDivergenceError("state '" + mc.state_names[s] + "' reaches the goal with probability " +
                                std::to_string(reach[s]) + " < 1; expected cost diverges");

  std::vector<bool> in_goal(n, false);
  for (int g : goal) in_goal[g] = true;

  std::vector<int> index(n, -1);
  int unknowns = 0;
  for (int s = 0; s < n; ++s)
    if (!in_goal[s]) index[s] = unknowns++;

  SparseLinearSystem sys;
  sys.dimension = unknowns;
  sys.rhs.assign(unknowns, 0.0);
  for (int s = 0; s < n; ++s) {
    if (index[s] < 0) continue;
    int r = index[s];
    double diag = 1.0;
    sys.rhs[r] = state_cost[s];
    for (auto [succ, p] : mc.transitions[s]) {
      if (in_goal[succ]) continue;
      if (succ == s)
        diag -= p;
      else
        sys.add(r, index[succ], -p);
    }
    sys.add(r, r, diag);
  }
  std::vector<double> x = unknowns > 0 ? solve_sparse(sys, opts) : std::vector<double>{};

  std::vector<double> cost(n, 0.0);
  for (int s = 0; s < n; ++s)
    if (index[s] >= 0) cost[s] = x[index[s]];
  return cost;
}

struct CheckResult {
  bool satisfied = false;
  double achieved = 0.0;
};

// Evaluates each specification exactly on the MC (non-strict thresholds).
inline std::vector<CheckResult> check(const InstantiatedMc& mc,
                                      const std::vector<SpecProperty>& specs,
                                      const McAnalysisOptions& opts = {}) {
  std::vector<CheckResult> results;
  results.reserve(specs.size());
  for (const auto& spec : specs) {
    double achieved;
    if (spec.kind == SpecProperty::Kind::ReachLeq)
      achieved = reachability(mc, spec.target, opts)[mc.initial];
    else
      achieved = expected_cost(mc, mc.state_cost, spec.target, opts)[mc.initial];
    results.push_back({achieved <= spec.threshold, achieved});
  }
  return results;
}

}  // namespace pmdpgp
