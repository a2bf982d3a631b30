#pragma once

// Geometric program solver. The GP is transformed by x = exp(y): posynomial
// constraints become log-sum-exp functions <= 0, monomial equalities become
// affine rows, and the posynomial objective becomes a sum of exponentials of
// affine forms (same minimizer as its log, but with a sparse Hessian). The
// resulting smooth convex program is solved by an infeasible-start primal-dual
// interior-point method with a Mehrotra-style predictor-corrector. Newton/KKT
// systems are solved by sparse LDLT on the regularized augmented system, or by
// dense nullspace elimination when the equality count is small. A phase-1
// run minimizes a single multiplicative slack over all inequalities and either
// produces a strictly feasible point or certifies infeasibility.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pmdpgp/program.hpp"

namespace pmdpgp {

struct ConvexForm {
  struct Term {
    double log_coef = 0.0;
    std::vector<std::pair<int, double>> exps;  // (variable index, exponent)
  };
  struct Func {
    std::vector<Term> terms;
  };
  struct AffineEq {
    std::vector<std::pair<int, double>> coefs;
    double rhs = 0.0;
    std::string label;
  };

  int n = 0;
  std::vector<VarId> var_ids;
  Func objective;               // minimize sum_k exp(a_k^T y + b_k)
  std::vector<Func> ineqs;      // log sum_k exp(a_k^T y + b_k) <= 0
  std::vector<std::string> ineq_labels;
  std::vector<AffineEq> eqs;    // a^T y = rhs
  bool trivially_infeasible = false;
  std::string infeasible_reason;

  int index_of(const VarId& v) const {
    for (int i = 0; i < n; ++i)
      if (var_ids[i] == v) return i;
    return -1;
  }
};

// Exponential change of variables; constants were folded during encoding.
inline ConvexForm to_convex(const GeometricProgram& gp) {
  ConvexForm cf;
  cf.trivially_infeasible = gp.trivially_infeasible;
  cf.infeasible_reason = gp.infeasible_reason;
  cf.var_ids = gp.variables;
  cf.n = static_cast<int>(cf.var_ids.size());
  std::map<VarId, int> index;
  for (int i = 0; i < cf.n; ++i) index.emplace(cf.var_ids[i], i);

  auto convert = [&](const Signomial& posy) {
    ConvexForm::Func f;
    for (const auto& t : posy.terms()) {
      ConvexForm::Term term;
      term.log_coef = std::log(t.coefficient);
      for (const auto& [v, e] : t.exponents) term.exps.emplace_back(index.at(v), e);
      f.terms.push_back(std::move(term));
    }
    return f;
  };

  cf.objective = convert(gp.objective.as_signomial());
  for (const auto& c : gp.inequalities) {
    cf.ineqs.push_back(convert(c.lhs.as_signomial()));
    cf.ineq_labels.push_back(c.label);
  }
  for (const auto& e : gp.equalities) {
    ConvexForm::AffineEq eq;
    eq.label = e.label;
    eq.rhs = -std::log(e.lhs.coefficient());
    for (const auto& [v, exp] : e.lhs.exponents()) eq.coefs.emplace_back(index.at(v), exp);
    cf.eqs.push_back(std::move(eq));
  }
  return cf;
}

struct SolverOptions {
  double feastol = 1e-8;
  double gaptol = 1e-8;
  int max_iterations = 200;
  bool verbose = false;
  std::optional<std::vector<double>> warm_start_y;  // log-space starting point
  std::uint64_t seed = 0;                           // jitter source for retries
};

struct SolveResult {
  enum class Status { Optimal, Infeasible, MaxIterations, NumericalFailure };
  Status status = Status::NumericalFailure;
  std::vector<double> y;     // log-space solution
  Valuation primal;          // positive GP variable values
  double objective = std::numeric_limits<double>::quiet_NaN();
  double primal_infeasibility = std::numeric_limits<double>::infinity();
  double dual_infeasibility = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double wall_seconds = 0.0;
  std::string message;
};

inline const char* to_string(SolveResult::Status s) {
  switch (s) {
    case SolveResult::Status::Optimal: return "optimal";
    case SolveResult::Status::Infeasible: return "infeasible";
    case SolveResult::Status::MaxIterations: return "max-iterations";
    case SolveResult::Status::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

namespace detail {

// One function compiled to local (support-indexed) form for fast Hessian
// assembly.
struct CompiledFunc {
  std::vector<int> support;  // sorted global var indices
  struct Term {
    double log_coef;
    std::vector<std::pair<int, double>> local;  // (local index, exponent)
  };
  std::vector<Term> terms;

  static CompiledFunc compile(const ConvexForm::Func& f) {
    CompiledFunc c;
    std::set<int> sup;
    for (const auto& t : f.terms)
      for (auto [v, e] : t.exps) sup.insert(v);
    c.support.assign(sup.begin(), sup.end());
    std::map<int, int> local;
    for (std::size_t i = 0; i < c.support.size(); ++i) local[c.support[i]] = static_cast<int>(i);
    for (const auto& t : f.terms) {
      Term ct;
      ct.log_coef = t.log_coef;
      for (auto [v, e] : t.exps) ct.local.emplace_back(local[v], e);
      c.terms.push_back(std::move(ct));
    }
    return c;
  }

  // Log-sum-exp value with local gradient / Hessian (both PSD-consistent).
  double lse(const Eigen::VectorXd& y, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) const {
    const int k = static_cast<int>(terms.size());
    const int s = static_cast<int>(support.size());
    Eigen::VectorXd z(k);
    for (int i = 0; i < k; ++i) {
      double acc = terms[i].log_coef;
      for (auto [l, e] : terms[i].local) acc += e * y[support[l]];
      z[i] = acc;
    }
    double zmax = z.maxCoeff();
    Eigen::VectorXd w = (z.array() - zmax).exp();
    double total = w.sum();
    double value = zmax + std::log(total);
    if (!grad) return value;
    Eigen::VectorXd p = w / total;
    grad->setZero(s);
    for (int i = 0; i < k; ++i)
      for (auto [l, e] : terms[i].local) (*grad)[l] += p[i] * e;
    if (hess) {
      hess->setZero(s, s);
      for (int i = 0; i < k; ++i) {
        for (auto [l1, e1] : terms[i].local)
          for (auto [l2, e2] : terms[i].local) (*hess)(l1, l2) += p[i] * e1 * e2;
      }
      *hess -= (*grad) * grad->transpose();
    }
    return value;
  }

  // Sum-of-exponentials value (objective form); gradient/Hessian optional.
  double sumexp(const Eigen::VectorXd& y, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) const {
    const int k = static_cast<int>(terms.size());
    const int s = static_cast<int>(support.size());
    double value = 0.0;
    if (grad) grad->setZero(s);
    if (hess) hess->setZero(s, s);
    for (int i = 0; i < k; ++i) {
      double acc = terms[i].log_coef;
      for (auto [l, e] : terms[i].local) acc += e * y[support[l]];
      double ev = std::exp(std::min(acc, 500.0));  // clamp against overflow
      value += ev;
      if (grad)
        for (auto [l, e] : terms[i].local) (*grad)[l] += ev * e;
      if (hess)
        for (auto [l1, e1] : terms[i].local)
          for (auto [l2, e2] : terms[i].local) (*hess)(l1, l2) += ev * e1 * e2;
    }
    return value;
  }
};

}  // namespace detail

class IpmSolver {
 public:
  IpmSolver(const ConvexForm& cf, const SolverOptions& opts)
      : cf_(cf), opts_(opts), n_(cf.n), m_(static_cast<int>(cf.ineqs.size())),
        p_(static_cast<int>(cf.eqs.size())) {
    obj_ = detail::CompiledFunc::compile(cf.objective);
    for (const auto& f : cf.ineqs) ineqs_.push_back(detail::CompiledFunc::compile(f));
    if (p_ > 0) {
      A_.resize(p_, n_);
      std::vector<Eigen::Triplet<double>> trips;
      c_eq_.resize(p_);
      for (int i = 0; i < p_; ++i) {
        c_eq_[i] = cf.eqs[i].rhs;
        for (auto [v, a] : cf.eqs[i].coefs) trips.emplace_back(i, v, a);
      }
      A_.setFromTriplets(trips.begin(), trips.end());
    }
  }

  // When >= 0, the problem is a phase-1 form with this slack variable; the
  // loop exits early once the underlying constraints are strictly satisfied.
  int phase1_var = -1;

  SolveResult run() {
    auto t0 = std::chrono::steady_clock::now();
    SolveResult res;
    if (cf_.trivially_infeasible) {
      res.status = SolveResult::Status::Infeasible;
      res.message = cf_.infeasible_reason;
      return res;
    }
    if (n_ == 0) {
      res.status = SolveResult::Status::Optimal;
      res.objective = obj_.sumexp(Eigen::VectorXd(), nullptr, nullptr);
      res.gap = 0;
      res.primal_infeasibility = 0;
      res.dual_infeasibility = 0;
      return res;
    }

    Eigen::VectorXd y = Eigen::VectorXd::Zero(n_);
    if (opts_.warm_start_y && static_cast<int>(opts_.warm_start_y->size()) == n_)
      y = Eigen::Map<const Eigen::VectorXd>(opts_.warm_start_y->data(), n_);

    // Project onto the affine equality manifold and check consistency.
    if (p_ > 0) {
      Eigen::MatrixXd Ad = Eigen::MatrixXd(A_);
      Eigen::MatrixXd AAt = Ad * Ad.transpose();
      AAt.diagonal().array() += 1e-12;
      Eigen::VectorXd resid = Ad * y - c_eq_;
      y -= Ad.transpose() * AAt.ldlt().solve(resid);
      double eq_err = (Ad * y - c_eq_).cwiseAbs().maxCoeff();
      if (eq_err > 1e-6) {
        res.status = SolveResult::Status::Infeasible;
        res.message = "monomial equality constraints are inconsistent (residual " +
                      std::to_string(eq_err) + ")";
        return res;
      }
    }

    Eigen::VectorXd s(m_), lam(m_), nu = Eigen::VectorXd::Zero(p_);
    Eigen::VectorXd fvals(m_);
    for (int i = 0; i < m_; ++i) fvals[i] = ineqs_[i].lse(y, nullptr, nullptr);
    for (int i = 0; i < m_; ++i) {
      s[i] = std::max(0.1, -fvals[i]);
      lam[i] = std::min(10.0, std::max(0.1, 1.0 / s[i]));
    }

    SolveResult best;
    int stall = 0;
    double last_mu = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < opts_.max_iterations; ++iter) {
      Iterate it = evaluate(y, s, lam, nu);
      double mu = m_ > 0 ? s.dot(lam) / m_ : 0.0;
      double denom = std::max(1.0, std::abs(it.f0));
      double gap_rel = m_ > 0 ? s.dot(lam) / denom : 0.0;
      double dual_rel = it.dual_inf / denom;

      if (opts_.verbose)
        std::fprintf(stderr, "ipm %3d  f0=%.8e  prim=%.2e  dual=%.2e  gap=%.2e  mu=%.2e\n",
                     iter, it.f0, it.prim_inf, dual_rel, gap_rel, mu);

      res.iterations = iter;
      res.objective = it.f0;
      res.primal_infeasibility = it.prim_inf;
      res.dual_infeasibility = dual_rel;
      res.gap = gap_rel;

      if (phase1_var >= 0 && it.max_f_without_slack + y[phase1_var] < -1e-7) {
        // Strictly feasible point found for the underlying constraints.
        res.status = SolveResult::Status::Optimal;
        finish(res, y, t0);
        return res;
      }
      if (it.prim_inf <= opts_.feastol && gap_rel <= opts_.gaptol && dual_rel <= 1e-6) {
        res.status = SolveResult::Status::Optimal;
        finish(res, y, t0);
        return res;
      }

      // Stall detection.
      if (mu > 0.9 * last_mu && (it.prim_inf > opts_.feastol || gap_rel > opts_.gaptol))
        ++stall;
      else
        stall = 0;
      last_mu = mu;
      if (stall > 25) {
        res.status = SolveResult::Status::NumericalFailure;
        res.message = "no progress over 25 iterations";
        finish(res, y, t0);
        return res;
      }

      // Assemble and factor the KKT system for this iterate.
      if (!factorize(it)) {
        res.status = SolveResult::Status::NumericalFailure;
        res.message = "KKT factorization failed";
        finish(res, y, t0);
        return res;
      }

      // Predictor (affine scaling, sigma = 0).
      Step aff = solve_step(it, y, s, lam, nu, Eigen::VectorXd::Zero(m_));
      auto [ap_aff, ad_aff] = step_lengths(s, lam, aff.ds, aff.dlam);
      double mu_aff =
          m_ > 0 ? (s + ap_aff * aff.ds).dot(lam + ad_aff * aff.dlam) / m_ : 0.0;
      double sigma = mu > 0 ? std::pow(mu_aff / mu, 3.0) : 0.0;
      sigma = std::min(1.0, std::max(0.0, sigma));
      // Degenerate complementarity pairs drive sigma to one and freeze the
      // barrier parameter; force recentering once progress stops.
      if (stall >= 2) sigma = std::min(sigma, 0.2);

      // Corrector with centering + second-order term.
      Eigen::VectorXd corr(m_);
      for (int i = 0; i < m_; ++i) corr[i] = sigma * mu - aff.ds[i] * aff.dlam[i];
      Step step = solve_step(it, y, s, lam, nu, corr);
      auto [alpha_p, alpha_d] = step_lengths(s, lam, step.ds, step.dlam);

      // Globalization: backtrack on the KKT merit function while far from the
      // solution. Near it the plain Mehrotra step is locally convergent and
      // the safeguard only blocks the endgame.
      bool near_solution = mu <= 1e-4 * denom && it.prim_inf <= 1e-4;
      if (near_solution) {
        y += alpha_p * step.dy;
        s += alpha_p * step.ds;
        lam += alpha_d * step.dlam;
        nu += alpha_d * step.dnu;
      } else {
        double merit0 = merit(y, s, lam, nu, sigma * mu);
        double scale = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 30; ++bt) {
          Eigen::VectorXd yn = y + scale * alpha_p * step.dy;
          Eigen::VectorXd sn = s + scale * alpha_p * step.ds;
          Eigen::VectorXd ln = lam + scale * alpha_d * step.dlam;
          Eigen::VectorXd nn = nu + scale * alpha_d * step.dnu;
          double mnew = merit(yn, sn, ln, nn, sigma * mu);
          if (mnew <= (1.0 - 1e-4 * scale) * merit0 || mnew < 1e-20) {
            y = yn;
            s = sn;
            lam = ln;
            nu = nn;
            accepted = true;
            break;
          }
          scale *= 0.5;
        }
        if (!accepted) {
          // Take the tiny step anyway; repeated failures trip the stall counter.
          y += scale * alpha_p * step.dy;
          s += scale * alpha_p * step.ds;
          lam += scale * alpha_d * step.dlam;
          nu += scale * alpha_d * step.dnu;
          ++stall;
        }
      }
    }

    res.status = SolveResult::Status::MaxIterations;
    res.message = "iteration limit reached";
    finish(res, y, t0);
    return res;
  }

 private:
  struct Iterate {
    double f0 = 0.0;
    Eigen::VectorXd g0;                       // objective gradient
    Eigen::VectorXd fvals;                    // constraint values
    std::vector<Eigen::VectorXd> grads;       // local constraint gradients
    Eigen::SparseMatrix<double> M;            // H + J^T D J (without D part)
    double prim_inf = 0.0;
    double dual_inf = 0.0;
    double max_f_without_slack = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd dual_resid;
  };

  struct Step {
    Eigen::VectorXd dy, ds, dlam, dnu;
  };

  Iterate evaluate(const Eigen::VectorXd& y, const Eigen::VectorXd& s,
                   const Eigen::VectorXd& lam, const Eigen::VectorXd& nu) {
    Iterate it;
    std::vector<Eigen::Triplet<double>> trips;

    Eigen::VectorXd g0_local;
    Eigen::MatrixXd h0_local;
    it.g0.setZero(n_);
    it.f0 = obj_.sumexp(y, &g0_local, &h0_local);
    const auto& osup = obj_.support;
    for (std::size_t a = 0; a < osup.size(); ++a) {
      it.g0[osup[a]] += g0_local[a];
      for (std::size_t b = 0; b < osup.size(); ++b)
        if (h0_local(a, b) != 0.0) trips.emplace_back(osup[a], osup[b], h0_local(a, b));
    }

    it.fvals.resize(m_);
    it.grads.resize(m_);
    it.dual_resid = it.g0;
    for (int i = 0; i < m_; ++i) {
      Eigen::VectorXd gl;
      Eigen::MatrixXd hl;
      it.fvals[i] = ineqs_[i].lse(y, &gl, &hl);
      it.grads[i] = gl;
      const auto& sup = ineqs_[i].support;
      double d = lam[i] / std::max(s[i], 1e-300);
      for (std::size_t a = 0; a < sup.size(); ++a) {
        it.dual_resid[sup[a]] += lam[i] * gl[a];
        for (std::size_t b = 0; b < sup.size(); ++b) {
          double hv = lam[i] * hl(a, b) + d * gl[a] * gl[b];
          if (hv != 0.0) trips.emplace_back(sup[a], sup[b], hv);
        }
      }
      if (phase1_var >= 0)  // worst constraint excluding the slack contribution
        it.max_f_without_slack = std::max(it.max_f_without_slack, it.fvals[i] + y[phase1_var]);
    }
    if (p_ > 0) it.dual_resid += A_.transpose() * nu;

    it.M.resize(n_, n_);
    it.M.setFromTriplets(trips.begin(), trips.end());

    double prim = m_ > 0 ? std::max(0.0, it.fvals.maxCoeff()) : 0.0;
    if (p_ > 0) prim = std::max(prim, (A_ * y - c_eq_).cwiseAbs().maxCoeff());
    it.prim_inf = prim;
    it.dual_inf = it.dual_resid.cwiseAbs().maxCoeff();
    return it;
  }

  // Factors [[M + dI, A^T], [A, -dI]] (augmented) or the reduced nullspace
  // system, with escalating regularization. The factorization is combined with
  // iterative refinement in solve_kkt, so the regularization bias cancels.
  bool factorize(const Iterate& it) {
    use_nullspace_ = p_ > 0 && p_ < 0.2 * n_;
    if (p_ == 0) use_nullspace_ = false;
    Mtrue_ = it.M;

    for (double delta = 1e-11; delta <= 1e-2; delta *= 100.0) {
      if (use_nullspace_) {
        Eigen::MatrixXd At = Eigen::MatrixXd(A_).transpose();  // n x p
        qr_.compute(At);
        Eigen::MatrixXd R = qr_.matrixQR().topRows(p_).triangularView<Eigen::Upper>();
        double rmin = R.diagonal().cwiseAbs().minCoeff();
        if (rmin < 1e-10) {
          use_nullspace_ = false;  // rank-deficient: fall back to augmented
          continue;
        }
        Q_ = qr_.householderQ();
        Z_ = Q_.rightCols(n_ - p_);
        Eigen::MatrixXd Md = Eigen::MatrixXd(it.M);
        Md.diagonal().array() += delta;
        red_ = Z_.transpose() * Md * Z_;
        red_ldlt_.compute(red_);
        if (red_ldlt_.info() == Eigen::Success) {
          Md_ = std::move(Md);
          delta_used_ = delta;
          return true;
        }
        continue;
      }
      std::vector<Eigen::Triplet<double>> trips;
      for (int k = 0; k < it.M.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator kit(it.M, k); kit; ++kit)
          trips.emplace_back(kit.row(), kit.col(), kit.value());
      for (int i = 0; i < n_; ++i) trips.emplace_back(i, i, delta);
      if (p_ > 0) {
        for (int k = 0; k < A_.outerSize(); ++k)
          for (Eigen::SparseMatrix<double>::InnerIterator kit(A_, k); kit; ++kit) {
            trips.emplace_back(n_ + kit.row(), kit.col(), kit.value());
            trips.emplace_back(kit.col(), n_ + kit.row(), kit.value());
          }
        for (int i = 0; i < p_; ++i) trips.emplace_back(n_ + i, n_ + i, -delta);
      }
      Eigen::SparseMatrix<double> K(n_ + p_, n_ + p_);
      K.setFromTriplets(trips.begin(), trips.end());
      ldlt_.compute(K);
      if (ldlt_.info() == Eigen::Success) {
        delta_used_ = delta;
        return true;
      }
    }
    return false;
  }

  // Solves the Newton system for the given centering correction. corr holds
  // sigma*mu - ds_aff*dlam_aff per row (zero for the predictor).
  Step solve_step(const Iterate& it, const Eigen::VectorXd& y, const Eigen::VectorXd& s,
                  const Eigen::VectorXd& lam, const Eigen::VectorXd& nu,
                  const Eigen::VectorXd& corr) {
    (void)nu;
    Step st;
    Eigen::VectorXd rhs = -it.dual_resid;
    for (int i = 0; i < m_; ++i) {
      const auto& sup = ineqs_[i].support;
      // r_cent_i = lam_i s_i - corr_i ; contribution: -J^T S^-1 (lam r_prim - r_cent)
      double rp = it.fvals[i] + s[i];
      double coeff = (lam[i] * rp - (lam[i] * s[i] - corr[i])) / std::max(s[i], 1e-300);
      for (std::size_t a = 0; a < sup.size(); ++a) rhs[sup[a]] -= coeff * it.grads[i][a];
    }

    Eigen::VectorXd r2 = p_ > 0 ? Eigen::VectorXd(c_eq_ - A_ * y) : Eigen::VectorXd();
    auto [dy, dnu] = solve_kkt(rhs, r2);

    st.dy = dy;
    st.dnu = dnu;
    st.ds.resize(m_);
    st.dlam.resize(m_);
    for (int i = 0; i < m_; ++i) {
      const auto& sup = ineqs_[i].support;
      double jdy = 0.0;
      for (std::size_t a = 0; a < sup.size(); ++a) jdy += it.grads[i][a] * dy[sup[a]];
      double rp = it.fvals[i] + s[i];
      st.ds[i] = -rp - jdy;
      st.dlam[i] = (-(lam[i] * s[i] - corr[i]) - lam[i] * st.ds[i]) / std::max(s[i], 1e-300);
    }
    return st;
  }

  // Solves [[M, A^T], [A, 0]] [dy; dnu] = [r1; r2] using the current
  // factorization, with two rounds of iterative refinement against the
  // unregularized blocks.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> solve_kkt(const Eigen::VectorXd& r1,
                                                        const Eigen::VectorXd& r2) {
    auto raw_solve = [&](const Eigen::VectorXd& a,
                         const Eigen::VectorXd& b) -> std::pair<Eigen::VectorXd, Eigen::VectorXd> {
      if (p_ == 0) return {ldlt_.solve(a), Eigen::VectorXd()};
      if (use_nullspace_) {
        Eigen::MatrixXd R = qr_.matrixQR().topRows(p_).triangularView<Eigen::Upper>();
        Eigen::VectorXd w = R.transpose().triangularView<Eigen::Lower>().solve(b);
        Eigen::VectorXd dy_p = Q_.leftCols(p_) * w;
        Eigen::VectorXd dw = red_ldlt_.solve(Z_.transpose() * (a - Md_ * dy_p));
        Eigen::VectorXd dy = dy_p + Z_ * dw;
        Eigen::VectorXd r = a - Md_ * dy;
        Eigen::VectorXd dnu =
            R.triangularView<Eigen::Upper>().solve(Q_.leftCols(p_).transpose() * r);
        return {std::move(dy), std::move(dnu)};
      }
      Eigen::VectorXd full(n_ + p_);
      full.head(n_) = a;
      full.tail(p_) = b;
      Eigen::VectorXd sol = ldlt_.solve(full);
      return {sol.head(n_), sol.tail(p_)};
    };

    auto [dy, dnu] = raw_solve(r1, p_ > 0 ? r2 : Eigen::VectorXd());
    for (int round = 0; round < 2; ++round) {
      Eigen::VectorXd e1 = r1 - Mtrue_ * dy;
      if (p_ > 0) e1 -= A_.transpose() * dnu;
      Eigen::VectorXd e2 = p_ > 0 ? Eigen::VectorXd(r2 - A_ * dy) : Eigen::VectorXd();
      double err = e1.cwiseAbs().maxCoeff() + (p_ > 0 ? e2.cwiseAbs().maxCoeff() : 0.0);
      if (err < 1e-14 * (1.0 + r1.cwiseAbs().maxCoeff())) break;
      auto [f1, f2] = raw_solve(e1, e2);
      dy += f1;
      if (p_ > 0) dnu += f2;
    }
    return {std::move(dy), std::move(dnu)};
  }

  // Fraction-to-boundary rule with kappa = 0.99, separately for the primal
  // slacks and the dual multipliers.
  std::pair<double, double> step_lengths(const Eigen::VectorXd& s, const Eigen::VectorXd& lam,
                                         const Eigen::VectorXd& ds,
                                         const Eigen::VectorXd& dlam) const {
    double ap = 1.0, ad = 1.0;
    const double kappa = 0.99;
    for (int i = 0; i < m_; ++i) {
      if (ds[i] < 0.0) ap = std::min(ap, -kappa * s[i] / ds[i]);
      if (dlam[i] < 0.0) ad = std::min(ad, -kappa * lam[i] / dlam[i]);
    }
    return {ap, ad};
  }

  double merit(const Eigen::VectorXd& y, const Eigen::VectorXd& s, const Eigen::VectorXd& lam,
               const Eigen::VectorXd& nu, double mu_target) {
    Eigen::VectorXd g0_local;
    double acc = 0.0;
    obj_.sumexp(y, &g0_local, nullptr);
    Eigen::VectorXd dual = Eigen::VectorXd::Zero(n_);
    const auto& osup = obj_.support;
    for (std::size_t a = 0; a < osup.size(); ++a) dual[osup[a]] += g0_local[a];
    for (int i = 0; i < m_; ++i) {
      Eigen::VectorXd gl;
      double f = ineqs_[i].lse(y, &gl, nullptr);
      const auto& sup = ineqs_[i].support;
      for (std::size_t a = 0; a < sup.size(); ++a) dual[sup[a]] += lam[i] * gl[a];
      double rp = f + s[i];
      acc += rp * rp;
      double rc = lam[i] * s[i] - mu_target;
      acc += rc * rc;
    }
    if (p_ > 0) {
      dual += A_.transpose() * nu;
      acc += (A_ * y - c_eq_).squaredNorm();
    }
    acc += dual.squaredNorm();
    return acc;
  }

  void finish(SolveResult& res, const Eigen::VectorXd& y,
              std::chrono::steady_clock::time_point t0) {
    res.y.assign(y.data(), y.data() + n_);
    for (int i = 0; i < n_; ++i) res.primal.set(cf_.var_ids[i], std::exp(y[i]));
    res.objective = obj_.sumexp(y, nullptr, nullptr);
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  const ConvexForm& cf_;
  SolverOptions opts_;
  int n_, m_, p_;
  detail::CompiledFunc obj_;
  std::vector<detail::CompiledFunc> ineqs_;
  Eigen::SparseMatrix<double> A_;
  Eigen::VectorXd c_eq_;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  Eigen::SparseMatrix<double> Mtrue_;
  bool use_nullspace_ = false;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::MatrixXd Q_, Z_, red_, Md_;
  Eigen::LDLT<Eigen::MatrixXd> red_ldlt_;
  double delta_used_ = 0.0;
};

struct Phase1Result {
  bool feasible = false;
  double slack = std::numeric_limits<double>::infinity();  // log-scale slack t*
  std::vector<double> y;  // strictly feasible point when feasible
  SolveResult details;
};

// Minimizes a single multiplicative slack over all inequalities: every
// posynomial constraint f <= 1 becomes f/T <= 1 with T = exp(t) minimized.
// Infeasible iff the optimal t stays above 1e-8.
inline Phase1Result phase1(const ConvexForm& cf, const SolverOptions& opts = {}) {
  Phase1Result out;
  if (cf.trivially_infeasible) {
    out.feasible = false;
    out.details.status = SolveResult::Status::Infeasible;
    out.details.message = cf.infeasible_reason;
    return out;
  }
  if (cf.ineqs.empty()) {
    // Any point on the equality manifold is feasible.
    SolverOptions o = opts;
    IpmSolver probe(cf, o);
    SolveResult r = probe.run();
    out.feasible = r.status == SolveResult::Status::Optimal ||
                   r.status == SolveResult::Status::MaxIterations;
    out.slack = out.feasible ? 0.0 : out.slack;
    out.y = r.y;
    out.details = std::move(r);
    return out;
  }

  ConvexForm p1 = cf;
  int t_idx = p1.n;
  p1.n += 1;
  VarTable aux;
  p1.var_ids.push_back(aux.declare("phase1_slack", VarKind::Probability));
  for (auto& f : p1.ineqs)
    for (auto& term : f.terms) term.exps.emplace_back(t_idx, -1.0);
  p1.objective.terms.clear();
  ConvexForm::Term t_term;
  t_term.exps.emplace_back(t_idx, 1.0);
  p1.objective.terms.push_back(std::move(t_term));

  SolverOptions o = opts;
  // Start from y = 0 with the slack lifted above the worst violation.
  std::vector<double> y0(p1.n, 0.0);
  if (opts.warm_start_y && static_cast<int>(opts.warm_start_y->size()) == cf.n)
    std::copy(opts.warm_start_y->begin(), opts.warm_start_y->end(), y0.begin());
  {
    Eigen::VectorXd base = Eigen::Map<const Eigen::VectorXd>(y0.data(), cf.n);
    double worst = 0.0;
    for (const auto& f : cf.ineqs)
      worst = std::max(worst, detail::CompiledFunc::compile(f).lse(base, nullptr, nullptr));
    y0[t_idx] = worst + 1.0;
  }
  o.warm_start_y = y0;

  IpmSolver solver(p1, o);
  solver.phase1_var = t_idx;
  SolveResult r = solver.run();
  out.details = r;
  if (!r.y.empty()) {
    out.slack = r.y[t_idx];
    out.y.assign(r.y.begin(), r.y.begin() + cf.n);
  }
  if (r.status == SolveResult::Status::Optimal) {
    out.feasible = out.slack <= 1e-8;
  } else if (r.status == SolveResult::Status::Infeasible) {
    out.feasible = false;
  } else {
    // Could not certify either way; treat a clearly positive converged slack
    // as infeasible, otherwise report the numerical failure upward.
    out.feasible = false;
  }
  return out;
}

// Full GP solve: interior-point run, falling back to phase-1 to distinguish
// infeasibility from numerical trouble.
inline SolveResult solve(const ConvexForm& cf, const SolverOptions& opts = {}) {
  IpmSolver solver(cf, opts);
  SolveResult res = solver.run();
  if (res.status == SolveResult::Status::Optimal ||
      res.status == SolveResult::Status::Infeasible)
    return res;

  Phase1Result p1 = phase1(cf, opts);
  if (!p1.feasible && (p1.details.status == SolveResult::Status::Optimal ||
                       p1.details.status == SolveResult::Status::Infeasible)) {
    SolveResult out = std::move(res);
    out.status = SolveResult::Status::Infeasible;
    out.message = "phase-1 slack " + std::to_string(p1.slack) + " > 1e-8";
    return out;
  }
  if (p1.feasible && !p1.y.empty()) {
    SolverOptions retry = opts;
    retry.warm_start_y = p1.y;
    IpmSolver second(cf, retry);
    SolveResult res2 = second.run();
    if (res2.status == SolveResult::Status::Optimal) return res2;
    // Seeded jitter retry around the feasible point.
    std::mt19937_64 rng(opts.seed + 17);
    std::normal_distribution<double> noise(0.0, 1e-3);
    for (double& v : *retry.warm_start_y) v += noise(rng);
    IpmSolver third(cf, retry);
    SolveResult res3 = third.run();
    if (res3.status == SolveResult::Status::Optimal) return res3;
    return res2.primal_infeasibility < res.primal_infeasibility ? res2 : res;
  }
  return res;
}

inline SolveResult solve(const GeometricProgram& gp, const SolverOptions& opts = {}) {
  return solve(to_convex(gp), opts);
}

}  // namespace pmdpgp
