#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "pmdpgp/encoder.hpp"
#include "pmdpgp/generators.hpp"
#include "pmdpgp/gp_solver.hpp"
#include "pmdpgp/mc_analysis.hpp"

using namespace pmdpgp;

namespace {

struct GpFixture {
  VarTable t;
  VarId x = t.declare("x", VarKind::ModelParameter);
  VarId y = t.declare("y", VarKind::ModelParameter);
  VarId z = t.declare("z", VarKind::ModelParameter);
};

}  // namespace

TEST_CASE("to_convex") {
  GpFixture f;

  SECTION("monomial equality becomes an affine row") {
    GeometricProgram gp;
    gp.variables = {f.x, f.y};
    gp.objective = Posynomial(Monomial(f.x));
    gp.equalities.push_back({Monomial(2.0, {{f.x, 1.0}, {f.y, -1.0}}), "m"});
    ConvexForm cf = to_convex(gp);
    REQUIRE(cf.eqs.size() == 1);
    CHECK(cf.eqs[0].rhs == Catch::Approx(-std::log(2.0)));
    REQUIRE(cf.eqs[0].coefs.size() == 2);
    CHECK(cf.eqs[0].coefs[0].second == 1.0);
    CHECK(cf.eqs[0].coefs[1].second == -1.0);
  }

  SECTION("posynomial constraint becomes a log-sum-exp with one term per monomial") {
    GeometricProgram gp;
    gp.variables = {f.x, f.z};
    gp.objective = Posynomial(Monomial(f.x));
    gp.inequalities.push_back(
        {Posynomial(Signomial(f.x) + Signomial(f.z)), "sum"});
    gp.inequalities.push_back({Posynomial(Monomial(f.z)), "single"});
    ConvexForm cf = to_convex(gp);
    REQUIRE(cf.ineqs.size() == 2);
    CHECK(cf.ineqs[0].terms.size() == 2);
    CHECK(cf.ineqs[1].terms.size() == 1);  // single-term: affine in y-space
  }
}

TEST_CASE("solve simple GPs") {
  GpFixture f;

  SECTION("minimize x subject to 0.5/x <= 1") {
    GeometricProgram gp;
    gp.variables = {f.x};
    gp.objective = Posynomial(Monomial(f.x));
    gp.inequalities.push_back({Posynomial(Monomial(0.5, {{f.x, -1.0}})), "lb"});
    SolveResult res = solve(gp);
    REQUIRE(res.status == SolveResult::Status::Optimal);
    CHECK(res.primal.at(f.x) == Catch::Approx(0.5).epsilon(1e-6));
    CHECK(res.objective == Catch::Approx(0.5).epsilon(1e-6));
  }

  SECTION("minimize 1/(xy) subject to x <= 1, y <= 1") {
    GeometricProgram gp;
    gp.variables = {f.x, f.y};
    gp.objective = Posynomial(Monomial(1.0, {{f.x, -1.0}, {f.y, -1.0}}));
    gp.inequalities.push_back({Posynomial(Monomial(f.x)), "x"});
    gp.inequalities.push_back({Posynomial(Monomial(f.y)), "y"});
    SolveResult res = solve(gp);
    REQUIRE(res.status == SolveResult::Status::Optimal);
    CHECK(res.primal.at(f.x) == Catch::Approx(1.0).epsilon(1e-6));
    CHECK(res.primal.at(f.y) == Catch::Approx(1.0).epsilon(1e-6));
  }

  SECTION("monomial equality is honored") {
    // minimize x + y s.t. x*y = 4  ->  x = y = 2.
    GeometricProgram gp;
    gp.variables = {f.x, f.y};
    gp.objective = Posynomial(Signomial(f.x) + Signomial(f.y));
    gp.equalities.push_back({Monomial(0.25, {{f.x, 1.0}, {f.y, 1.0}}), "xy"});
    SolveResult res = solve(gp);
    REQUIRE(res.status == SolveResult::Status::Optimal);
    CHECK(res.primal.at(f.x) == Catch::Approx(2.0).epsilon(1e-5));
    CHECK(res.primal.at(f.y) == Catch::Approx(2.0).epsilon(1e-5));
  }
}

TEST_CASE("solver matches exhaustive log-grid search", "[property]") {
  GpFixture f;
  // Fixtures with <= 3 free variables and optima inside [1e-2, 1e2] boxes.
  struct Fixture {
    GeometricProgram gp;
    std::vector<VarId> vars;
  };
  std::vector<Fixture> fixtures;
  {
    // minimize x + y s.t. 1/(x*y) <= 1
    GeometricProgram gp;
    gp.variables = {f.x, f.y};
    gp.objective = Posynomial(Signomial(f.x) + Signomial(f.y));
    gp.inequalities.push_back({Posynomial(Monomial(1.0, {{f.x, -1.0}, {f.y, -1.0}})), "c"});
    fixtures.push_back({gp, {f.x, f.y}});
  }
  {
    // minimize 2/x + x*y + y/z s.t. x <= 3, z <= 2, 0.5/y <= 1
    GeometricProgram gp;
    gp.variables = {f.x, f.y, f.z};
    Signomial obj = Signomial(Monomial(2.0, {{f.x, -1.0}})) +
                    Signomial(Monomial(1.0, {{f.x, 1.0}, {f.y, 1.0}})) +
                    Signomial(Monomial(1.0, {{f.y, 1.0}, {f.z, -1.0}}));
    gp.objective = Posynomial(obj);
    gp.inequalities.push_back({Posynomial(Monomial(1.0 / 3.0, {{f.x, 1.0}})), "x"});
    gp.inequalities.push_back({Posynomial(Monomial(0.5, {{f.z, 1.0}})), "z"});
    gp.inequalities.push_back({Posynomial(Monomial(0.5, {{f.y, -1.0}})), "y"});
    fixtures.push_back({gp, {f.x, f.y, f.z}});
  }

  for (const auto& fixture : fixtures) {
    SolveResult res = solve(fixture.gp);
    REQUIRE(res.status == SolveResult::Status::Optimal);

    // Exhaustive search over a log grid, 400 points per axis.
    const int pts = 400;
    const double lo = std::log(1e-2), hi = std::log(1e2);
    double best = std::numeric_limits<double>::infinity();
    int nv = static_cast<int>(fixture.vars.size());
    std::vector<int> idx(nv, 0);
    for (;;) {
      Valuation u;
      for (int i = 0; i < nv; ++i)
        u.set(fixture.vars[i], std::exp(lo + (hi - lo) * idx[i] / (pts - 1)));
      bool ok = true;
      for (const auto& c : fixture.gp.inequalities)
        if (c.lhs.evaluate(u) > 1.0) ok = false;
      if (ok) best = std::min(best, fixture.gp.objective.evaluate(u));
      int d = 0;
      while (d < nv && ++idx[d] == pts) idx[d++] = 0;
      if (d == nv) break;
    }
    REQUIRE(std::isfinite(best));
    CHECK(res.objective <= best * (1.0 + 1e-3));
    CHECK(res.objective >= best * (1.0 - 2e-2));  // grid only samples the feasible set
  }
}

TEST_CASE("log-sum-exp Hessians are positive semidefinite", "[property]") {
  std::mt19937 rng(555);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  std::uniform_int_distribution<int> n_terms(1, 5);
  for (int trial = 0; trial < 100; ++trial) {
    ConvexForm::Func func;
    int k = n_terms(rng);
    for (int t = 0; t < k; ++t) {
      ConvexForm::Term term;
      term.log_coef = coef(rng);
      for (int v = 0; v < 4; ++v)
        if (rng() % 2) term.exps.emplace_back(v, coef(rng));
      func.terms.push_back(term);
    }
    auto compiled = detail::CompiledFunc::compile(func);
    if (compiled.support.empty()) continue;
    Eigen::VectorXd y(4);
    for (int i = 0; i < 4; ++i) y[i] = coef(rng);
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    compiled.lse(y, &grad, &hess);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("scaling the objective leaves the argmin unchanged") {
  GpFixture f;
  GeometricProgram gp;
  gp.variables = {f.x, f.y};
  Signomial obj = Signomial(Monomial(2.0, {{f.x, -1.0}})) +
                  Signomial(Monomial(1.0, {{f.x, 1.0}, {f.y, 1.0}})) +
                  Signomial(f.y);
  gp.objective = Posynomial(obj);
  gp.inequalities.push_back({Posynomial(Monomial(0.25, {{f.y, -1.0}})), "y"});
  SolveResult a = solve(gp);
  GeometricProgram scaled = gp;
  scaled.objective = Posynomial(Signomial(Monomial(7.25)) * obj);
  SolveResult b = solve(scaled);
  REQUIRE(a.status == SolveResult::Status::Optimal);
  REQUIRE(b.status == SolveResult::Status::Optimal);
  CHECK(b.primal.at(f.x) == Catch::Approx(a.primal.at(f.x)).margin(1e-6));
  CHECK(b.primal.at(f.y) == Catch::Approx(a.primal.at(f.y)).margin(1e-6));
  CHECK(b.objective == Catch::Approx(7.25 * a.objective).epsilon(1e-7));
}

TEST_CASE("identical runs are bitwise identical") {
  GpFixture f;
  GeometricProgram gp;
  gp.variables = {f.x, f.y};
  gp.objective =
      Posynomial(Signomial(Monomial(1.0, {{f.x, -2.0}})) + Signomial(Monomial(f.y)));
  gp.inequalities.push_back(
      {Posynomial(Signomial(Monomial(0.3, {{f.x, 1.0}, {f.y, -1.0}})) +
                  Signomial(Monomial(0.7, {{f.y, -0.5}}))),
       "mix"});
  SolveResult a = solve(gp);
  SolveResult b = solve(gp);
  REQUIRE(a.status == SolveResult::Status::Optimal);
  CHECK(a.iterations == b.iterations);
  CHECK(a.objective == b.objective);  // bitwise
  CHECK(a.primal.at(f.x) == b.primal.at(f.x));
  CHECK(a.primal.at(f.y) == b.primal.at(f.y));
}

TEST_CASE("phase-1") {
  GpFixture f;

  SECTION("contradictory box is infeasible") {
    GeometricProgram gp;
    gp.variables = {f.x};
    gp.objective = Posynomial(Monomial(f.x));
    gp.inequalities.push_back({Posynomial(Monomial(f.x)), "x<=1"});
    gp.inequalities.push_back({Posynomial(Monomial(2.0, {{f.x, -1.0}})), "x>=2"});
    Phase1Result res = phase1(to_convex(gp));
    CHECK_FALSE(res.feasible);
    CHECK(res.slack > 1e-8);

    SolveResult direct = solve(gp);
    CHECK(direct.status == SolveResult::Status::Infeasible);
  }

  SECTION("empty constraint set is trivially feasible") {
    GeometricProgram gp;
    gp.variables = {f.x};
    gp.objective = Posynomial(Monomial(f.x));
    Phase1Result res = phase1(to_convex(gp));
    CHECK(res.feasible);
  }

  SECTION("strictly feasible point is returned") {
    GeometricProgram gp;
    gp.variables = {f.x, f.y};
    gp.objective = Posynomial(Monomial(f.x));
    gp.inequalities.push_back({Posynomial(Monomial(0.5, {{f.x, 1.0}, {f.y, 1.0}})), "c1"});
    gp.inequalities.push_back({Posynomial(Monomial(0.1, {{f.x, -1.0}})), "c2"});
    ConvexForm cf = to_convex(gp);
    Phase1Result res = phase1(cf);
    REQUIRE(res.feasible);
    REQUIRE(res.y.size() == 2);
    for (std::size_t i = 0; i < cf.ineqs.size(); ++i) {
      auto compiled = detail::CompiledFunc::compile(cf.ineqs[i]);
      Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(res.y.data(), 2);
      CHECK(compiled.lse(y, nullptr, nullptr) < 0.0);
    }
  }
}

TEST_CASE("die feasibility GP yields a valuation meeting the threshold") {
  Pmdp die = knuth_yao_die();
  std::vector<SpecProperty> specs = {SpecProperty::reach(0.2, die.label_set("die2"), "die2")};
  Encoding enc = encode_sgp(die, specs, Objective::feasibility());
  GeometricProgram gp = convexify(enc);
  SolveResult res = solve(gp);
  REQUIRE(res.status == SolveResult::Status::Optimal);

  auto [u, sched] = normalize_solution(res.primal, die);
  InstantiatedMc mc = induce(instantiate(die, u), sched);
  std::vector<CheckResult> chk = check(mc, specs);
  CHECK(chk[0].satisfied);
  CHECK(chk[0].achieved <= 0.2 + 1e-9);

  // Coarse grid oracle: feasible valuations do exist.
  bool any = false;
  Pmdp die2 = knuth_yao_die();
  for (double p = 0.05; p < 1.0 && !any; p += 0.01)
    for (double q = 0.05; q < 1.0 && !any; q += 0.01) {
      Valuation g;
      g.set(die2.table.find("p"), p);
      g.set(die2.table.find("q"), q);
      InstantiatedMc gmc = induce(instantiate(die2, g), Scheduler::uniform(die2));
      if (check(gmc, specs)[0].achieved <= 0.2) any = true;
    }
  CHECK(any);
}
