#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "pmdpgp/generators.hpp"
#include "pmdpgp/model.hpp"
#include "pmdpgp/model_io.hpp"

using namespace pmdpgp;

namespace {

Valuation die_valuation(const Pmdp& die, double p, double q) {
  Valuation u;
  u.set(die.table.find("p"), p);
  u.set(die.table.find("q"), q);
  return u;
}

double edge(const InstantiatedMdp& m, int s, int t) {
  for (const auto& e : m.rows[s][0].entries)
    if (e.succ == t) return e.prob;
  return 0.0;
}

}  // namespace

TEST_CASE("instantiating the die reproduces the concrete chain") {
  Pmdp die = knuth_yao_die();
  InstantiatedMdp mc = instantiate(die, die_valuation(die, 0.4, 0.7));
  CHECK(mc.well_defined);
  CHECK(edge(mc, 0, 1) == Catch::Approx(0.4));
  CHECK(edge(mc, 0, 2) == Catch::Approx(0.6));
  CHECK(edge(mc, 1, 3) == Catch::Approx(0.7));
  CHECK(edge(mc, 1, 4) == Catch::Approx(0.3));
  CHECK(edge(mc, 3, 1) == Catch::Approx(0.4));
  CHECK(edge(mc, 3, die.state_index("d1")) == Catch::Approx(0.6));

  SECTION("all rows sum to one at p = q = 0.5") {
    InstantiatedMdp fair = instantiate(die, die_valuation(die, 0.5, 0.5));
    CHECK(fair.well_defined);
    CHECK(fair.worst_row_error < 1e-12);
  }

  SECTION("missing parameter") {
    Valuation u;
    u.set(die.table.find("p"), 0.5);
    CHECK_THROWS_AS(instantiate(die, u), MissingVariableError);
  }
}

TEST_CASE("instantiate flags non-stochastic rows without failing") {
  Pmdp m;
  m.is_mc = true;
  m.name = "bad_row";
  m.state_names = {"a", "b"};
  m.initial = 0;
  m.action_names = {"go"};
  VarId p = m.table.declare("p", VarKind::ModelParameter);
  m.parameters = {p};
  m.rows.resize(2);
  // Row a: p to b twice the mass; sums to 2p, well-defined only at p = 0.5.
  m.rows[0].push_back({0, 0.0, {{1, Signomial(p)}, {0, Signomial(p)}}});
  m.rows[1].push_back({0, 0.0, {{1, Signomial(1.0)}}});

  Valuation u;
  u.set(p, 0.9);
  InstantiatedMdp inst = instantiate(m, u);
  CHECK_FALSE(inst.well_defined);
  CHECK(inst.worst_row_error == Catch::Approx(0.8));

  u.set(p, 0.5);
  CHECK(instantiate(m, u).well_defined);
}

TEST_CASE("induce mixes action rows per the scheduler") {
  // Deterministic model: unit scheduler leaves transitions unchanged.
  Pmdp die = knuth_yao_die();
  InstantiatedMdp mc = instantiate(die, die_valuation(die, 0.4, 0.7));
  InstantiatedMc induced = induce(mc, Scheduler::uniform(die));
  for (int s = 0; s < die.state_count(); ++s) {
    CHECK(induced.transitions[s].size() == mc.rows[s][0].entries.size());
    double sum = 0.0;
    for (auto [t, pr] : induced.transitions[s]) sum += pr;
    CHECK(sum == Catch::Approx(1.0));
  }

  // Two actions, rows (1,0) and (0,1), weights 0.5/0.5 -> row (0.5, 0.5).
  Pmdp m;
  m.name = "two_action";
  m.state_names = {"s", "t", "u"};
  m.initial = 0;
  m.action_names = {"left", "right"};
  m.rows.resize(3);
  m.rows[0].push_back({0, 1.0, {{1, Signomial(1.0)}}});
  m.rows[0].push_back({1, 3.0, {{2, Signomial(1.0)}}});
  m.rows[1].push_back({0, 0.0, {{1, Signomial(1.0)}}});
  m.rows[2].push_back({0, 0.0, {{2, Signomial(1.0)}}});
  m.validate();
  Scheduler half;
  half.weights = {{{0, 0.5}, {1, 0.5}}, {{0, 1.0}}, {{0, 1.0}}};
  half.validate(m);
  InstantiatedMc mixed = induce(instantiate(m, Valuation{}), half);
  REQUIRE(mixed.transitions[0].size() == 2);
  CHECK(mixed.transitions[0][0].second == Catch::Approx(0.5));
  CHECK(mixed.transitions[0][1].second == Catch::Approx(0.5));
  CHECK(mixed.state_cost[0] == Catch::Approx(2.0));  // 0.5*1 + 0.5*3

  SECTION("scheduler on disabled action") {
    Scheduler bad;
    bad.weights = {{{0, 0.5}, {1, 0.5}}, {{1, 1.0}}, {{0, 1.0}}};
    CHECK_THROWS_AS(bad.validate(m), ModelError);
  }
}

TEST_CASE("induce matches a brute-force mixture on a random MDP", "[property]") {
  std::mt19937 rng(31337);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 5;
    Pmdp m;
    m.name = "rand";
    for (int i = 0; i < n; ++i) m.state_names.push_back("s" + std::to_string(i));
    m.initial = 0;
    m.action_names = {"a", "b"};
    m.rows.resize(n);
    for (int s = 0; s < n; ++s) {
      int n_actions = 1 + (rng() % 2);
      for (int a = 0; a < n_actions; ++a) {
        ActionRow row;
        row.action = a;
        row.cost = unit(rng);
        double mass = 0.0;
        std::vector<double> w;
        for (int t = 0; t < n; ++t) {
          w.push_back(unit(rng));
          mass += w.back();
        }
        for (int t = 0; t < n; ++t) row.entries.push_back({t, Signomial(w[t] / mass)});
        m.rows[s].push_back(std::move(row));
      }
    }
    m.validate();
    Scheduler sched;
    sched.weights.resize(n);
    for (int s = 0; s < n; ++s) {
      double total = 0.0;
      std::vector<double> w(m.rows[s].size());
      for (auto& x : w) {
        x = unit(rng);
        total += x;
      }
      for (std::size_t a = 0; a < w.size(); ++a)
        sched.weights[s].emplace_back(m.rows[s][a].action, w[a] / total);
    }
    sched.validate(m);
    InstantiatedMc mc = induce(instantiate(m, Valuation{}), sched);
    // Def.-6 sum computed independently.
    for (int s = 0; s < n; ++s) {
      for (int t = 0; t < n; ++t) {
        double expected = 0.0;
        for (const auto& row : m.rows[s])
          for (const auto& e : row.entries)
            if (e.succ == t)
              expected += sched.weight(s, row.action) * e.prob.constant_value();
        double got = 0.0;
        for (auto [succ, pr] : mc.transitions[s])
          if (succ == t) got = pr;
        CHECK(got == Catch::Approx(expected).margin(1e-12));
      }
      double row_sum = 0.0;
      for (auto [succ, pr] : mc.transitions[s]) row_sum += pr;
      CHECK(std::abs(row_sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("prob01 analysis on the die") {
  Pmdp die = knuth_yao_die();
  std::vector<int> t_die1 = die.label_set("die1");
  Prob01Result res = prob01_analysis(die, t_die1);

  // Target is trivially reached from itself.
  CHECK(res.prob1[die.state_index("d1")]);
  // Outcomes 2..6 cannot reach outcome 1.
  for (int i = 2; i <= 6; ++i) CHECK(res.prob0[die.state_index("d" + std::to_string(i))]);
  // The whole right coin subtree is oblivious of outcome 1.
  CHECK(res.prob0[die.state_index("s2")]);
  CHECK(res.prob0[die.state_index("s5")]);
  CHECK(res.prob0[die.state_index("s4")]);
  // s0 reaches d1 with positive but non-unit probability.
  CHECK_FALSE(res.prob0[die.state_index("s0")]);
  CHECK_FALSE(res.prob1[die.state_index("s0")]);

  SECTION("prob0 and prob1 are disjoint, target inside prob1") {
    for (int s = 0; s < die.state_count(); ++s) CHECK_FALSE((res.prob0[s] && res.prob1[s]));
  }

  SECTION("all outcomes: every state reaches almost surely") {
    Prob01Result all = prob01_analysis(die, die.label_set("outcomes"));
    for (int s = 0; s < die.state_count(); ++s) {
      CHECK_FALSE(all.prob0[s]);
      CHECK(all.prob1[s]);
    }
  }
}

TEST_CASE("prob01 on an MDP distinguishes universal reachability") {
  // s0 has a safe action looping away from the target: prob1 must not hold.
  Pmdp m;
  m.name = "choice";
  m.state_names = {"s0", "loop", "t"};
  m.initial = 0;
  m.action_names = {"go", "stay"};
  m.rows.resize(3);
  m.rows[0].push_back({0, 0.0, {{2, Signomial(1.0)}}});
  m.rows[0].push_back({1, 0.0, {{1, Signomial(1.0)}}});
  m.rows[1].push_back({0, 0.0, {{1, Signomial(1.0)}}});
  m.rows[2].push_back({0, 0.0, {{2, Signomial(1.0)}}});
  m.validate();
  Prob01Result res = prob01_analysis(m, {2});
  CHECK_FALSE(res.prob0[0]);  // reachable via "go"
  CHECK_FALSE(res.prob1[0]);  // "stay" avoids the target forever
  CHECK(res.prob0[1]);
  CHECK(res.prob1[2]);
}

TEST_CASE("normalize_solution") {
  Pmdp die = knuth_yao_die();

  SECTION("lifted pair rescale: 0.38/0.57 -> 0.4/0.6") {
    VarId p = die.table.find("p");
    VarId q = die.table.find("q");
    // Fake a lifted complement variable as the encoder would create it.
    VarTable aux;
    auto def = std::make_shared<LiftedDef>();
    def->definition = Signomial(1.0) - Signomial(p);
    def->complement = Signomial(p);
    def->simple_pair = true;
    def->base = p;
    VarMeta meta;
    meta.lifted = def;
    VarId pbar = aux.declare("pbar", VarKind::Lifting, meta);

    auto qdef = std::make_shared<LiftedDef>();
    qdef->definition = Signomial(1.0) - Signomial(q);
    qdef->complement = Signomial(q);
    qdef->simple_pair = true;
    qdef->base = q;
    VarMeta qmeta;
    qmeta.lifted = qdef;
    VarId qbar = aux.declare("qbar", VarKind::Lifting, qmeta);

    Valuation raw;
    raw.set(p, 0.38);
    raw.set(pbar, 0.57);
    raw.set(q, 0.7);
    raw.set(qbar, 0.3);
    auto [u, sched] = normalize_solution(raw, die);
    CHECK(u.at(p) == Catch::Approx(0.4));
    CHECK(u.at(pbar) == Catch::Approx(0.6));
    CHECK(u.at(q) == Catch::Approx(0.7));
    CHECK(instantiate(die, u).well_defined);
    CHECK(instantiate(die, u).worst_row_error < 1e-12);
  }

  SECTION("scheduler rescale 0.3/0.3 -> 0.5/0.5 and fixpoint on stochastic input") {
    Pmdp m;
    m.name = "sched";
    m.state_names = {"s", "t"};
    m.initial = 0;
    m.action_names = {"a", "b"};
    m.rows.resize(2);
    m.rows[0].push_back({0, 0.0, {{1, Signomial(1.0)}}});
    m.rows[0].push_back({1, 0.0, {{0, Signomial(1.0)}}});
    m.rows[1].push_back({0, 0.0, {{1, Signomial(1.0)}}});
    m.validate();

    VarTable aux;
    VarMeta ma;
    ma.state = 0;
    ma.action = 0;
    VarId sa = aux.declare("sig_s_a", VarKind::Scheduler, ma);
    VarMeta mb;
    mb.state = 0;
    mb.action = 1;
    VarId sb = aux.declare("sig_s_b", VarKind::Scheduler, mb);
    Valuation raw;
    raw.set(sa, 0.3);
    raw.set(sb, 0.3);
    auto [u, sched] = normalize_solution(raw, m);
    CHECK(sched.weight(0, 0) == Catch::Approx(0.5));
    CHECK(sched.weight(0, 1) == Catch::Approx(0.5));
    sched.validate(m);

    Valuation raw2;
    raw2.set(sa, 0.25);
    raw2.set(sb, 0.75);
    auto [u2, sched2] = normalize_solution(raw2, m);
    CHECK(sched2.weight(0, 0) == Catch::Approx(0.25));
    CHECK(sched2.weight(0, 1) == Catch::Approx(0.75));
  }

  SECTION("row-local repair group rescale") {
    Pmdp m;
    m.name = "repair_row";
    m.state_names = {"s", "t", "u"};
    m.initial = 0;
    m.action_names = {"go"};
    m.is_mc = true;
    VarId r1 = m.table.declare("r1", VarKind::ModelParameter);
    VarId r2 = m.table.declare("r2", VarKind::ModelParameter);
    m.parameters = {r1, r2};
    m.rows.resize(3);
    m.rows[0].push_back(
        {0, 0.0,
         {{1, Signomial(Monomial(0.5, {{r1, 1.0}}))}, {2, Signomial(Monomial(0.5, {{r2, 1.0}}))}}});
    m.rows[1].push_back({0, 0.0, {{1, Signomial(1.0)}}});
    m.rows[2].push_back({0, 0.0, {{2, Signomial(1.0)}}});
    m.validate();
    Valuation raw;
    raw.set(r1, 0.9);
    raw.set(r2, 0.9);
    auto [u, sched] = normalize_solution(raw, m);
    CHECK(u.at(r1) == Catch::Approx(1.0));  // 0.9 scaled by 1/0.9
    CHECK(0.5 * u.at(r1) + 0.5 * u.at(r2) == Catch::Approx(1.0));
    CHECK(instantiate(m, u).well_defined);
  }

  SECTION("inexpressible row is an error") {
    Pmdp m;
    m.name = "stuck";
    m.state_names = {"s", "t"};
    m.initial = 0;
    m.action_names = {"go"};
    m.is_mc = true;
    VarId v = m.table.declare("v", VarKind::ModelParameter);
    m.parameters = {v};
    m.rows.resize(2);
    // Row sum v^2 + v: not linear in v, cannot be rescaled exactly.
    m.rows[0].push_back(
        {0, 0.0, {{1, Signomial(Monomial(1.0, {{v, 2.0}}))}, {0, Signomial(v)}}});
    m.rows[1].push_back({0, 0.0, {{1, Signomial(1.0)}}});
    m.validate();
    Valuation raw;
    raw.set(v, 0.9);
    CHECK_THROWS_AS(normalize_solution(raw, m), NormalizationError);
  }
}

TEST_CASE("shape restriction is rejected at validation") {
  Pmdp m;
  m.name = "two_sigs";
  m.state_names = {"s", "t", "u"};
  m.initial = 0;
  m.action_names = {"go"};
  m.is_mc = true;
  VarId p = m.table.declare("p", VarKind::ModelParameter);
  m.parameters = {p};
  m.rows.resize(3);
  Signomial half_bar = Signomial(0.5) - Signomial(Monomial(0.5, {{p, 1.0}}));
  m.rows[0].push_back({0, 0.0, {{1, half_bar}, {2, half_bar}}});
  m.rows[1].push_back({0, 0.0, {{1, Signomial(1.0)}}});
  m.rows[2].push_back({0, 0.0, {{2, Signomial(1.0)}}});
  CHECK_THROWS_AS(m.validate(), ShapeRestrictionError);
}

TEST_CASE("model file round trip") {
  Pmdp die = knuth_yao_die();
  std::string text = serialize_model(die);
  Pmdp back = parse_model(text);
  CHECK(back.is_mc == die.is_mc);
  CHECK(back.state_names == die.state_names);
  CHECK(back.initial == die.initial);
  CHECK(back.parameters.size() == die.parameters.size());
  CHECK(serialize_model(back) == text);  // parse -> serialize -> parse identity

  InstantiatedMdp a = instantiate(die, die_valuation(die, 0.4, 0.7));
  Valuation u2;
  u2.set(back.table.find("p"), 0.4);
  u2.set(back.table.find("q"), 0.7);
  InstantiatedMdp b = instantiate(back, u2);
  for (int s = 0; s < die.state_count(); ++s)
    for (const auto& e : a.rows[s][0].entries)
      CHECK(edge(b, s, e.succ) == Catch::Approx(e.prob));

  SECTION("parse errors carry line numbers") {
    try {
      parse_model("pmc broken\nstates 1\ninitial s0\ntransition s0 a s0 1+\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
  }
}

TEST_CASE("spec and region files") {
  Pmdp die = knuth_yao_die();
  SpecSet specs = parse_specs(
      "reach <= 0.3 label die2\n"
      "expcost <= 4.5 label outcomes\n"
      "maximize reach label die6\n"
      "region\n"
      "p 0.3 0.6\n"
      "q 0.4 0.5\n"
      "end\n",
      die);
  REQUIRE(specs.specs.size() == 2);
  CHECK(specs.specs[0].kind == SpecProperty::Kind::ReachLeq);
  CHECK(specs.specs[0].threshold == 0.3);
  CHECK(specs.specs[1].kind == SpecProperty::Kind::ExpCostLeq);
  CHECK(specs.maximize_reach_label == "die6");
  REQUIRE(specs.region.has_value());
  CHECK(specs.region->bounds.size() == 2);

  CHECK_THROWS_AS(parse_specs("reach <= 1.5 label die2\n", die), ParseError);
  CHECK_THROWS_AS(parse_specs("reach <= 0.5 label nolabel\n", die), ParseError);
  CHECK_THROWS_AS(parse_specs("region\np 0 0.5\nend\n", die), ParseError);

  std::vector<RegionBox> boxes = parse_region_file(
      "box\np 0.45 0.55\nq 0.45 0.55\nend\nbox\np 0.1 0.2\nend\n", die);
  CHECK(boxes.size() == 2);
  CHECK(boxes[0].bounds.size() == 2);
  CHECK(boxes[1].bounds.size() == 1);
}

TEST_CASE("multi dice chain has the documented size") {
  Pmdp dice = multi_dice(12, 4);  // 8 parameters
  CHECK(dice.state_count() == 156);
  CHECK(dice.parameters.size() == 8);
  int transitions = 0;
  for (const auto& rows : dice.rows)
    for (const auto& row : rows) transitions += static_cast<int>(row.entries.size());
  CHECK(transitions == 240);

  Valuation u;
  for (const VarId& v : dice.parameters) u.set(v, 0.5);
  InstantiatedMdp inst = instantiate(dice, u);
  CHECK(inst.well_defined);
}

TEST_CASE("brp_like generator builds a valid pMDP") {
  Pmdp brp = brp_like(8, 3, 2, true);
  CHECK_FALSE(brp.is_mc);
  CHECK(brp.parameters.size() == 4);
  Valuation u;
  for (const VarId& v : brp.parameters) u.set(v, 0.9);
  InstantiatedMdp inst = instantiate(brp, u);
  CHECK(inst.well_defined);
  Prob01Result res = prob01_analysis(brp, brp.label_set("done"));
  for (int s = 0; s < brp.state_count(); ++s) CHECK(res.prob1[s]);
}
