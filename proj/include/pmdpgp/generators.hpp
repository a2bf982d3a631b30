#pragma once

// Bundled example models: the Knuth-Yao die over biased coins, a chain of
// dice sharing parameter pairs, and a small retransmission-protocol style
// pMDP. All are shape-conformant (at most one signomial successor per row).

#include <string>
#include <vector>

#include "pmdpgp/expr_io.hpp"
#include "pmdpgp/model.hpp"

namespace pmdpgp {

// Six-sided die simulated by two alternately flipped biased coins with heads
// probabilities p and q. Outcome states d1..d6; every coin flip costs 1.
inline Pmdp knuth_yao_die() {
  Pmdp m;
  m.is_mc = true;
  m.name = "ky_die";
  m.state_names = {"s0", "s1", "s2", "s3", "s4", "s5", "s6",
                   "d1", "d2", "d3", "d4", "d5", "d6"};
  m.initial = 0;
  m.action_names = {"flip"};
  VarId p = m.table.declare("p", VarKind::ModelParameter);
  VarId q = m.table.declare("q", VarKind::ModelParameter);
  m.parameters = {p, q};

  auto one = [] { return Signomial(1.0); };
  auto var = [](VarId v) { return Signomial(v); };
  auto bar = [&](VarId v) { return Signomial(1.0) - Signomial(v); };

  m.rows.resize(13);
  auto add = [&](int s, double cost, std::vector<TransitionEntry> entries) {
    ActionRow row;
    row.action = 0;
    row.cost = cost;
    row.entries = std::move(entries);
    m.rows[s].push_back(std::move(row));
  };
  int s0 = 0, s1 = 1, s2 = 2, s3 = 3, s4 = 4, s5 = 5, s6 = 6, d1 = 7;
  add(s0, 1, {{s1, var(p)}, {s2, bar(p)}});
  add(s1, 1, {{s3, var(q)}, {s4, bar(q)}});
  add(s2, 1, {{s5, var(q)}, {s6, bar(q)}});
  add(s3, 1, {{s1, var(p)}, {d1 + 0, bar(p)}});
  add(s4, 1, {{d1 + 1, bar(p)}, {d1 + 2, var(p)}});
  add(s5, 1, {{s2, var(p)}, {d1 + 3, bar(p)}});
  add(s6, 1, {{d1 + 4, bar(p)}, {d1 + 5, var(p)}});
  for (int i = 0; i < 6; ++i) {
    add(d1 + i, 0, {{d1 + i, one()}});
    m.labels["die" + std::to_string(i + 1)] = {d1 + i};
  }
  m.labels["outcomes"] = {d1, d1 + 1, d1 + 2, d1 + 3, d1 + 4, d1 + 5};
  m.validate();
  return m;
}

// Chain of `num_dice` Knuth-Yao dice rolled in sequence. Dice share coin
// parameter pairs round-robin from a pool of `num_pairs` pairs, so the model
// has 2*num_pairs parameters. 12 dice give the 156-state instance.
inline Pmdp multi_dice(int num_dice, int num_pairs) {
  if (num_dice < 1 || num_pairs < 1 || num_pairs > num_dice)
    throw ModelError("multi_dice requires 1 <= num_pairs <= num_dice");
  Pmdp m;
  m.is_mc = true;
  m.name = "dice" + std::to_string(num_dice) + "_" + std::to_string(2 * num_pairs) + "p";
  m.initial = 0;
  m.action_names = {"flip"};
  std::vector<VarId> ps, qs;
  for (int i = 0; i < num_pairs; ++i) {
    ps.push_back(m.table.declare("p" + std::to_string(i + 1), VarKind::ModelParameter));
    qs.push_back(m.table.declare("q" + std::to_string(i + 1), VarKind::ModelParameter));
  }
  m.parameters.insert(m.parameters.end(), ps.begin(), ps.end());
  m.parameters.insert(m.parameters.end(), qs.begin(), qs.end());

  auto var = [](VarId v) { return Signomial(v); };
  auto bar = [&](VarId v) { return Signomial(1.0) - Signomial(v); };

  const int per_die = 13;
  int n = per_die * num_dice;
  m.rows.resize(n);
  m.state_names.resize(n);
  for (int d = 0; d < num_dice; ++d) {
    std::string suffix = "_" + std::to_string(d + 1);
    int base = per_die * d;
    for (int i = 0; i < 7; ++i) m.state_names[base + i] = "s" + std::to_string(i) + suffix;
    for (int i = 0; i < 6; ++i) m.state_names[base + 7 + i] = "d" + std::to_string(i + 1) + suffix;
    VarId p = ps[d % num_pairs], q = qs[d % num_pairs];
    auto add = [&](int s, double cost, std::vector<TransitionEntry> entries) {
      ActionRow row;
      row.action = 0;
      row.cost = cost;
      row.entries = std::move(entries);
      m.rows[base + s].push_back(std::move(row));
    };
    add(0, 1, {{base + 1, var(p)}, {base + 2, bar(p)}});
    add(1, 1, {{base + 3, var(q)}, {base + 4, bar(q)}});
    add(2, 1, {{base + 5, var(q)}, {base + 6, bar(q)}});
    add(3, 1, {{base + 1, var(p)}, {base + 7, bar(p)}});
    add(4, 1, {{base + 8, bar(p)}, {base + 9, var(p)}});
    add(5, 1, {{base + 2, var(p)}, {base + 10, bar(p)}});
    add(6, 1, {{base + 11, bar(p)}, {base + 12, var(p)}});
    bool last = d + 1 == num_dice;
    for (int i = 0; i < 6; ++i) {
      int outcome = base + 7 + i;
      if (last)
        add(7 + i, 0, {{outcome, Signomial(1.0)}});
      else
        add(7 + i, 0, {{per_die * (d + 1), Signomial(1.0)}});
    }
  }
  std::vector<int> finals;
  int last_base = per_die * (num_dice - 1);
  for (int i = 0; i < 6; ++i) {
    m.labels["die" + std::to_string(i + 1)] = {last_base + 7 + i};
    finals.push_back(last_base + 7 + i);
  }
  m.labels["outcomes"] = finals;
  m.validate();
  return m;
}

// Retransmission protocol sketch: frames are sent over a lossy channel; a
// frame advances when both the data and the ack get through (probability
// a*b), otherwise the sender retries up to `max_retries` times. A nondeter-
// ministic giveup action aborts to the failure state. Frames are split into
// `num_groups` groups with their own (a, b) channel parameters.
inline Pmdp brp_like(int num_frames, int max_retries, int num_groups = 1, bool as_mdp = true) {
  if (num_frames < 1 || max_retries < 0 || num_groups < 1 || num_groups > num_frames)
    throw ModelError("invalid brp_like configuration");
  Pmdp m;
  m.is_mc = !as_mdp;
  m.name = "brp" + std::to_string(num_frames) + "x" + std::to_string(max_retries);
  m.initial = 0;
  m.action_names = as_mdp ? std::vector<std::string>{"send", "giveup"}
                          : std::vector<std::string>{"send"};
  std::vector<VarId> as, bs;
  for (int g = 0; g < num_groups; ++g) {
    as.push_back(m.table.declare("a" + std::to_string(g + 1), VarKind::ModelParameter));
    bs.push_back(m.table.declare("b" + std::to_string(g + 1), VarKind::ModelParameter));
  }
  m.parameters.insert(m.parameters.end(), as.begin(), as.end());
  m.parameters.insert(m.parameters.end(), bs.begin(), bs.end());

  const int retries = max_retries + 1;
  int n = num_frames * retries + 2;
  int success = n - 2, failure = n - 1;
  m.state_names.resize(n);
  m.rows.resize(n);
  auto idx = [&](int frame, int retry) { return frame * retries + retry; };
  for (int f = 0; f < num_frames; ++f)
    for (int r = 0; r < retries; ++r)
      m.state_names[idx(f, r)] =
          "f" + std::to_string(f + 1) + "r" + std::to_string(r);
  m.state_names[success] = "success";
  m.state_names[failure] = "failure";

  for (int f = 0; f < num_frames; ++f) {
    int g = f * num_groups / num_frames;
    Signomial ok = Signomial(as[g]) * Signomial(bs[g]);
    Signomial lost = Signomial(1.0) - ok;
    for (int r = 0; r < retries; ++r) {
      int s = idx(f, r);
      int advance = f + 1 < num_frames ? idx(f + 1, 0) : success;
      int retry = r + 1 < retries ? idx(f, r + 1) : failure;
      ActionRow send;
      send.action = 0;
      send.cost = 1.0;
      send.entries = {{advance, ok}, {retry, lost}};
      m.rows[s].push_back(std::move(send));
      if (as_mdp) {
        ActionRow giveup;
        giveup.action = 1;
        giveup.cost = 0.0;
        giveup.entries = {{failure, Signomial(1.0)}};
        m.rows[s].push_back(std::move(giveup));
      }
    }
  }
  for (int s : {success, failure}) {
    ActionRow stay;
    stay.action = 0;
    stay.cost = 0.0;
    stay.entries = {{s, Signomial(1.0)}};
    m.rows[s].push_back(std::move(stay));
  }
  m.labels["success"] = {success};
  m.labels["failure"] = {failure};
  m.labels["done"] = {success, failure};
  m.validate();
  return m;
}

}  // namespace pmdpgp
