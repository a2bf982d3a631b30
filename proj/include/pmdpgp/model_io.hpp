#pragma once

// Text formats for models, specification lists and parameter regions.
//
// Model files are line based:
//   pmc <name> | pmdp <name>
//   states <count>
//   initial <state>
//   parameters [names...]
//   transition <state> <action> <successor> <expression>
//   cost <state> <action> <value>
//   label <name> <state>...
//
// Spec files:
//   reach <= LAMBDA label NAME
//   expcost <= KAPPA label NAME
//   maximize reach label NAME
//   region / <param> <lo> <hi> ... / end
//
// Region files are one or more `box ... end` blocks with the same bound lines.

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmdpgp/expr_io.hpp"
#include "pmdpgp/model.hpp"

namespace pmdpgp {

struct SpecSet {
  std::vector<SpecProperty> specs;
  std::optional<std::string> maximize_reach_label;
  std::optional<RegionBox> region;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

inline double parse_double_tok(const std::string& tok, int lineno) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("expected a number, got '" + tok + "'", lineno);
  }
}

}  // namespace detail

inline Pmdp parse_model(const std::string& text) {
  Pmdp m;
  bool kind_seen = false;
  int declared_states = -1;
  std::string initial_name;
  std::map<std::string, int> state_index;
  std::map<std::string, int> action_index;

  auto state_of = [&](const std::string& name) {
    auto it = state_index.find(name);
    if (it != state_index.end()) return it->second;
    int idx = static_cast<int>(m.state_names.size());
    state_index.emplace(name, idx);
    m.state_names.push_back(name);
    m.rows.emplace_back();
    return idx;
  };
  auto action_of = [&](const std::string& name) {
    auto it = action_index.find(name);
    if (it != action_index.end()) return it->second;
    int idx = static_cast<int>(m.action_names.size());
    action_index.emplace(name, idx);
    m.action_names.push_back(name);
    return idx;
  };

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = detail::strip_comment(raw);
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    const std::string& head = toks[0];
    if (head == "pmc" || head == "pmdp") {
      kind_seen = true;
      m.is_mc = head == "pmc";
      if (toks.size() > 1) m.name = toks[1];
    } else if (head == "states") {
      if (toks.size() != 2) throw ParseError("states line needs a count", lineno);
      declared_states = static_cast<int>(detail::parse_double_tok(toks[1], lineno));
    } else if (head == "initial") {
      if (toks.size() != 2) throw ParseError("initial line needs a state name", lineno);
      initial_name = toks[1];
    } else if (head == "parameters") {
      for (std::size_t i = 1; i < toks.size(); ++i)
        m.parameters.push_back(m.table.declare(toks[i], VarKind::ModelParameter));
    } else if (head == "transition") {
      if (toks.size() < 5)
        throw ParseError("transition needs <state> <action> <succ> <expr>", lineno);
      int s = state_of(toks[1]);
      int a = action_of(toks[2]);
      int t = state_of(toks[3]);
      std::string expr_text;
      for (std::size_t i = 4; i < toks.size(); ++i) {
        if (i > 4) expr_text += " ";
        expr_text += toks[i];
      }
      Signomial prob;
      try {
        prob = parse_signomial(expr_text, m.table, false);
      } catch (const ParseError& e) {
        throw ParseError(e.what(), lineno);
      }
      ActionRow* row = nullptr;
      for (auto& r : m.rows[s])
        if (r.action == a) row = &r;
      if (!row) {
        m.rows[s].push_back(ActionRow{a, 0.0, {}});
        row = &m.rows[s].back();
      }
      row->entries.push_back({t, std::move(prob)});
    } else if (head == "cost") {
      if (toks.size() != 4) throw ParseError("cost needs <state> <action> <value>", lineno);
      int s = state_of(toks[1]);
      int a = action_of(toks[2]);
      double value = detail::parse_double_tok(toks[3], lineno);
      ActionRow* row = nullptr;
      for (auto& r : m.rows[s])
        if (r.action == a) row = &r;
      if (!row) {
        m.rows[s].push_back(ActionRow{a, 0.0, {}});
        row = &m.rows[s].back();
      }
      row->cost = value;
    } else if (head == "label") {
      if (toks.size() < 3) throw ParseError("label needs a name and states", lineno);
      std::vector<int>& set = m.labels[toks[1]];
      for (std::size_t i = 2; i < toks.size(); ++i) set.push_back(state_of(toks[i]));
    } else {
      throw ParseError("unknown directive '" + head + "'", lineno);
    }
  }
  if (!kind_seen) throw ParseError("missing model kind line (pmc or pmdp)");
  if (initial_name.empty()) throw ParseError("missing initial state");
  auto it = state_index.find(initial_name);
  if (it == state_index.end())
    throw ParseError("initial state '" + initial_name + "' has no transitions");
  m.initial = it->second;
  if (declared_states >= 0 && declared_states != m.state_count())
    throw ParseError("declared " + std::to_string(declared_states) + " states but found " +
                     std::to_string(m.state_count()));
  try {
    m.validate();
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
  return m;
}

inline std::string serialize_model(const Pmdp& m) {
  std::ostringstream out;
  out << (m.is_mc ? "pmc " : "pmdp ") << m.name << "\n";
  out << "states " << m.state_count() << "\n";
  out << "initial " << m.state_names[m.initial] << "\n";
  if (!m.parameters.empty()) {
    out << "parameters";
    for (const VarId& v : m.parameters) out << " " << v.name();
    out << "\n";
  }
  for (int s = 0; s < m.state_count(); ++s)
    for (const auto& row : m.rows[s])
      for (const auto& e : row.entries)
        out << "transition " << m.state_names[s] << " " << m.action_names[row.action] << " "
            << m.state_names[e.succ] << " " << to_string(e.prob) << "\n";
  for (int s = 0; s < m.state_count(); ++s)
    for (const auto& row : m.rows[s])
      if (row.cost != 0.0)
        out << "cost " << m.state_names[s] << " " << m.action_names[row.action] << " "
            << format_double(row.cost) << "\n";
  for (const auto& [name, set] : m.labels) {
    out << "label " << name;
    for (int s : set) out << " " << m.state_names[s];
    out << "\n";
  }
  return out.str();
}

namespace detail {
inline std::pair<VarId, std::pair<double, double>> parse_bound_line(
    const std::vector<std::string>& toks, const Pmdp& m, int lineno) {
  if (toks.size() != 3) throw ParseError("bound line needs <param> <lo> <hi>", lineno);
  VarId v;
  try {
    v = m.table.find(toks[0]);
  } catch (const Error&) {
    throw ParseError("unknown parameter '" + toks[0] + "'", lineno);
  }
  double lo = parse_double_tok(toks[1], lineno);
  double hi = parse_double_tok(toks[2], lineno);
  if (!(lo > 0.0) || !(lo <= hi))
    throw ParseError("bounds must satisfy 0 < lo <= hi", lineno);
  return {v, {lo, hi}};
}
}  // namespace detail

inline SpecSet parse_specs(const std::string& text, const Pmdp& m) {
  SpecSet set;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  bool in_region = false;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = detail::strip_comment(raw);
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (in_region) {
      if (toks[0] == "end") {
        in_region = false;
        continue;
      }
      set.region->bounds.push_back(detail::parse_bound_line(toks, m, lineno));
      continue;
    }
    if (toks[0] == "region") {
      if (set.region) throw ParseError("duplicate region block", lineno);
      set.region = RegionBox{};
      in_region = true;
    } else if (toks[0] == "reach" || toks[0] == "expcost") {
      if (toks.size() != 5 || toks[1] != "<=" || toks[3] != "label")
        throw ParseError("expected '" + toks[0] + " <= THRESHOLD label NAME'", lineno);
      double threshold = detail::parse_double_tok(toks[2], lineno);
      std::vector<int> target;
      try {
        target = m.label_set(toks[4]);
      } catch (const Error& e) {
        throw ParseError(e.what(), lineno);
      }
      try {
        if (toks[0] == "reach")
          set.specs.push_back(SpecProperty::reach(threshold, target, toks[4]));
        else
          set.specs.push_back(SpecProperty::expcost(threshold, target, toks[4]));
      } catch (const Error& e) {
        throw ParseError(e.what(), lineno);
      }
    } else if (toks[0] == "maximize") {
      if (toks.size() != 4 || toks[1] != "reach" || toks[2] != "label")
        throw ParseError("expected 'maximize reach label NAME'", lineno);
      if (set.maximize_reach_label) throw ParseError("duplicate objective line", lineno);
      try {
        m.label_set(toks[3]);
      } catch (const Error& e) {
        throw ParseError(e.what(), lineno);
      }
      set.maximize_reach_label = toks[3];
    } else {
      throw ParseError("unknown spec directive '" + toks[0] + "'", lineno);
    }
  }
  if (in_region) throw ParseError("unterminated region block");
  return set;
}

inline std::vector<RegionBox> parse_region_file(const std::string& text, const Pmdp& m) {
  std::vector<RegionBox> boxes;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  bool in_box = false;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = detail::strip_comment(raw);
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] == "box") {
      if (in_box) throw ParseError("nested box", lineno);
      boxes.emplace_back();
      in_box = true;
    } else if (toks[0] == "end") {
      if (!in_box) throw ParseError("'end' outside box", lineno);
      in_box = false;
    } else if (in_box) {
      boxes.back().bounds.push_back(detail::parse_bound_line(toks, m, lineno));
    } else {
      throw ParseError("expected 'box'", lineno);
    }
  }
  if (in_box) throw ParseError("unterminated box");
  if (boxes.empty()) throw ParseError("region file contains no boxes");
  return boxes;
}

}  // namespace pmdpgp
