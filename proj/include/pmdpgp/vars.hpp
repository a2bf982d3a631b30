#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pmdpgp/errors.hpp"

namespace pmdpgp {

enum class VarKind { ModelParameter, Lifting, Scheduler, Probability, Cost };

inline const char* to_string(VarKind k) {
  switch (k) {
    case VarKind::ModelParameter: return "model-parameter";
    case VarKind::Lifting: return "lifting";
    case VarKind::Scheduler: return "scheduler";
    case VarKind::Probability: return "probability";
    case VarKind::Cost: return "cost";
  }
  return "?";
}

struct LiftedDef;  // defined in expr.hpp

// Extra payload attached to variables created by the encoder. state/action/spec
// indices let downstream code map solver values back onto the model without a
// side table.
struct VarMeta {
  int state = -1;
  int action = -1;
  int spec = -1;
  std::shared_ptr<const LiftedDef> lifted;
};

namespace detail {
struct VarInfo {
  std::uint64_t uid;
  std::string name;
  VarKind kind;
  VarMeta meta;
};
inline std::uint64_t next_var_uid() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

// Lightweight handle to an immutable variable record. Identity is the record,
// not the name; two tables may both declare "p" without the handles comparing
// equal. Ordering follows creation order, which keeps expression normal forms
// deterministic within a process.
class VarId {
 public:
  VarId() = default;

  const std::string& name() const { return info_->name; }
  VarKind kind() const { return info_->kind; }
  const VarMeta& meta() const { return info_->meta; }
  bool valid() const { return info_ != nullptr; }

  friend bool operator==(const VarId& a, const VarId& b) { return a.info_ == b.info_; }
  friend bool operator!=(const VarId& a, const VarId& b) { return a.info_ != b.info_; }
  friend bool operator<(const VarId& a, const VarId& b) {
    if (a.info_ == b.info_) return false;
    if (!a.info_) return true;
    if (!b.info_) return false;
    return a.info_->uid < b.info_->uid;
  }

  std::size_t hash() const { return std::hash<const void*>{}(info_.get()); }

 private:
  friend class VarTable;
  explicit VarId(std::shared_ptr<const detail::VarInfo> info) : info_(std::move(info)) {}
  std::shared_ptr<const detail::VarInfo> info_;
};

struct VarIdHash {
  std::size_t operator()(const VarId& v) const { return v.hash(); }
};

// Registry of variables belonging to one problem. Names are unique per table.
class VarTable {
 public:
  VarId declare(const std::string& name, VarKind kind, VarMeta meta = {}) {
    if (taken(name)) throw ModelError("variable '" + name + "' declared twice");
    auto info = std::make_shared<detail::VarInfo>(
        detail::VarInfo{detail::next_var_uid(), name, kind, std::move(meta)});
    VarId id{std::move(info)};
    by_name_.emplace(name, id);
    vars_.push_back(id);
    return id;
  }

  // Declares `base` if free, otherwise base_2, base_3, ...
  VarId declare_fresh(const std::string& base, VarKind kind, VarMeta meta = {}) {
    if (!taken(base)) return declare(base, kind, std::move(meta));
    for (int i = 2;; ++i) {
      std::string candidate = base + "_" + std::to_string(i);
      if (!taken(candidate)) return declare(candidate, kind, std::move(meta));
    }
  }

  // Reserves a name (e.g. one declared in another table) without creating a
  // variable here.
  void block(const std::string& name) { blocked_.insert(name); }

  VarId find(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ModelError("unknown variable '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }
  const std::vector<VarId>& all() const { return vars_; }
  std::size_t size() const { return vars_.size(); }

 private:
  bool taken(const std::string& name) const {
    return by_name_.count(name) != 0 || blocked_.count(name) != 0;
  }
  std::unordered_map<std::string, VarId> by_name_;
  std::unordered_set<std::string> blocked_;
  std::vector<VarId> vars_;
};

// Assignment of strictly positive reals to variables.
class Valuation {
 public:
  Valuation() = default;

  void set(const VarId& v, double value) {
    if (!(value > 0.0))
      throw ModelError("valuation for '" + v.name() + "' must be > 0, got " +
                       std::to_string(value));
    values_[v] = value;
  }

  bool contains(const VarId& v) const { return values_.count(v) != 0; }

  double at(const VarId& v) const {
    auto it = values_.find(v);
    if (it == values_.end()) throw MissingVariableError(v.name());
    return it->second;
  }

  double get_or(const VarId& v, double fallback) const {
    auto it = values_.find(v);
    return it == values_.end() ? fallback : it->second;
  }

  std::size_t size() const { return values_.size(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

 private:
  std::unordered_map<VarId, double, VarIdHash> values_;
};

}  // namespace pmdpgp
