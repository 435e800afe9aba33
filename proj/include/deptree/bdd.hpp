#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "deptree/errors.hpp"
#include "deptree/model.hpp"

namespace deptree {

/// One literal on a BDD path: the variable at `position` in the ordering,
/// taken on its 1-branch (occurred) or 0-branch.
struct PathLiteral {
  std::size_t position;
  bool occurred;
};

/// A root-to-terminal path. Variables absent from the literal list are
/// unconstrained ("don't care"); distinct paths are disjoint events.
struct FailurePath {
  std::vector<PathLiteral> literals;
};

/// Reduced ordered binary decision diagram over one variable ordering, with
/// hash-consed nodes. Construction and derived-function operations mutate the
/// node store (single writer); traversal of finished functions is const.
class Bdd {
 public:
  using Ref = std::uint32_t;
  static constexpr Ref kZero = 0;
  static constexpr Ref kOne = 1;

  explicit Bdd(std::vector<std::string> ordering)
      : ordering_(std::move(ordering)) {
    nodes_.push_back({kTerminalVar, 0, 0});
    nodes_.push_back({kTerminalVar, 1, 1});
    for (std::size_t i = 0; i < ordering_.size(); ++i)
      if (!position_of_.emplace(ordering_[i], i).second)
        throw ValidationError("duplicate event '" + ordering_[i] +
                              "' in variable ordering");
  }

  const std::vector<std::string>& ordering() const { return ordering_; }
  std::size_t variable_count() const { return ordering_.size(); }
  const std::string& event_at(std::size_t position) const {
    return ordering_.at(position);
  }
  std::size_t position_of(const std::string& event) const {
    auto it = position_of_.find(event);
    if (it == position_of_.end())
      throw ValidationError("event '" + event + "' not in variable ordering");
    return it->second;
  }
  bool contains(const std::string& event) const {
    return position_of_.count(event) != 0;
  }

  std::size_t node_count() const { return nodes_.size(); }
  Ref root() const { return root_; }
  void set_root(Ref r) { root_ = r; }

  bool is_terminal(Ref f) const { return f <= kOne; }
  std::size_t var_of(Ref f) const { return nodes_[f].var; }
  Ref low(Ref f) const { return nodes_[f].low; }
  Ref high(Ref f) const { return nodes_[f].high; }

  Ref variable(std::size_t position) {
    return make_node(static_cast<std::uint32_t>(position), kZero, kOne);
  }

  Ref conjoin(Ref f, Ref g) { return apply(true, f, g); }
  Ref disjoin(Ref f, Ref g) { return apply(false, f, g); }

  Ref negate(Ref f) {
    if (f == kZero) return kOne;
    if (f == kOne) return kZero;
    auto it = negate_memo_.find(f);
    if (it != negate_memo_.end()) return it->second;
    Ref r = make_node(nodes_[f].var, negate(nodes_[f].low),
                      negate(nodes_[f].high));
    negate_memo_.emplace(f, r);
    return r;
  }

  /// Cofactor: f with the variable at `position` fixed to `value`.
  Ref restrict(Ref f, std::size_t position, bool value) {
    std::unordered_map<Ref, Ref> memo;
    return restrict_rec(f, static_cast<std::uint32_t>(position), value, memo);
  }

  /// Truth value of f under a full assignment indexed by variable position.
  bool evaluate(Ref f, const std::vector<bool>& assignment) const {
    while (!is_terminal(f)) {
      const Node& n = nodes_[f];
      f = assignment[n.var] ? n.high : n.low;
    }
    return f == kOne;
  }

  /// Number of root-to-terminal paths reaching the given terminal.
  double count_paths(Ref f, bool to_one) const {
    std::unordered_map<Ref, double> memo;
    return count_paths_rec(f, to_one, memo);
  }

  /// All paths from f to the requested terminal, literals in ordering order,
  /// 1-branches explored first. Throws once the count exceeds `cap`.
  std::vector<FailurePath> enumerate_paths(Ref f, bool to_one,
                                           std::size_t cap = 1000000) const {
    double total = count_paths(f, to_one);
    if (total > static_cast<double>(cap))
      throw AnalysisError("path enumeration overflow: " +
                          std::to_string(total) + " paths exceed the cap of " +
                          std::to_string(cap));
    std::vector<FailurePath> paths;
    paths.reserve(static_cast<std::size_t>(total));
    std::vector<PathLiteral> prefix;
    collect_paths(f, to_one, prefix, paths);
    return paths;
  }

 private:
  struct Node {
    std::uint32_t var;
    Ref low;
    Ref high;
  };

  static constexpr std::uint32_t kTerminalVar = 0xffffffffu;

  Ref make_node(std::uint32_t var, Ref low, Ref high) {
    if (low == high) return low;
    std::uint64_t key = unique_key(var, low, high);
    auto it = unique_.find(key);
    if (it != unique_.end()) return it->second;
    nodes_.push_back({var, low, high});
    Ref r = static_cast<Ref>(nodes_.size() - 1);
    unique_.emplace(key, r);
    return r;
  }

  static std::uint64_t unique_key(std::uint32_t var, Ref low, Ref high) {
    std::uint64_t h = var;
    h = h * 0x9e3779b97f4a7c15ULL + low;
    h = h * 0x9e3779b97f4a7c15ULL + high;
    return h;
  }

  Ref apply(bool is_and, Ref f, Ref g) {
    if (f == g) return f;
    if (is_and) {
      if (f == kZero || g == kZero) return kZero;
      if (f == kOne) return g;
      if (g == kOne) return f;
    } else {
      if (f == kOne || g == kOne) return kOne;
      if (f == kZero) return g;
      if (g == kZero) return f;
    }
    if (f > g) std::swap(f, g);  // both operations are commutative
    std::uint64_t key = (std::uint64_t{f} << 32) | g;
    auto& memo = is_and ? and_memo_ : or_memo_;
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    std::uint32_t vf = nodes_[f].var, vg = nodes_[g].var;
    std::uint32_t v = vf < vg ? vf : vg;
    Ref f0 = vf == v ? nodes_[f].low : f;
    Ref f1 = vf == v ? nodes_[f].high : f;
    Ref g0 = vg == v ? nodes_[g].low : g;
    Ref g1 = vg == v ? nodes_[g].high : g;
    Ref r = make_node(v, apply(is_and, f0, g0), apply(is_and, f1, g1));
    memo.emplace(key, r);
    return r;
  }

  Ref restrict_rec(Ref f, std::uint32_t position, bool value,
                   std::unordered_map<Ref, Ref>& memo) {
    if (is_terminal(f) || nodes_[f].var > position) return f;
    if (nodes_[f].var == position)
      return value ? nodes_[f].high : nodes_[f].low;
    auto it = memo.find(f);
    if (it != memo.end()) return it->second;
    Ref r = make_node(nodes_[f].var,
                      restrict_rec(nodes_[f].low, position, value, memo),
                      restrict_rec(nodes_[f].high, position, value, memo));
    memo.emplace(f, r);
    return r;
  }

  double count_paths_rec(Ref f, bool to_one,
                         std::unordered_map<Ref, double>& memo) const {
    if (f == kZero) return to_one ? 0.0 : 1.0;
    if (f == kOne) return to_one ? 1.0 : 0.0;
    auto it = memo.find(f);
    if (it != memo.end()) return it->second;
    double n = count_paths_rec(nodes_[f].low, to_one, memo) +
               count_paths_rec(nodes_[f].high, to_one, memo);
    memo.emplace(f, n);
    return n;
  }

  void collect_paths(Ref f, bool to_one, std::vector<PathLiteral>& prefix,
                     std::vector<FailurePath>& out) const {
    if (is_terminal(f)) {
      if ((f == kOne) == to_one) out.push_back({prefix});
      return;
    }
    const Node& n = nodes_[f];
    prefix.push_back({n.var, true});
    collect_paths(n.high, to_one, prefix, out);
    prefix.back().occurred = false;
    collect_paths(n.low, to_one, prefix, out);
    prefix.pop_back();
  }

  std::vector<std::string> ordering_;
  std::unordered_map<std::string, std::size_t> position_of_;
  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, Ref> unique_;
  std::unordered_map<std::uint64_t, Ref> and_memo_;
  std::unordered_map<std::uint64_t, Ref> or_memo_;
  std::unordered_map<Ref, Ref> negate_memo_;
  Ref root_ = kZero;
};

/// Converts a fault tree to its BDD under the given variable ordering
/// (default: the tree's depth-first left-to-right order of first appearance).
/// The ordering must cover exactly the tree's basic events.
inline Bdd build_bdd(const FaultTree& ft,
                     std::vector<std::string> ordering = {}) {
  if (ordering.empty()) ordering = ft.basic_events;
  if (ordering.size() != ft.basic_events.size())
    throw ValidationError("variable ordering mismatch for fault tree '" +
                          ft.root + "': expected " +
                          std::to_string(ft.basic_events.size()) + " events");
  Bdd bdd(std::move(ordering));
  for (const auto& e : ft.basic_events)
    if (!bdd.contains(e))
      throw ValidationError("variable ordering mismatch: event '" + e +
                            "' missing from ordering");

  std::unordered_map<std::string, Bdd::Ref> gate_memo;
  // Iterative-friendly scale is not needed here; gate graphs are shallow.
  auto build = [&](auto&& self, const std::string& id) -> Bdd::Ref {
    const Gate* g = ft.find_gate(id);
    if (!g) return bdd.variable(bdd.position_of(id));
    auto it = gate_memo.find(id);
    if (it != gate_memo.end()) return it->second;
    bool is_and = g->kind == GateKind::kAnd;
    Bdd::Ref acc = is_and ? Bdd::kOne : Bdd::kZero;
    for (const auto& child : g->children) {
      Bdd::Ref c = self(self, child);
      acc = is_and ? bdd.conjoin(acc, c) : bdd.disjoin(acc, c);
    }
    gate_memo.emplace(id, acc);
    return acc;
  };
  bdd.set_root(build(build, ft.root));
  return bdd;
}

}  // namespace deptree
