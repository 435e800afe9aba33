#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "deptree/bdd.hpp"
#include "deptree/errors.hpp"
#include "deptree/joint_table.hpp"

namespace deptree {

/// An event together with its asserted state.
struct Literal {
  std::string event;
  bool occurred = true;
};

/// Everything needed to price a combination of event states: marginal
/// probabilities for independent (DG0) events, joint tables for dependency
/// groups, and optional per-event failure intensities for frequency work.
class QuantContext {
 public:
  void set_marginal(const std::string& event, double q) {
    marginals_[event] = q;
  }
  void set_intensity(const std::string& event, double w) {
    intensities_[event] = w;
  }
  void add_group(JointTable table) {
    std::size_t idx = groups_.size();
    for (std::size_t m = 0; m < table.member_count(); ++m) {
      const std::string& event = table.members()[m];
      if (!membership_.emplace(event, std::make_pair(idx, m)).second)
        throw ValidationError("event '" + event +
                              "' appears in more than one group table");
    }
    groups_.push_back(std::move(table));
  }

  bool is_grouped(const std::string& event) const {
    return membership_.count(event) != 0;
  }
  const std::vector<JointTable>& groups() const { return groups_; }
  const JointTable& group(std::size_t idx) const { return groups_[idx]; }

  /// (group index, member index) for a grouped event.
  std::pair<std::size_t, std::size_t> membership(const std::string& event) const {
    return membership_.at(event);
  }

  double marginal(const std::string& event) const {
    auto it = marginals_.find(event);
    if (it == marginals_.end())
      throw AnalysisError("missing marginal probability for event '" + event +
                          "'");
    return it->second;
  }

  std::optional<double> intensity(const std::string& event) const {
    auto it = intensities_.find(event);
    if (it == intensities_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::unordered_map<std::string, double> marginals_;
  std::unordered_map<std::string, double> intensities_;
  std::vector<JointTable> groups_;
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>>
      membership_;
};

namespace detail {

/// Accumulates a set of literals into per-group partial states plus an
/// independent-event product. The joint factors are looked up once the set is
/// complete ("manipulation through marginalization" happens there).
class LiteralBundle {
 public:
  explicit LiteralBundle(const QuantContext& ctx) : ctx_(&ctx) {}

  /// Returns false when the literal contradicts one already present
  /// (the combination is impossible).
  bool add(const std::string& event, bool occurred) {
    auto [it, fresh] = assigned_.emplace(event, occurred);
    if (!fresh) return it->second == occurred;
    if (ctx_->is_grouped(event)) {
      auto [g, m] = ctx_->membership(event);
      auto& state = group_states_[g];
      std::uint32_t bit = ctx_->group(g).member_bit(m);
      state.first |= bit;
      if (occurred) state.second |= bit;
    } else {
      double q = ctx_->marginal(event);
      independent_ *= occurred ? q : 1.0 - q;
    }
    return true;
  }

  double probability() const {
    double p = independent_;
    for (const auto& [g, state] : group_states_)
      p *= ctx_->group(g).marginal_prob(state.first, state.second);
    return p;
  }

 private:
  const QuantContext* ctx_;
  std::unordered_map<std::string, bool> assigned_;
  double independent_ = 1.0;
  // group index -> (constrained mask, state bits), ordered for determinism
  std::map<std::size_t, std::pair<std::uint32_t, std::uint32_t>> group_states_;
};

inline LiteralBundle bundle_literals(const std::vector<Literal>& literals,
                                     const QuantContext& ctx) {
  LiteralBundle b(ctx);
  for (const auto& lit : literals)
    if (!b.add(lit.event, lit.occurred))
      throw AnalysisError("contradictory literals on event '" + lit.event +
                          "'");
  return b;
}

}  // namespace detail

/// Probability of a conjunction of literals: independent events multiply,
/// dependency-group members are looked up jointly (marginalized over the
/// group members not mentioned).
inline double probability_of_literals(const std::vector<Literal>& literals,
                                      const QuantContext& ctx) {
  return detail::bundle_literals(literals, ctx).probability();
}

/// Probability of one BDD path, factored by dependency group.
inline double path_probability(const Bdd& bdd, const FailurePath& path,
                               const QuantContext& ctx) {
  detail::LiteralBundle b(ctx);
  for (const auto& lit : path.literals)
    if (!b.add(bdd.event_at(lit.position), lit.occurred))
      throw AnalysisError("inconsistent path literals");
  return b.probability();
}

/// Sum of path probabilities over all root-to-1 paths: Q(TOP).
inline double top_probability(const Bdd& bdd, Bdd::Ref root,
                              const QuantContext& ctx,
                              std::size_t path_cap = 1000000) {
  double total = 0.0;
  for (const auto& path : bdd.enumerate_paths(root, true, path_cap))
    total += path_probability(bdd, path, ctx);
  return total;
}

inline double top_probability(const Bdd& bdd, const QuantContext& ctx,
                              std::size_t path_cap = 1000000) {
  return top_probability(bdd, bdd.root(), ctx, path_cap);
}

/// Q(TOP and literals): failure paths carrying a complement of any given
/// literal drop out; every surviving path is priced together with the given
/// literals, so paths silent on a literal pick up its probability conditional
/// on the path's own group context.
inline double joint_with(const Bdd& bdd, const std::vector<Literal>& literals,
                         const QuantContext& ctx,
                         std::size_t path_cap = 1000000) {
  detail::LiteralBundle base = detail::bundle_literals(literals, ctx);
  double total = 0.0;
  for (const auto& path : bdd.enumerate_paths(bdd.root(), true, path_cap)) {
    detail::LiteralBundle merged = base;
    bool compatible = true;
    for (const auto& lit : path.literals)
      if (!merged.add(bdd.event_at(lit.position), lit.occurred)) {
        compatible = false;
        break;
      }
    if (compatible) total += merged.probability();
  }
  return total;
}

/// Q(TOP | literals) = Q(TOP and literals) / q(literals).
inline double conditional_given(const Bdd& bdd,
                                const std::vector<Literal>& literals,
                                const QuantContext& ctx,
                                std::size_t path_cap = 1000000) {
  double denom = probability_of_literals(literals, ctx);
  if (denom <= 0.0)
    throw AnalysisError("conditioning on zero-probability literals");
  return joint_with(bdd, literals, ctx, path_cap) / denom;
}

// ---------------------------------------------------------------------------
// Path factorization for reports
// ---------------------------------------------------------------------------

struct GroupFactor {
  std::string group;
  std::vector<Literal> literals;  // in group member order
  double probability;
};

struct PathFactorization {
  std::vector<Literal> independent;  // the DG0 column
  double independent_probability;
  std::vector<GroupFactor> groups;
  double probability;
};

inline PathFactorization factorize_path(const Bdd& bdd, const FailurePath& path,
                                        const QuantContext& ctx) {
  PathFactorization out;
  out.independent_probability = 1.0;
  std::map<std::size_t, std::map<std::size_t, bool>> group_literals;
  for (const auto& lit : path.literals) {
    const std::string& event = bdd.event_at(lit.position);
    if (ctx.is_grouped(event)) {
      auto [g, m] = ctx.membership(event);
      group_literals[g][m] = lit.occurred;
    } else {
      double q = ctx.marginal(event);
      out.independent.push_back({event, lit.occurred});
      out.independent_probability *= lit.occurred ? q : 1.0 - q;
    }
  }
  out.probability = out.independent_probability;
  for (const auto& [g, members] : group_literals) {
    const JointTable& table = ctx.group(g);
    GroupFactor factor;
    factor.group = table.group();
    std::uint32_t mask = 0, bits = 0;
    for (const auto& [m, occurred] : members) {
      factor.literals.push_back({table.members()[m], occurred});
      mask |= table.member_bit(m);
      if (occurred) bits |= table.member_bit(m);
    }
    factor.probability = table.marginal_prob(mask, bits);
    out.probability *= factor.probability;
    out.groups.push_back(std::move(factor));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Top event frequency
// ---------------------------------------------------------------------------

namespace detail {

inline void collect_support(const Bdd& bdd, Bdd::Ref f,
                            std::unordered_set<Bdd::Ref>& seen,
                            std::vector<bool>& support) {
  if (bdd.is_terminal(f) || !seen.insert(f).second) return;
  support[bdd.var_of(f)] = true;
  collect_support(bdd, bdd.low(f), seen, support);
  collect_support(bdd, bdd.high(f), seen, support);
}

}  // namespace detail

/// Unconditional top-event failure intensity W(TOP), per hour.
///
/// Independent events contribute the standard criticality formula
/// Birnbaum_j * w_j with Birnbaum_j = Q(TOP|X_j=1) - Q(TOP|X_j=0). A
/// dependency group contributes through its state-entry frequencies: each
/// state v adds freq(v) * P(rest of system makes v the unique triggering
/// state). That decomposition is exact precisely when, for every state of the
/// rest of the system, the group states that turn the top event on are either
/// none, exactly one, or all of them; anything else would require the group's
/// state-to-state transition structure, which entry frequencies do not carry,
/// and is rejected.
inline double top_frequency(Bdd& bdd, const QuantContext& ctx,
                            std::size_t path_cap = 1000000) {
  Bdd::Ref root = bdd.root();
  std::vector<bool> support(bdd.variable_count(), false);
  {
    std::unordered_set<Bdd::Ref> seen;
    detail::collect_support(bdd, root, seen, support);
  }

  double frequency = 0.0;
  std::unordered_set<std::size_t> groups_in_support;
  for (std::size_t pos = 0; pos < bdd.variable_count(); ++pos) {
    if (!support[pos]) continue;
    const std::string& event = bdd.event_at(pos);
    if (ctx.is_grouped(event)) {
      groups_in_support.insert(ctx.membership(event).first);
      continue;
    }
    auto w = ctx.intensity(event);
    if (!w)
      throw AnalysisError("frequency requires a failure intensity for event '" +
                          event + "' (constant-rate model needed)");
    double q1 = top_probability(bdd, bdd.restrict(root, pos, true), ctx, path_cap);
    double q0 = top_probability(bdd, bdd.restrict(root, pos, false), ctx, path_cap);
    frequency += (q1 - q0) * *w;
  }

  std::vector<std::size_t> group_order(groups_in_support.begin(),
                                       groups_in_support.end());
  std::sort(group_order.begin(), group_order.end());
  for (std::size_t g : group_order) {
    const JointTable& table = ctx.group(g);
    if (!table.has_freqs())
      throw AnalysisError("unsupported: group frequency source required for "
                          "group '" + table.group() +
                          "' (no state-entry frequencies)");
    const std::size_t k = table.member_count();
    if (k > 10)
      throw AnalysisError("group '" + table.group() +
                          "' too large for frequency analysis");
    std::vector<std::size_t> positions(k);
    for (std::size_t m = 0; m < k; ++m) {
      const std::string& member = table.members()[m];
      if (!bdd.contains(member) || !support[bdd.position_of(member)])
        throw AnalysisError(
            "group member '" + member + "' of '" + table.group() +
            "' does not appear in the fault tree; group-level frequency is "
            "undefined (marginalize the dependency model first)");
      positions[m] = bdd.position_of(member);
    }
    const std::size_t n = table.state_count();
    std::vector<Bdd::Ref> restricted(n);
    for (std::size_t v = 0; v < n; ++v) {
      Bdd::Ref f = root;
      for (std::size_t m = 0; m < k; ++m)
        f = bdd.restrict(f, positions[m], (table.member_bit(m) & v) != 0);
      restricted[v] = f;
    }
    Bdd::Ref all = Bdd::kOne;
    for (Bdd::Ref f : restricted) all = bdd.conjoin(all, f);
    Bdd::Ref not_all = bdd.negate(all);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t u = v + 1; u < n; ++u) {
        Bdd::Ref overlap =
            bdd.conjoin(bdd.conjoin(restricted[v], restricted[u]), not_all);
        if (overlap != Bdd::kZero)
          throw AnalysisError(
              "group '" + table.group() +
              "' does not uniquely trigger the top event; its frequency "
              "contribution cannot be derived from state-entry frequencies");
      }
    const auto& freqs = table.freqs();
    for (std::size_t v = 0; v < n; ++v) {
      if (freqs[v] == 0.0) continue;
      Bdd::Ref others = Bdd::kZero;
      for (std::size_t u = 0; u < n; ++u)
        if (u != v) others = bdd.disjoin(others, restricted[u]);
      Bdd::Ref unique = bdd.conjoin(restricted[v], bdd.negate(others));
      frequency += freqs[v] * top_probability(bdd, unique, ctx, path_cap);
    }
  }
  return frequency;
}

}  // namespace deptree
