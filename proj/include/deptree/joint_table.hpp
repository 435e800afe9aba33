#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "deptree/errors.hpp"

namespace deptree {

/// Joint probability (and optionally state-entry frequency) table over all
/// 2^k state combinations of a dependency group's events.
///
/// Storage contract: probs[] is in binary counting order with member 0 as the
/// most significant bit and bit value 1 meaning "event occurred". For members
/// [A, B] the array order is q(~A,~B), q(~A,B), q(A,~B), q(A,B).
class JointTable {
 public:
  static constexpr std::size_t kMaxMembers = 20;
  static constexpr double kSumTolerance = 1e-9;

  JointTable(std::string group, std::vector<std::string> members,
             std::vector<double> probs,
             std::optional<std::vector<double>> freqs = std::nullopt)
      : group_(std::move(group)),
        members_(std::move(members)),
        probs_(std::move(probs)),
        freqs_(std::move(freqs)) {
    if (members_.empty())
      throw ValidationError("joint table '" + group_ + "': no members");
    if (members_.size() > kMaxMembers)
      throw ValidationError("joint table '" + group_ + "': " +
                            std::to_string(members_.size()) +
                            " members exceeds the cap of " +
                            std::to_string(kMaxMembers));
    const std::size_t n = std::size_t{1} << members_.size();
    if (probs_.size() != n)
      throw ValidationError("joint table '" + group_ + "': expected " +
                            std::to_string(n) + " probabilities, got " +
                            std::to_string(probs_.size()));
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0 && p <= 1.0))
        throw ValidationError("joint table '" + group_ +
                              "': probability outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance)
      throw ValidationError("joint table '" + group_ +
                            "': probabilities sum to " + std::to_string(sum));
    // Noisy (e.g. Monte Carlo sourced) tables within tolerance are
    // renormalized; frequencies are left untouched.
    if (sum != 1.0 && sum > 0.0)
      for (double& p : probs_) p /= sum;
    if (freqs_) {
      if (freqs_->size() != n)
        throw ValidationError("joint table '" + group_ +
                              "': frequency array size mismatch");
      for (double w : *freqs_)
        if (!(w >= 0.0))
          throw ValidationError("joint table '" + group_ +
                                "': negative state-entry frequency");
    }
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (!index_of_.emplace(members_[i], i).second)
        throw ValidationError("joint table '" + group_ +
                              "': duplicate member '" + members_[i] + "'");
    }
  }

  /// Product-form table from per-event marginal probabilities (the
  /// independence baseline).
  static JointTable from_marginals(std::string group,
                                   std::vector<std::string> members,
                                   const std::vector<double>& marginals) {
    if (members.size() != marginals.size())
      throw ValidationError("from_marginals: member/probability count mismatch");
    for (double q : marginals)
      if (!(q >= 0.0 && q <= 1.0))
        throw ValidationError("from_marginals: probability outside [0,1]");
    const std::size_t k = members.size();
    std::vector<double> probs(std::size_t{1} << k, 1.0);
    for (std::size_t idx = 0; idx < probs.size(); ++idx)
      for (std::size_t i = 0; i < k; ++i)
        probs[idx] *= bit_of(idx, i, k) ? marginals[i] : 1.0 - marginals[i];
    return JointTable(std::move(group), std::move(members), std::move(probs));
  }

  const std::string& group() const { return group_; }
  const std::vector<std::string>& members() const { return members_; }
  std::size_t member_count() const { return members_.size(); }
  std::size_t state_count() const { return probs_.size(); }
  const std::vector<double>& probs() const { return probs_; }
  bool has_freqs() const { return freqs_.has_value(); }
  const std::vector<double>& freqs() const {
    if (!freqs_)
      throw AnalysisError("joint table '" + group_ +
                          "': no state-entry frequencies available");
    return *freqs_;
  }

  std::size_t member_index(const std::string& id) const {
    auto it = index_of_.find(id);
    if (it == index_of_.end())
      throw ValidationError("joint table '" + group_ + "': unknown member '" +
                            id + "'");
    return it->second;
  }
  bool has_member(const std::string& id) const {
    return index_of_.count(id) != 0;
  }

  /// Bit mask (in state-index space) of the given member.
  std::uint32_t member_bit(std::size_t member) const {
    return std::uint32_t{1} << (members_.size() - 1 - member);
  }

  double prob(std::size_t state_index) const { return probs_.at(state_index); }

  /// Marginal probability of a partial state: members selected by
  /// `constrained_mask` (state-index bit space) fixed at `state_bits`,
  /// remaining members summed out.
  double marginal_prob(std::uint32_t constrained_mask,
                       std::uint32_t state_bits) const {
    const std::uint32_t free_mask =
        static_cast<std::uint32_t>(probs_.size() - 1) & ~constrained_mask;
    double sum = 0.0;
    // Enumerate submasks of free_mask (plus the empty one).
    std::uint32_t sub = free_mask;
    for (;;) {
      sum += probs_[state_bits | sub];
      if (sub == 0) break;
      sub = (sub - 1) & free_mask;
    }
    return sum;
  }

  /// Same, for state-entry frequencies (summed, never renormalized).
  double marginal_freq(std::uint32_t constrained_mask,
                       std::uint32_t state_bits) const {
    const auto& w = freqs();
    const std::uint32_t free_mask =
        static_cast<std::uint32_t>(probs_.size() - 1) & ~constrained_mask;
    double sum = 0.0;
    std::uint32_t sub = free_mask;
    for (;;) {
      sum += w[state_bits | sub];
      if (sub == 0) break;
      sub = (sub - 1) & free_mask;
    }
    return sum;
  }

  /// Table over `keep` with all other members summed out. The result's member
  /// order follows `keep`.
  JointTable marginalize(const std::vector<std::string>& keep) const {
    if (keep.empty())
      throw ValidationError("marginalize: empty member subset");
    std::vector<std::size_t> positions = resolve(keep);
    const std::size_t m = keep.size();
    std::vector<double> probs(std::size_t{1} << m, 0.0);
    std::vector<double> freqs(freqs_ ? probs.size() : 0, 0.0);
    for (std::size_t idx = 0; idx < probs_.size(); ++idx) {
      std::size_t out = project(idx, positions);
      probs[out] += probs_[idx];
      if (freqs_) freqs[out] += (*freqs_)[idx];
    }
    std::optional<std::vector<double>> f;
    if (freqs_) f = std::move(freqs);
    return JointTable(group_, keep, std::move(probs), std::move(f));
  }

  /// Conditional table over the remaining members given the evidence
  /// (member id, occurred) pairs. State-entry frequencies do not survive
  /// conditioning and are dropped.
  JointTable condition(
      const std::vector<std::pair<std::string, bool>>& evidence) const {
    if (evidence.empty())
      throw ValidationError("condition: empty evidence");
    std::uint32_t ev_mask = 0, ev_bits = 0;
    for (const auto& [id, occurred] : evidence) {
      std::uint32_t bit = member_bit(member_index(id));
      if (ev_mask & bit)
        throw ValidationError("condition: duplicate evidence for '" + id + "'");
      ev_mask |= bit;
      if (occurred) ev_bits |= bit;
    }
    double denom = marginal_prob(ev_mask, ev_bits);
    if (denom <= 0.0)
      throw AnalysisError("conditioning on null event (evidence probability 0)");
    std::vector<std::string> remaining;
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < members_.size(); ++i)
      if (!(ev_mask & member_bit(i))) {
        remaining.push_back(members_[i]);
        positions.push_back(i);
      }
    if (remaining.empty())
      throw ValidationError("condition: evidence covers every member");
    std::vector<double> probs(std::size_t{1} << remaining.size(), 0.0);
    for (std::size_t idx = 0; idx < probs_.size(); ++idx) {
      if ((idx & ev_mask) != ev_bits) continue;
      probs[project(idx, positions)] += probs_[idx] / denom;
    }
    return JointTable(group_, std::move(remaining), std::move(probs));
  }

  /// Largest deviation |q(a,b) - q(a)q(b)| over the four joint states of the
  /// pair; 0 iff the two members are pairwise independent.
  double independence_gap(const std::string& a, const std::string& b) const {
    if (a == b) throw ValidationError("independence_gap: identical members");
    JointTable pair = marginalize({a, b});
    double qa = pair.probs_[2] + pair.probs_[3];  // a occurred
    double qb = pair.probs_[1] + pair.probs_[3];  // b occurred
    double gap = 0.0;
    for (std::size_t idx = 0; idx < 4; ++idx) {
      double pa = (idx & 2) ? qa : 1.0 - qa;
      double pb = (idx & 1) ? qb : 1.0 - qb;
      gap = std::max(gap, std::abs(pair.probs_[idx] - pa * pb));
    }
    return gap;
  }

  /// Per source state: does instantiating the source make a and c
  /// conditionally independent (within tol)? Indexed by the source bit value;
  /// a zero-probability source state is reported as nullopt ("undefined"),
  /// not false.
  std::array<std::optional<bool>, 2> check_d_separation(
      const std::string& source, const std::string& a, const std::string& c,
      double tol) const {
    if (source == a || source == c || a == c)
      throw ValidationError("check_d_separation: members must be distinct");
    JointTable t = marginalize({source, a, c});
    std::array<std::optional<bool>, 2> result;
    for (std::uint32_t s = 0; s < 2; ++s) {
      double qs = t.marginal_prob(4, s << 2);
      if (qs <= 0.0) {
        result[s] = std::nullopt;
        continue;
      }
      double qa = t.marginal_prob(6, (s << 2) | 2) / qs;
      double qc = t.marginal_prob(5, (s << 2) | 1) / qs;
      bool ok = true;
      for (std::uint32_t ac = 0; ac < 4; ++ac) {
        double joint = t.probs_[(s << 2) | ac] / qs;
        double pa = (ac & 2) ? qa : 1.0 - qa;
        double pc = (ac & 1) ? qc : 1.0 - qc;
        if (std::abs(joint - pa * pc) > tol) ok = false;
      }
      result[s] = ok;
    }
    return result;
  }

 private:
  static bool bit_of(std::size_t index, std::size_t member, std::size_t k) {
    return (index >> (k - 1 - member)) & 1;
  }

  std::vector<std::size_t> resolve(const std::vector<std::string>& ids) const {
    std::vector<std::size_t> positions;
    positions.reserve(ids.size());
    for (const auto& id : ids) positions.push_back(member_index(id));
    for (std::size_t i = 0; i < positions.size(); ++i)
      for (std::size_t j = i + 1; j < positions.size(); ++j)
        if (positions[i] == positions[j])
          throw ValidationError("duplicate member '" + ids[i] + "' in subset");
    return positions;
  }

  /// Maps a full state index onto the reduced index over the members at
  /// `positions` (result bit order follows `positions`).
  std::size_t project(std::size_t idx,
                      const std::vector<std::size_t>& positions) const {
    std::size_t out = 0;
    const std::size_t m = positions.size();
    for (std::size_t i = 0; i < m; ++i)
      if (bit_of(idx, positions[i], members_.size()))
        out |= std::size_t{1} << (m - 1 - i);
    return out;
  }

  std::string group_;
  std::vector<std::string> members_;
  std::vector<double> probs_;
  std::optional<std::vector<double>> freqs_;
  std::unordered_map<std::string, std::size_t> index_of_;
};

}  // namespace deptree
