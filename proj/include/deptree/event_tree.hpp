#pragma once

#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "deptree/bdd.hpp"
#include "deptree/errors.hpp"
#include "deptree/joint_table.hpp"
#include "deptree/model.hpp"
#include "deptree/quantify.hpp"

namespace deptree {

/// q(TOP | source state) over all 2^m states of the instantiated dependency
/// sources (source 0 = most significant bit, bit 1 = occurred). States with
/// zero probability are flagged undefined rather than failed.
struct ConditionalVector {
  std::string top;
  std::vector<std::string> sources;
  std::vector<double> entries;
  std::vector<bool> defined;

  std::size_t state_count() const { return entries.size(); }
};

/// All four joint outcomes of two top events recombined over the shared
/// sources by the law of total probability; they sum to 1.
struct JointOutcomes {
  double both = 0.0;     // q(A, B)
  double only_a = 0.0;   // q(A, ~B)
  double only_b = 0.0;   // q(~A, B)
  double neither = 0.0;  // q(~A, ~B)
};

inline std::vector<Literal> source_state_literals(
    const std::vector<std::string>& sources, std::size_t state) {
  std::vector<Literal> literals;
  const std::size_t m = sources.size();
  literals.reserve(m);
  for (std::size_t i = 0; i < m; ++i)
    literals.push_back({sources[i], ((state >> (m - 1 - i)) & 1) != 0});
  return literals;
}

/// Conditional top-event probabilities with the sources instantiated state by
/// state. Sources absent from the tree condition nothing, so their entries
/// simply repeat Q(TOP).
inline ConditionalVector conditional_vector(const Bdd& bdd,
                                            const std::vector<std::string>& sources,
                                            const QuantContext& ctx,
                                            std::size_t path_cap = 1000000) {
  ConditionalVector out;
  out.sources = sources;
  const std::size_t n = std::size_t{1} << sources.size();
  out.entries.assign(n, 0.0);
  out.defined.assign(n, true);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<Literal> literals = source_state_literals(sources, s);
    double qs = sources.empty() ? 1.0 : probability_of_literals(literals, ctx);
    if (qs <= 0.0) {
      out.defined[s] = false;
      continue;
    }
    out.entries[s] = sources.empty()
                         ? top_probability(bdd, ctx, path_cap)
                         : conditional_given(bdd, literals, ctx, path_cap);
  }
  return out;
}

/// Joint probability table over the source events themselves, assembled from
/// the group tables (marginalized to the sources) and independent marginals.
inline JointTable source_state_table(const std::vector<std::string>& sources,
                                     const QuantContext& ctx,
                                     const std::string& id = "sources") {
  const std::size_t n = std::size_t{1} << sources.size();
  std::vector<double> probs(n, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    probs[s] = probability_of_literals(source_state_literals(sources, s), ctx);
  return JointTable(id, sources, std::move(probs));
}

/// q(A,B) = sum_s q(A|s) q(B|s) q(s) and the three complement combinations
/// (complement vectors are 1 - entries). Given the instantiated sources the
/// two conditional top events are independent, which is what makes the
/// element-wise product valid.
inline JointOutcomes joint_top_events(const ConditionalVector& a,
                                      const ConditionalVector& b,
                                      const JointTable& source_table) {
  if (a.sources != b.sources || source_table.members() != a.sources)
    throw ValidationError(
        "joint_top_events: mismatched source sets or ordering");
  if (a.state_count() != source_table.state_count())
    throw ValidationError("joint_top_events: state count mismatch");
  JointOutcomes out;
  for (std::size_t s = 0; s < a.state_count(); ++s) {
    double qs = source_table.prob(s);
    if (qs <= 0.0) continue;  // undefined entries carry no mass
    double qa = a.entries[s], qb = b.entries[s];
    out.both += qs * qa * qb;
    out.only_a += qs * qa * (1.0 - qb);
    out.only_b += qs * (1.0 - qa) * qb;
    out.neither += qs * (1.0 - qa) * (1.0 - qb);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Event-tree quantification
// ---------------------------------------------------------------------------

struct LossFrequency {
  std::string loss;
  double frequency = 0.0;  // per hour
};

struct EventTreeResult {
  std::string event_tree;
  double initiating_frequency = 0.0;
  std::vector<LossFrequency> losses;  // in first-appearance order
  double total = 0.0;                 // sum over losses; conservation check
  std::vector<ConditionalVector> vectors;  // one per fault-tree branch point
  std::vector<double> source_probs;        // q(s) per source state
};

/// Quantifies the event tree: per consequence path, frequency = W(T0) times
/// the product over branch outcomes, with fault trees coupled through the
/// declared shared sources priced by conditional vectors and recombined with
/// the source-state probabilities.
inline EventTreeResult quantify_event_tree(
    const SystemModel& model, const EventTree& et,
    const std::unordered_map<std::string, const Bdd*>& branch_bdds,
    const QuantContext& ctx, std::size_t path_cap = 1000000) {
  EventTreeResult result;
  result.event_tree = et.id;
  result.initiating_frequency = et.initiating_event.frequency;

  const std::vector<std::string>& sources = et.shared_sources;
  const std::size_t n_states = std::size_t{1} << sources.size();

  // Conditional vector per fault-tree branch point; fixed-probability branch
  // events are priced per state below.
  std::unordered_map<std::string, ConditionalVector> vectors;
  for (const auto& bp : et.branch_points) {
    if (!model.find_fault_tree(bp.top)) continue;
    if (vectors.count(bp.top)) continue;
    auto it = branch_bdds.find(bp.top);
    if (it == branch_bdds.end())
      throw AnalysisError("no BDD supplied for branch fault tree '" + bp.top +
                          "'");
    ConditionalVector v = conditional_vector(*it->second, sources, ctx, path_cap);
    v.top = bp.top;
    vectors.emplace(bp.top, std::move(v));
  }

  std::vector<double> source_probs(n_states, 0.0);
  for (std::size_t s = 0; s < n_states; ++s)
    source_probs[s] = sources.empty()
                          ? 1.0
                          : probability_of_literals(
                                source_state_literals(sources, s), ctx);

  std::map<std::string, double> accumulated;
  std::vector<std::string> loss_order;
  for (const auto& c : et.consequences)
    if (!accumulated.count(c.loss)) {
      accumulated[c.loss] = 0.0;
      loss_order.push_back(c.loss);
    }

  for (std::size_t s = 0; s < n_states; ++s) {
    double qs = source_probs[s];
    if (qs <= 0.0) continue;
    std::vector<Literal> state_literals = source_state_literals(sources, s);
    for (const auto& c : et.consequences) {
      double p = 1.0;
      for (std::size_t i = 0; i < c.path.size() && p > 0.0; ++i) {
        bool failed = c.path[i] == 'F';
        const std::string& top = et.branch_points[i].top;
        auto vit = vectors.find(top);
        if (vit != vectors.end()) {
          double q = vit->second.entries[s];
          p *= failed ? q : 1.0 - q;
        } else {
          // Fixed-probability branch event, conditioned on the source state
          // (covers branch events that are sources or share their group).
          std::vector<Literal> with = state_literals;
          with.push_back({top, true});
          double q = probability_of_literals(with, ctx) / qs;
          p *= failed ? q : 1.0 - q;
        }
      }
      accumulated[c.loss] += et.initiating_event.frequency * qs * p;
    }
  }

  for (const auto& loss : loss_order) {
    result.losses.push_back({loss, accumulated[loss]});
    result.total += accumulated[loss];
  }
  for (const auto& bp : et.branch_points) {
    auto it = vectors.find(bp.top);
    if (it != vectors.end()) {
      result.vectors.push_back(it->second);
      vectors.erase(it);
    }
  }
  result.source_probs = std::move(source_probs);
  return result;
}

}  // namespace deptree
