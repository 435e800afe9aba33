#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "deptree/bdd.hpp"
#include "deptree/errors.hpp"
#include "deptree/marginals.hpp"
#include "deptree/model.hpp"
#include "deptree/petri.hpp"
#include "deptree/quantify.hpp"
#include "deptree/sources.hpp"

namespace deptree {

/// Q(E, t_i) and W(E, t_i) of a sub-tree top event over the mission grid.
struct TimeSeriesMetrics {
  std::vector<double> times;
  std::vector<double> unavailability;  // Q(E, t_i)
  std::vector<double> intensity;       // W(E, t_i), per hour; empty if skipped
};

/// Conditional failure and repair rates derived from (Q, W). The repair rate
/// is undefined wherever Q = 0; that is tolerated at t_0 only, so the repair
/// vector carries its own time axis.
struct RateVectors {
  std::vector<double> times;
  std::vector<double> failure_rate;  // lambda(t_i) = W / (1 - Q)
  std::vector<double> repair_times;
  std::vector<double> repair_rate;   // nu(t_i) = W / Q
};

/// Quantifies a self-contained sub-tree model over the grid: Q via BDD path
/// quantification, W via the criticality formula (or the group-frequency
/// route when the sub-tree carries internal dependency groups).
inline TimeSeriesMetrics subtree_metrics(
    const SystemModel& sub, const std::vector<double>& grid,
    bool with_frequency = true,
    const std::optional<SimulationSettings>& sim = std::nullopt) {
  if (sub.fault_trees.size() != 1)
    throw ValidationError("subtree_metrics expects a single-tree model");
  if (grid.empty()) throw ValidationError("subtree_metrics: empty time grid");
  const FaultTree& ft = sub.fault_trees.front();
  Bdd bdd = build_bdd(ft);

  std::vector<ResolvedGroup> resolved;
  for (const auto& g : sub.dependency_groups)
    resolved.push_back(resolve_group(sub, g, sim));

  TimeSeriesMetrics out;
  out.times = grid;
  for (double t : grid) {
    QuantContext ctx;
    for (const auto& id : ft.basic_events) {
      const BasicEvent* be = sub.find_basic_event(id);
      if (be->group.empty())
        ctx.set_marginal(id, unavailability_at(sub, *be, t));
      if (auto w = failure_intensity_at(sub, *be, t)) ctx.set_intensity(id, *w);
    }
    for (const auto& rg : resolved) ctx.add_group(group_table_at(rg, t));
    out.unavailability.push_back(top_probability(bdd, ctx));
    if (with_frequency) out.intensity.push_back(top_frequency(bdd, ctx));
  }
  return out;
}

/// Rate conversion: lambda(t_i) = W/(1-Q), nu(t_i) = W/Q. A zero Q is
/// accepted at t_0 only (the point is excluded from the repair vector).
inline RateVectors derive_rates(const TimeSeriesMetrics& ts) {
  if (ts.intensity.size() != ts.times.size())
    throw ValidationError("derive_rates: metrics carry no frequency vector");
  RateVectors out;
  out.times = ts.times;
  for (std::size_t i = 0; i < ts.times.size(); ++i) {
    double q = ts.unavailability[i];
    double w = ts.intensity[i];
    if (!(q < 1.0))
      throw AnalysisError("failure rate undefined at t = " +
                          std::to_string(ts.times[i]) + ": Q = 1");
    out.failure_rate.push_back(w / (1.0 - q));
    if (q > 0.0) {
      out.repair_times.push_back(ts.times[i]);
      out.repair_rate.push_back(w / q);
    } else if (i != 0) {
      throw AnalysisError("repair rate undefined at t = " +
                          std::to_string(ts.times[i]) +
                          ": Q = 0 outside the t_0 exemption");
    }
  }
  return out;
}

namespace detail {

inline bool rates_constant(const std::vector<double>& rates, double rel_tol) {
  double lo = *std::min_element(rates.begin(), rates.end());
  double hi = *std::max_element(rates.begin(), rates.end());
  if (hi == 0.0) return true;
  return (hi - lo) <= rel_tol * hi;
}

/// Support density f(t_i) = rate(t_i) * exp(-rate(t_i) * t_i) integrated by
/// trapezoid into a CDF (the printed cumulative sum has no interval width;
/// trapezoidal integration keeps the dimensions consistent), clamped to 1.
inline EmpiricalDistribution integrate_density(const std::vector<double>& times,
                                               const std::vector<double>& rates,
                                               double anchor_time,
                                               const std::string& id) {
  std::vector<double> t;
  std::vector<double> density;
  if (times.empty())
    throw ValidationError("empty rate vector for distribution '" + id + "'");
  if (anchor_time < times.front()) {
    t.push_back(anchor_time);
    density.push_back(0.0);
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    t.push_back(times[i]);
    density.push_back(rates[i] * std::exp(-rates[i] * times[i]));
  }
  EmpiricalDistribution d;
  d.id = id;
  d.times = t;
  d.cdf.assign(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i) {
    double step = 0.5 * (density[i] + density[i - 1]) * (t[i] - t[i - 1]);
    d.cdf[i] = std::min(1.0, d.cdf[i - 1] + step);
  }
  d.validate();
  return d;
}

}  // namespace detail

inline constexpr double kRateConstancyTolerance = 1e-6;

/// Failure/repair transition distributions for the reversible template:
/// exponential when the derived rates are constant along the mission
/// (relative deviation <= 1e-6), an empirical distribution over the support
/// density points otherwise. The repair CDF is anchored at R(t_0) = 0.
inline std::pair<TransitionDelay, TransitionDelay>
build_transition_distributions(const RateVectors& rates,
                               const std::string& id) {
  if (rates.times.empty())
    throw ValidationError("build_transition_distributions: empty grid");
  TransitionDelay failure;
  if (detail::rates_constant(rates.failure_rate, kRateConstancyTolerance)) {
    double sum = 0.0;
    for (double r : rates.failure_rate) sum += r;
    failure = ExponentialDelay{sum / rates.failure_rate.size()};
  } else {
    failure = detail::integrate_density(rates.times, rates.failure_rate,
                                        rates.times.front(), id + "_F");
  }
  if (rates.repair_rate.empty())
    throw AnalysisError("no repair-rate support points for '" + id +
                        "' (Q = 0 everywhere)");
  TransitionDelay repair;
  if (detail::rates_constant(rates.repair_rate, kRateConstancyTolerance)) {
    double sum = 0.0;
    for (double r : rates.repair_rate) sum += r;
    repair = ExponentialDelay{sum / rates.repair_rate.size()};
  } else {
    repair = detail::integrate_density(rates.repair_times, rates.repair_rate,
                                       rates.times.front(), id + "_R");
  }
  return {std::move(failure), std::move(repair)};
}

/// Irreversible case: the failure-time CDF equals the intermediate event
/// unavailability at every grid value, interpolated.
inline TransitionDelay irreversible_failure_distribution(
    const TimeSeriesMetrics& ts, const std::string& id) {
  EmpiricalDistribution d;
  d.id = id + "_F";
  d.times = ts.times;
  d.cdf = ts.unavailability;
  for (std::size_t i = 1; i < d.cdf.size(); ++i) {
    if (d.cdf[i] < d.cdf[i - 1] - 1e-12)
      throw AnalysisError(
          "sub-tree unavailability decreases over time; the sub-tree is not "
          "irreversible (use the reversible reduction)");
    d.cdf[i] = std::max(d.cdf[i], d.cdf[i - 1]);
  }
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Intermediate-event reduction
// ---------------------------------------------------------------------------

/// Declarative coupling between template sub-nets, keyed by the template
/// place/transition names (`<gate>_up`, `<gate>_dn`, `<gate>_F`, `<gate>_R`).
struct CouplingArc {
  enum class Kind { kEnable, kInhibit, kReset };
  Kind kind = Kind::kEnable;
  std::string transition;
  std::string place;
  std::string to_place;  // reset arcs only
};

struct ReductionOptions {
  std::vector<CouplingArc> coupling;
  bool force_irreversible = false;
  std::string group_id;  // default: "DG_" + fault tree root
  std::string net_id;    // default: fault tree root + "_dep_net"
  std::optional<SimulationSettings> sim;  // for groups inside sub-trees
};

struct GateReduction {
  std::string gate;
  bool reversible = false;
  TimeSeriesMetrics metrics;
};

struct ReductionResult {
  SystemModel reduced;
  std::string net_id;
  std::optional<std::string> group_id;
  std::vector<GateReduction> gates;
};

namespace detail {

inline void collect_descendants(const FaultTree& ft, const std::string& id,
                                std::unordered_set<std::string>& gates,
                                std::unordered_set<std::string>& events) {
  const Gate* g = ft.find_gate(id);
  if (!g) {
    events.insert(id);
    return;
  }
  if (!gates.insert(id).second) return;
  for (const auto& c : g->children) collect_descendants(ft, c, gates, events);
}

}  // namespace detail

/// Replaces each listed gate's sub-tree by an equivalent complex basic event
/// carrying the sub-tree's unavailability series, builds the combined
/// dependency net from per-gate template nets plus the coupling arcs, and,
/// when a coupling exists, declares the new dependency group over the complex
/// events with the combined net as its source. The reduced model is ready for
/// the standard analysis pipeline.
inline ReductionResult reduce_intermediate(const SystemModel& model,
                                           const std::string& ft_root,
                                           const std::vector<std::string>& gates,
                                           ReductionOptions opts = {}) {
  const FaultTree* ft = model.find_fault_tree(ft_root);
  if (!ft) throw ValidationError("unknown fault tree '" + ft_root + "'");
  if (gates.empty()) throw ValidationError("no gates given for reduction");
  if (model.time_grid.empty())
    throw ValidationError("reduction requires a model time grid");
  const std::vector<double>& grid = model.time_grid;

  std::vector<std::unordered_set<std::string>> gate_sets(gates.size());
  std::vector<std::unordered_set<std::string>> event_sets(gates.size());
  for (std::size_t i = 0; i < gates.size(); ++i) {
    if (gates[i] == ft->root)
      throw ValidationError("cannot reduce the root gate '" + gates[i] + "'");
    if (!ft->find_gate(gates[i]))
      throw ValidationError("unknown gate '" + gates[i] + "' in fault tree '" +
                            ft_root + "'");
    detail::collect_descendants(*ft, gates[i], gate_sets[i], event_sets[i]);
  }
  for (std::size_t i = 0; i < gates.size(); ++i)
    for (std::size_t j = i + 1; j < gates.size(); ++j) {
      for (const auto& g : gate_sets[i])
        if (gate_sets[j].count(g))
          throw ValidationError("overlapping sub-trees: gate '" + g +
                                "' is shared by '" + gates[i] + "' and '" +
                                gates[j] + "'");
      for (const auto& e : event_sets[i])
        if (event_sets[j].count(e))
          throw ValidationError("overlapping sub-trees: event '" + e +
                                "' is shared by '" + gates[i] + "' and '" +
                                gates[j] + "'");
    }

  std::unordered_set<std::string> inside_gates, inside_events;
  for (std::size_t i = 0; i < gates.size(); ++i) {
    inside_gates.insert(gate_sets[i].begin(), gate_sets[i].end());
    inside_events.insert(event_sets[i].begin(), event_sets[i].end());
  }
  // An event reachable both inside and outside a reduced sub-tree would lose
  // its coupling to the rest of the tree; such models are rejected.
  {
    std::unordered_set<std::string> outside_gates, outside_events;
    outside_gates.insert(inside_gates.begin(), inside_gates.end());
    auto walk = [&](auto&& self, const std::string& id) -> void {
      const Gate* g = ft->find_gate(id);
      if (!g) {
        outside_events.insert(id);
        return;
      }
      if (std::find(gates.begin(), gates.end(), id) != gates.end()) return;
      if (!outside_gates.insert(id).second) return;
      for (const auto& c : g->children) self(self, c);
    };
    walk(walk, ft->root);
    for (const auto& e : outside_events)
      if (inside_events.count(e))
        throw ValidationError("basic event '" + e +
                              "' appears both inside and outside the reduced "
                              "sub-trees; this reduction is unsupported");
    for (const auto& other : model.fault_trees) {
      if (other.root == ft_root) continue;
      for (const auto& e : other.basic_events)
        if (inside_events.count(e))
          throw ValidationError("basic event '" + e +
                                "' inside a reduced sub-tree is also used by "
                                "fault tree '" + other.root + "'");
    }
  }

  ReductionResult result;
  result.net_id = opts.net_id.empty() ? ft_root + "_dep_net" : opts.net_id;
  StochasticPetriNet net;
  net.id = result.net_id;

  for (const auto& gate : gates) {
    SystemModel sub = model.extract_subtree(ft_root, gate);
    const FaultTree& subtree = sub.fault_trees.front();
    bool reversible = false;
    if (!opts.force_irreversible)
      for (const auto& id : subtree.basic_events) {
        const auto* be = sub.find_basic_event(id);
        if (const auto* r = std::get_if<ConstantRates>(&be->model))
          if (r->nu > 0.0) reversible = true;
      }

    GateReduction gr;
    gr.gate = gate;
    gr.reversible = reversible;
    StochasticPetriNet sub_net;
    if (reversible) {
      for (const auto& id : subtree.basic_events) {
        const auto* be = sub.find_basic_event(id);
        if (std::get_if<FixedProbability>(&be->model))
          throw AnalysisError(
              "basic event '" + id + "' has a fixed probability and no rates; "
              "the reversible reduction of gate '" + gate +
              "' cannot derive its frequency - use the irreversible mode");
      }
      gr.metrics = subtree_metrics(sub, grid, true, opts.sim);
      RateVectors rates = derive_rates(gr.metrics);
      auto [failure, repair] = build_transition_distributions(rates, gate);
      sub_net = build_template_net(gate, std::move(failure), std::move(repair));
    } else {
      gr.metrics = subtree_metrics(sub, grid, false, opts.sim);
      sub_net = build_template_net(
          gate, irreversible_failure_distribution(gr.metrics, gate));
    }
    net.places.insert(net.places.end(), sub_net.places.begin(),
                      sub_net.places.end());
    net.transitions.insert(net.transitions.end(), sub_net.transitions.begin(),
                           sub_net.transitions.end());
    net.marking_map[gate] = gate + "_dn";
    result.gates.push_back(std::move(gr));
  }

  for (const auto& arc : opts.coupling) {
    PetriTransition* target = nullptr;
    for (auto& t : net.transitions)
      if (t.id == arc.transition) target = &t;
    if (!target)
      throw ValidationError("coupling references unknown transition '" +
                            arc.transition + "'");
    bool place_known = false;
    for (const auto& p : net.places)
      if (p.id == arc.place) place_known = true;
    if (!place_known)
      throw ValidationError("coupling references unknown place '" + arc.place +
                            "'");
    switch (arc.kind) {
      case CouplingArc::Kind::kEnable:
        target->inputs.push_back({arc.place, 1});
        target->outputs.push_back({arc.place, 1});
        break;
      case CouplingArc::Kind::kInhibit:
        target->inhibitors.push_back({arc.place, 1});
        break;
      case CouplingArc::Kind::kReset:
        if (arc.to_place.empty())
          throw ValidationError("reset coupling needs a to_place");
        target->resets.push_back({arc.place, arc.to_place});
        break;
    }
  }

  // Assemble the reduced model.
  SystemModel reduced = model;
  reduced.dependency_groups.clear();
  for (const auto& g : model.dependency_groups) {
    bool inside = true;
    for (const auto& m : g.members)
      if (!inside_events.count(m)) inside = false;
    if (!inside) reduced.dependency_groups.push_back(g);
  }
  std::vector<BasicEvent> kept;
  for (const auto& be : model.basic_events)
    if (!inside_events.count(be.id)) kept.push_back(be);
  for (std::size_t i = 0; i < gates.size(); ++i) {
    BasicEvent complex_event;
    complex_event.id = gates[i];
    complex_event.model = UnavailabilitySeries{
        grid, result.gates[i].metrics.unavailability};
    kept.push_back(std::move(complex_event));
  }
  reduced.basic_events = std::move(kept);
  for (auto& tree : reduced.fault_trees) {
    if (tree.root != ft_root) continue;
    std::vector<Gate> remaining;
    for (const auto& g : tree.gates)
      if (!inside_gates.count(g.id)) remaining.push_back(g);
    tree.gates = std::move(remaining);
  }
  reduced.petri_nets.push_back(std::move(net));
  if (!opts.coupling.empty()) {
    DependencyGroupDecl group;
    group.id = opts.group_id.empty() ? "DG_" + ft_root : opts.group_id;
    group.members = gates;
    group.source = PetriSource{result.net_id};
    reduced.dependency_groups.push_back(group);
    result.group_id = group.id;
  }
  reduced.validate();
  result.reduced = std::move(reduced);
  return result;
}

}  // namespace deptree
