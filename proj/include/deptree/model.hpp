#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "deptree/distributions.hpp"
#include "deptree/errors.hpp"

namespace deptree {

// ---------------------------------------------------------------------------
// Basic events
// ---------------------------------------------------------------------------

/// Time-independent probability of occurrence.
struct FixedProbability {
  double q = 0.0;
};

/// Constant failure/repair rates (per hour). nu == 0 means non-repairable.
struct ConstantRates {
  double lambda = 0.0;
  double nu = 0.0;
};

/// Piecewise-linear unavailability over explicit times. This is how complex
/// events produced by sub-tree reduction carry their standalone behaviour.
struct UnavailabilitySeries {
  std::vector<double> times;
  std::vector<double> values;
};

using FailureModel = std::variant<FixedProbability, ConstantRates,
                                  DistributionRef, UnavailabilitySeries>;

struct BasicEvent {
  std::string id;
  FailureModel model;
  /// Dependency group id; empty means the independent group DG0. Filled in
  /// during model linking from the group declarations.
  std::string group;
};

// ---------------------------------------------------------------------------
// Fault trees
// ---------------------------------------------------------------------------

enum class GateKind { kAnd, kOr };

struct Gate {
  std::string id;
  GateKind kind = GateKind::kOr;
  std::vector<std::string> children;  // gate ids or basic-event ids
};

/// A fault tree is identified by its root gate id. Gate graphs may be DAGs
/// (shared subtrees); cycles are rejected at validation.
struct FaultTree {
  std::string root;
  std::vector<Gate> gates;

  /// Basic events reachable from the root, in depth-first left-to-right order
  /// of first appearance. Doubles as the default BDD variable ordering.
  /// Populated by SystemModel::validate().
  std::vector<std::string> basic_events;

  const Gate* find_gate(const std::string& id) const {
    for (const auto& g : gates)
      if (g.id == id) return &g;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Event trees
// ---------------------------------------------------------------------------

struct InitiatingEvent {
  std::string id;
  double frequency = 0.0;  // W(T0), per hour
};

/// A branch point references a top event: either a fault tree (by root id)
/// or a fixed-probability basic event.
struct BranchPoint {
  std::string top;
};

/// Maps one root-to-leaf branch path to a loss label. The path string has one
/// character per visited branch point: 'S' = top event did not occur,
/// 'F' = top event occurred. Paths may terminate early; together they must
/// cover the outcome space exactly once.
struct Consequence {
  std::string path;
  std::string loss;
};

struct EventTree {
  std::string id;
  InitiatingEvent initiating_event;
  std::vector<BranchPoint> branch_points;
  std::vector<Consequence> consequences;
  std::vector<std::string> shared_sources;
};

// ---------------------------------------------------------------------------
// Dependency groups and their sources
// ---------------------------------------------------------------------------

struct InlineTableSource {
  std::vector<double> probs;
  std::optional<std::vector<double>> freqs;
};

struct MarkovSource {
  std::string model;
};

struct PetriSource {
  std::string net;
};

using GroupSource = std::variant<InlineTableSource, MarkovSource, PetriSource>;

/// Declares a closed set of mutually dependent events. Member order is the
/// state-vector bit order (member 0 = most significant bit).
struct DependencyGroupDecl {
  std::string id;
  std::vector<std::string> members;
  GroupSource source;
};

// ---------------------------------------------------------------------------
// Dependency models
// ---------------------------------------------------------------------------

struct MarkovTransition {
  std::string from;
  std::string to;
  double rate = 0.0;  // per hour
};

/// Continuous-time Markov model whose states map onto dependency-group state
/// vectors via bit strings ("101": member 0 occurred, member 1 not, ...).
struct MarkovModel {
  std::string id;
  std::vector<std::string> states;
  std::vector<MarkovTransition> transitions;
  std::map<std::string, std::string> state_map;
};

struct Arc {
  std::string place;
  long weight = 1;
};

/// When the owning transition fires, tokens in `place` are moved to
/// `to_place`. Used by reduction couplings to knock other template nets back.
struct ResetArc {
  std::string place;
  std::string to_place;
};

struct PetriTransition {
  std::string id;
  TransitionDelay delay;
  std::vector<Arc> inputs;
  std::vector<Arc> outputs;
  std::vector<Arc> inhibitors;
  std::vector<ResetArc> resets;
};

struct Place {
  std::string id;
  long tokens = 0;
};

/// Stochastic Petri net. marking_map gives, per dependency-group event, the
/// place whose marking (>= 1 token) means "event occurred".
struct StochasticPetriNet {
  std::string id;
  std::vector<Place> places;
  std::vector<PetriTransition> transitions;
  std::map<std::string, std::string> marking_map;
};

// ---------------------------------------------------------------------------
// System model
// ---------------------------------------------------------------------------

class SystemModel {
 public:
  std::vector<BasicEvent> basic_events;
  std::vector<EmpiricalDistribution> distributions;
  std::vector<FaultTree> fault_trees;
  std::vector<EventTree> event_trees;
  std::vector<DependencyGroupDecl> dependency_groups;
  std::vector<MarkovModel> markov_models;
  std::vector<StochasticPetriNet> petri_nets;
  std::optional<double> mission_time;  // hours
  std::vector<double> time_grid;       // t_0 < ... < t_n == mission_time

  const BasicEvent* find_basic_event(const std::string& id) const {
    auto it = be_index_.find(id);
    return it == be_index_.end() ? nullptr : &basic_events[it->second];
  }
  const FaultTree* find_fault_tree(const std::string& root) const {
    for (const auto& ft : fault_trees)
      if (ft.root == root) return &ft;
    return nullptr;
  }
  const EventTree* find_event_tree(const std::string& id) const {
    for (const auto& et : event_trees)
      if (et.id == id) return &et;
    return nullptr;
  }
  const DependencyGroupDecl* find_group(const std::string& id) const {
    for (const auto& g : dependency_groups)
      if (g.id == id) return &g;
    return nullptr;
  }
  const DependencyGroupDecl* group_of_event(const std::string& event) const {
    auto it = group_of_.find(event);
    return it == group_of_.end() ? nullptr : find_group(it->second);
  }
  const MarkovModel* find_markov_model(const std::string& id) const {
    for (const auto& m : markov_models)
      if (m.id == id) return &m;
    return nullptr;
  }
  const StochasticPetriNet* find_petri_net(const std::string& id) const {
    for (const auto& n : petri_nets)
      if (n.id == id) return &n;
    return nullptr;
  }
  const EmpiricalDistribution* find_distribution(const std::string& id) const {
    for (const auto& d : distributions)
      if (d.id == id) return &d;
    return nullptr;
  }

  /// Cross-links and validates the whole model. Must be called after any
  /// structural mutation; parse_model calls it automatically.
  void validate() {
    be_index_.clear();
    group_of_.clear();
    for (std::size_t i = 0; i < basic_events.size(); ++i) {
      const auto& be = basic_events[i];
      if (!be_index_.emplace(be.id, i).second)
        throw ValidationError("duplicate basic event id '" + be.id + "'");
      validate_failure_model(be);
    }
    for (auto& d : distributions) d.validate();
    validate_grid();
    std::unordered_set<std::string> gate_ids;
    for (auto& ft : fault_trees) validate_fault_tree(ft, gate_ids);
    validate_groups();
    for (const auto& mm : markov_models) validate_markov(mm);
    for (const auto& pn : petri_nets) validate_petri(pn);
    for (const auto& et : event_trees) validate_event_tree(et);
  }

  /// Extracts the self-contained model rooted at `gate` of fault tree `root`:
  /// one fault tree, copies of the referenced basic events, distributions,
  /// and every dependency group (with its dependency model) fully contained
  /// in the sub-tree. A group straddling the sub-tree boundary is an error.
  SystemModel extract_subtree(const std::string& root,
                              const std::string& gate) const {
    const FaultTree* ft = find_fault_tree(root);
    if (!ft) throw ValidationError("unknown fault tree '" + root + "'");
    if (!ft->find_gate(gate))
      throw ValidationError("unknown gate '" + gate + "' in fault tree '" +
                            root + "'");
    SystemModel sub;
    sub.mission_time = mission_time;
    sub.time_grid = time_grid;
    FaultTree out;
    out.root = gate;
    std::unordered_set<std::string> visited_gates, used_events;
    collect_subtree(*ft, gate, visited_gates, used_events, out.gates);
    sub.fault_trees.push_back(std::move(out));
    for (const auto& be : basic_events)
      if (used_events.count(be.id)) {
        BasicEvent copy = be;
        copy.group.clear();
        sub.basic_events.push_back(std::move(copy));
        if (const auto* ref = std::get_if<DistributionRef>(&be.model))
          if (const auto* d = find_distribution(ref->id))
            if (!sub.find_distribution(ref->id)) sub.distributions.push_back(*d);
      }
    for (const auto& g : dependency_groups) {
      std::size_t inside = 0;
      for (const auto& m : g.members) inside += used_events.count(m);
      if (inside == 0) continue;
      if (inside != g.members.size())
        throw ValidationError(
            "dependency group '" + g.id + "' straddles the boundary of gate '" +
            gate + "': group-level treatment is required before extraction");
      sub.dependency_groups.push_back(g);
      if (const auto* ms = std::get_if<MarkovSource>(&g.source)) {
        if (const auto* mm = find_markov_model(ms->model))
          sub.markov_models.push_back(*mm);
      } else if (const auto* ps = std::get_if<PetriSource>(&g.source)) {
        if (const auto* pn = find_petri_net(ps->net))
          sub.petri_nets.push_back(*pn);
      }
    }
    sub.validate();
    return sub;
  }

 private:
  void validate_failure_model(const BasicEvent& be) const {
    if (const auto* f = std::get_if<FixedProbability>(&be.model)) {
      if (!(f->q >= 0.0 && f->q <= 1.0))
        throw ValidationError("basic event '" + be.id +
                              "': probability outside [0,1]");
    } else if (const auto* r = std::get_if<ConstantRates>(&be.model)) {
      if (!(r->lambda >= 0.0) || !(r->nu >= 0.0))
        throw ValidationError("basic event '" + be.id + "': negative rate");
    } else if (const auto* u = std::get_if<UnavailabilitySeries>(&be.model)) {
      if (u->times.size() != u->values.size() || u->times.empty())
        throw ValidationError("basic event '" + be.id +
                              "': malformed unavailability series");
      for (std::size_t i = 0; i < u->times.size(); ++i) {
        if (!(u->values[i] >= 0.0 && u->values[i] <= 1.0))
          throw ValidationError("basic event '" + be.id +
                                "': unavailability outside [0,1]");
        if (i > 0 && u->times[i] <= u->times[i - 1])
          throw ValidationError("basic event '" + be.id +
                                "': unavailability times not increasing");
      }
    }
  }

  void validate_grid() const {
    for (std::size_t i = 1; i < time_grid.size(); ++i)
      if (!(time_grid[i] > time_grid[i - 1]))
        throw ValidationError("time grid not strictly increasing");
    if (!time_grid.empty()) {
      if (time_grid.front() < 0.0)
        throw ValidationError("time grid starts before t = 0");
      if (!mission_time)
        throw ValidationError("time grid given without mission_time");
      if (std::abs(time_grid.back() - *mission_time) > 0.0)
        throw ValidationError("final grid point t_n must equal mission_time");
    }
    if (mission_time && !(*mission_time >= 0.0))
      throw ValidationError("negative mission_time");
  }

  void validate_fault_tree(FaultTree& ft,
                           std::unordered_set<std::string>& global_gate_ids) {
    if (ft.gates.empty())
      throw ValidationError("fault tree '" + ft.root + "' has no gates");
    std::unordered_map<std::string, const Gate*> local;
    for (const auto& g : ft.gates) {
      if (be_index_.count(g.id))
        throw ValidationError("gate id '" + g.id +
                              "' collides with a basic event id");
      if (!global_gate_ids.insert(g.id).second)
        throw ValidationError("duplicate gate id '" + g.id + "'");
      if (!local.emplace(g.id, &g).second)
        throw ValidationError("duplicate gate id '" + g.id + "'");
      if (g.children.empty())
        throw ValidationError("gate '" + g.id + "' has no children");
    }
    if (!local.count(ft.root))
      throw ValidationError("fault tree root gate '" + ft.root + "' missing");
    // Cycle check + DFS first-appearance order of basic events.
    ft.basic_events.clear();
    std::unordered_set<std::string> seen_events;
    std::unordered_map<std::string, int> state;  // 0 absent, 1 on stack, 2 done
    std::vector<std::string> stack;
    dfs_gate(ft.root, local, state, stack, seen_events, ft.basic_events);
    for (const auto& g : ft.gates)
      if (!state.count(g.id))
        throw ValidationError("gate '" + g.id +
                              "' is not reachable from root '" + ft.root + "'");
  }

  void dfs_gate(const std::string& id,
                const std::unordered_map<std::string, const Gate*>& local,
                std::unordered_map<std::string, int>& state,
                std::vector<std::string>& stack,
                std::unordered_set<std::string>& seen_events,
                std::vector<std::string>& order) const {
    auto it = local.find(id);
    if (it == local.end()) {
      if (!be_index_.count(id)) {
        std::string owner = stack.empty() ? "?" : stack.back();
        throw ValidationError("gate '" + owner + "': dangling reference '" +
                              id + "'");
      }
      if (seen_events.insert(id).second) order.push_back(id);
      return;
    }
    int& st = state[id];
    if (st == 1) {
      std::string cycle;
      for (const auto& s : stack) cycle += s + " -> ";
      throw ValidationError("cyclic gate graph: " + cycle + id);
    }
    if (st == 2) return;
    st = 1;
    stack.push_back(id);
    for (const auto& child : it->second->children)
      dfs_gate(child, local, state, stack, seen_events, order);
    stack.pop_back();
    st = 2;
  }

  void validate_groups() {
    std::unordered_set<std::string> group_ids;
    for (const auto& g : dependency_groups) {
      if (!group_ids.insert(g.id).second)
        throw ValidationError("duplicate dependency group id '" + g.id + "'");
      if (g.members.empty())
        throw ValidationError("dependency group '" + g.id + "' has no members");
      std::unordered_set<std::string> seen;
      for (const auto& m : g.members) {
        if (!be_index_.count(m))
          throw ValidationError("dependency group '" + g.id +
                                "': unknown member '" + m + "'");
        if (!seen.insert(m).second)
          throw ValidationError("dependency group '" + g.id +
                                "': duplicate member '" + m + "'");
        auto [it, fresh] = group_of_.emplace(m, g.id);
        if (!fresh)
          throw ValidationError("event '" + m +
                                "' belongs to multiple dependency groups ('" +
                                it->second + "' and '" + g.id + "')");
        basic_events[be_index_.at(m)].group = g.id;
      }
      if (const auto* inl = std::get_if<InlineTableSource>(&g.source)) {
        std::size_t n = std::size_t{1} << g.members.size();
        if (inl->probs.size() != n)
          throw ValidationError("dependency group '" + g.id + "': expected " +
                                std::to_string(n) + " table entries");
      } else if (const auto* ms = std::get_if<MarkovSource>(&g.source)) {
        if (!find_markov_model(ms->model))
          throw ValidationError("dependency group '" + g.id +
                                "': unknown Markov model '" + ms->model + "'");
      } else if (const auto* ps = std::get_if<PetriSource>(&g.source)) {
        if (!find_petri_net(ps->net))
          throw ValidationError("dependency group '" + g.id +
                                "': unknown Petri net '" + ps->net + "'");
      }
    }
  }

  void validate_markov(const MarkovModel& mm) const {
    std::unordered_set<std::string> states(mm.states.begin(), mm.states.end());
    if (states.size() != mm.states.size())
      throw ValidationError("Markov model '" + mm.id + "': duplicate state");
    for (const auto& t : mm.transitions) {
      if (!states.count(t.from) || !states.count(t.to))
        throw ValidationError("Markov model '" + mm.id +
                              "': transition references unknown state");
      if (t.from == t.to)
        throw ValidationError("Markov model '" + mm.id + "': self-loop on '" +
                              t.from + "'");
      if (!(t.rate >= 0.0) || !std::isfinite(t.rate))
        throw ValidationError("Markov model '" + mm.id + "': invalid rate");
    }
    for (const auto& [state, bits] : mm.state_map)
      if (!states.count(state))
        throw ValidationError("Markov model '" + mm.id +
                              "': state_map references unknown state '" +
                              state + "'");
  }

  void validate_petri(const StochasticPetriNet& pn) const {
    std::unordered_set<std::string> places;
    for (const auto& p : pn.places) {
      if (!places.insert(p.id).second)
        throw ValidationError("Petri net '" + pn.id + "': duplicate place '" +
                              p.id + "'");
      if (p.tokens < 0)
        throw ValidationError("Petri net '" + pn.id +
                              "': negative initial marking");
    }
    auto check_arc = [&](const Arc& a, const char* what) {
      if (!places.count(a.place))
        throw ValidationError("Petri net '" + pn.id + "': " + what +
                              " arc references unknown place '" + a.place + "'");
      if (a.weight < 1)
        throw ValidationError("Petri net '" + pn.id + "': arc weight < 1");
    };
    for (const auto& t : pn.transitions) {
      if (t.inputs.empty())
        throw ValidationError("Petri net '" + pn.id + "': transition '" + t.id +
                              "' has no input arc");
      for (const auto& a : t.inputs) check_arc(a, "input");
      for (const auto& a : t.outputs) check_arc(a, "output");
      for (const auto& a : t.inhibitors) check_arc(a, "inhibitor");
      for (const auto& r : t.resets)
        if (!places.count(r.place) || !places.count(r.to_place))
          throw ValidationError("Petri net '" + pn.id +
                                "': reset arc references unknown place");
      if (const auto* ref = std::get_if<DistributionRef>(&t.delay))
        if (!find_distribution(ref->id))
          throw ValidationError("Petri net '" + pn.id + "': transition '" +
                                t.id + "': unknown distribution '" + ref->id +
                                "'");
    }
    for (const auto& [event, place] : pn.marking_map)
      if (!places.count(place))
        throw ValidationError("Petri net '" + pn.id +
                              "': marking_map references unknown place '" +
                              place + "'");
  }

  void validate_event_tree(const EventTree& et) const {
    if (!(et.initiating_event.frequency >= 0.0))
      throw ValidationError("event tree '" + et.id +
                            "': negative initiating-event frequency");
    if (et.branch_points.empty())
      throw ValidationError("event tree '" + et.id + "' has no branch points");
    for (const auto& bp : et.branch_points)
      if (!find_fault_tree(bp.top) && !be_index_.count(bp.top))
        throw ValidationError("event tree '" + et.id +
                              "': branch top '" + bp.top +
                              "' is neither a fault tree nor a basic event");
    for (const auto& s : et.shared_sources)
      if (!be_index_.count(s))
        throw ValidationError("event tree '" + et.id +
                              "': unknown shared source '" + s + "'");
    // The consequence paths must partition the outcome space: a complete
    // prefix-free binary code over {S, F}.
    std::set<std::string> losses_seen;
    double kraft = 0.0;
    for (const auto& c : et.consequences) {
      if (c.path.empty() || c.path.size() > et.branch_points.size())
        throw ValidationError("event tree '" + et.id +
                              "': consequence path length out of range");
      for (char ch : c.path)
        if (ch != 'S' && ch != 'F')
          throw ValidationError("event tree '" + et.id +
                                "': consequence path must use only S/F");
      kraft += std::ldexp(1.0, -static_cast<int>(c.path.size()));
    }
    for (std::size_t i = 0; i < et.consequences.size(); ++i)
      for (std::size_t j = i + 1; j < et.consequences.size(); ++j) {
        const auto& a = et.consequences[i].path;
        const auto& b = et.consequences[j].path;
        const auto& shorter = a.size() <= b.size() ? a : b;
        const auto& longer = a.size() <= b.size() ? b : a;
        if (longer.compare(0, shorter.size(), shorter) == 0)
          throw ValidationError("event tree '" + et.id +
                                "': overlapping consequence paths '" + a +
                                "' and '" + b + "'");
      }
    if (std::abs(kraft - 1.0) > 1e-12)
      throw ValidationError("event tree '" + et.id +
                            "': consequence paths do not cover every branch "
                            "outcome exactly once");
    validate_et_sharing(et);
  }

  /// Every component appearing in two branch fault trees must be a declared
  /// shared source; silent double-counting is forbidden. Dependency groups
  /// reaching into more than one branch tree via non-source members are
  /// rejected for the same reason.
  void validate_et_sharing(const EventTree& et) const {
    std::vector<const FaultTree*> fts;
    for (const auto& bp : et.branch_points)
      if (const auto* ft = find_fault_tree(bp.top)) fts.push_back(ft);
    std::unordered_set<std::string> sources(et.shared_sources.begin(),
                                            et.shared_sources.end());
    for (std::size_t i = 0; i < fts.size(); ++i)
      for (std::size_t j = i + 1; j < fts.size(); ++j) {
        std::unordered_set<std::string> a(fts[i]->basic_events.begin(),
                                          fts[i]->basic_events.end());
        for (const auto& e : fts[j]->basic_events)
          if (a.count(e) && !sources.count(e))
            throw ValidationError(
                "event tree '" + et.id + "': component '" + e +
                "' is shared by branch fault trees '" + fts[i]->root +
                "' and '" + fts[j]->root + "' but not declared a shared source");
      }
    for (const auto& g : dependency_groups) {
      std::size_t trees_with_nonsource_members = 0;
      for (const auto* ft : fts) {
        std::unordered_set<std::string> evs(ft->basic_events.begin(),
                                            ft->basic_events.end());
        bool has = false;
        for (const auto& m : g.members)
          if (evs.count(m) && !sources.count(m)) has = true;
        trees_with_nonsource_members += has;
      }
      if (trees_with_nonsource_members > 1)
        throw ValidationError(
            "event tree '" + et.id + "': dependency group '" + g.id +
            "' couples multiple branch fault trees through members that are "
            "not declared shared sources");
    }
  }

  void collect_subtree(const FaultTree& ft, const std::string& id,
                       std::unordered_set<std::string>& visited,
                       std::unordered_set<std::string>& events,
                       std::vector<Gate>& out) const {
    const Gate* g = ft.find_gate(id);
    if (!g) {
      events.insert(id);
      return;
    }
    if (!visited.insert(id).second) return;
    out.push_back(*g);
    for (const auto& child : g->children)
      collect_subtree(ft, child, visited, events, out);
  }

  std::unordered_map<std::string, std::size_t> be_index_;
  std::unordered_map<std::string, std::string> group_of_;
};

}  // namespace deptree
