#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "deptree/errors.hpp"
#include "deptree/model.hpp"

namespace deptree {

namespace detail {

using nlohmann::json;

inline const json& require(const json& j, const char* key,
                           const std::string& where) {
  auto it = j.find(key);
  if (it == j.end())
    throw ParseError(where + ": missing required key '" + key + "'");
  return *it;
}

inline std::string get_string(const json& j, const char* key,
                              const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_string())
    throw ParseError(where + ": key '" + key + "' must be a string");
  return v.get<std::string>();
}

inline double get_number(const json& j, const char* key,
                         const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number())
    throw ParseError(where + ": key '" + key + "' must be a number");
  return v.get<double>();
}

inline std::vector<double> get_number_array(const json& v,
                                            const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw ParseError(where + ": non-numeric array entry");
    out.push_back(x.get<double>());
  }
  return out;
}

inline TransitionDelay parse_delay(const json& v, const std::string& where) {
  if (v.is_string()) {
    if (v.get<std::string>() == "immediate") return ImmediateDelay{};
    throw ParseError(where + ": unknown delay kind '" + v.get<std::string>() +
                     "'");
  }
  if (!v.is_object()) throw ParseError(where + ": malformed delay");
  if (v.contains("exponential")) {
    if (!v["exponential"].is_number())
      throw ParseError(where + ": exponential rate must be a number");
    return ExponentialDelay{v["exponential"].get<double>()};
  }
  if (v.contains("empirical")) {
    const json& e = v["empirical"];
    if (e.is_string()) return DistributionRef{e.get<std::string>()};
    EmpiricalDistribution d;
    d.times = get_number_array(require(e, "times", where), where + ".times");
    d.cdf = get_number_array(require(e, "cdf", where), where + ".cdf");
    return d;
  }
  throw ParseError(where +
                   ": delay must be \"immediate\", {\"exponential\": rate} or "
                   "{\"empirical\": ...}");
}

inline json delay_to_json(const TransitionDelay& d) {
  if (std::holds_alternative<ImmediateDelay>(d)) return "immediate";
  if (const auto* e = std::get_if<ExponentialDelay>(&d))
    return json{{"exponential", e->rate}};
  if (const auto* r = std::get_if<DistributionRef>(&d))
    return json{{"empirical", r->id}};
  const auto& emp = std::get<EmpiricalDistribution>(d);
  return json{{"empirical", {{"times", emp.times}, {"cdf", emp.cdf}}}};
}

inline std::vector<Arc> parse_arcs(const json& j, const char* key,
                                   const std::string& where) {
  std::vector<Arc> arcs;
  if (!j.contains(key)) return arcs;
  for (const auto& a : j[key]) {
    Arc arc;
    arc.place = get_string(a, "place", where);
    arc.weight = a.contains("weight") ? a["weight"].get<long>() : 1;
    arcs.push_back(std::move(arc));
  }
  return arcs;
}

}  // namespace detail

/// Parses the JSON model format into a validated SystemModel.
inline SystemModel parse_model(const std::string& text) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ParseError(std::string("model syntax error: ") + err.what());
  }
  if (!j.is_object()) throw ParseError("model root must be a JSON object");

  SystemModel model;
  if (j.contains("mission_time"))
    model.mission_time = j["mission_time"].get<double>();
  if (j.contains("time_grid"))
    model.time_grid = detail::get_number_array(j["time_grid"], "time_grid");

  for (const auto& b : j.value("basic_events", json::array())) {
    BasicEvent be;
    be.id = detail::get_string(b, "id", "basic_events");
    const std::string where = "basic event '" + be.id + "'";
    int kinds = b.contains("q") + b.contains("lambda") +
                b.contains("distribution") + b.contains("unavailability");
    if (kinds != 1)
      throw ParseError(where +
                       ": exactly one of q, lambda[/nu], distribution, "
                       "unavailability is required");
    if (b.contains("q")) {
      be.model = FixedProbability{detail::get_number(b, "q", where)};
    } else if (b.contains("lambda")) {
      ConstantRates r;
      r.lambda = detail::get_number(b, "lambda", where);
      r.nu = b.contains("nu") ? b["nu"].get<double>() : 0.0;
      be.model = r;
    } else if (b.contains("distribution")) {
      be.model = DistributionRef{detail::get_string(b, "distribution", where)};
    } else {
      const json& u = b["unavailability"];
      UnavailabilitySeries s;
      s.times = detail::get_number_array(detail::require(u, "times", where),
                                         where + ".times");
      s.values = detail::get_number_array(detail::require(u, "values", where),
                                          where + ".values");
      be.model = std::move(s);
    }
    model.basic_events.push_back(std::move(be));
  }

  for (const auto& d : j.value("distributions", json::array())) {
    EmpiricalDistribution dist;
    dist.id = detail::get_string(d, "id", "distributions");
    dist.times = detail::get_number_array(
        detail::require(d, "times", dist.id), dist.id + ".times");
    dist.cdf = detail::get_number_array(detail::require(d, "cdf", dist.id),
                                        dist.id + ".cdf");
    model.distributions.push_back(std::move(dist));
  }

  for (const auto& f : j.value("fault_trees", json::array())) {
    FaultTree ft;
    ft.root = detail::get_string(f, "root", "fault_trees");
    for (const auto& g : detail::require(f, "gates", "fault tree")) {
      Gate gate;
      gate.id = detail::get_string(g, "id", "gate");
      std::string kind = detail::get_string(g, "kind", "gate '" + gate.id + "'");
      if (kind == "and") {
        gate.kind = GateKind::kAnd;
      } else if (kind == "or") {
        gate.kind = GateKind::kOr;
      } else {
        throw ParseError("gate '" + gate.id + "': unsupported kind '" + kind +
                         "' (only and/or are supported; expand k-of-n "
                         "voting logic into explicit AND/OR structure)");
      }
      for (const auto& c : detail::require(g, "children", "gate"))
        gate.children.push_back(c.get<std::string>());
      ft.gates.push_back(std::move(gate));
    }
    model.fault_trees.push_back(std::move(ft));
  }

  for (const auto& e : j.value("event_trees", json::array())) {
    EventTree et;
    et.id = detail::get_string(e, "id", "event_trees");
    const json& init = detail::require(e, "initiating_event", et.id);
    et.initiating_event.id = detail::get_string(init, "id", et.id);
    et.initiating_event.frequency =
        detail::get_number(init, "frequency", et.id);
    for (const auto& bp : detail::require(e, "branch_points", et.id))
      et.branch_points.push_back({detail::get_string(bp, "top", et.id)});
    for (const auto& c : detail::require(e, "consequences", et.id))
      et.consequences.push_back({detail::get_string(c, "path", et.id),
                                 detail::get_string(c, "loss", et.id)});
    for (const auto& s : e.value("shared_sources", json::array()))
      et.shared_sources.push_back(s.get<std::string>());
    model.event_trees.push_back(std::move(et));
  }

  for (const auto& g : j.value("dependency_groups", json::array())) {
    DependencyGroupDecl dg;
    dg.id = detail::get_string(g, "id", "dependency_groups");
    for (const auto& m : detail::require(g, "members", dg.id))
      dg.members.push_back(m.get<std::string>());
    int sources =
        g.contains("table") + g.contains("markov_model") + g.contains("petri_net");
    if (sources != 1)
      throw ParseError("dependency group '" + dg.id +
                       "': exactly one of table, markov_model, petri_net is "
                       "required");
    if (g.contains("table")) {
      InlineTableSource t;
      t.probs = detail::get_number_array(
          detail::require(g["table"], "probs", dg.id), dg.id + ".probs");
      if (g["table"].contains("freqs"))
        t.freqs =
            detail::get_number_array(g["table"]["freqs"], dg.id + ".freqs");
      dg.source = std::move(t);
    } else if (g.contains("markov_model")) {
      dg.source = MarkovSource{g["markov_model"].get<std::string>()};
    } else {
      dg.source = PetriSource{g["petri_net"].get<std::string>()};
    }
    model.dependency_groups.push_back(std::move(dg));
  }

  for (const auto& m : j.value("markov_models", json::array())) {
    MarkovModel mm;
    mm.id = detail::get_string(m, "id", "markov_models");
    for (const auto& s : detail::require(m, "states", mm.id))
      mm.states.push_back(s.get<std::string>());
    for (const auto& t : detail::require(m, "transitions", mm.id))
      mm.transitions.push_back({detail::get_string(t, "from", mm.id),
                                detail::get_string(t, "to", mm.id),
                                detail::get_number(t, "rate", mm.id)});
    for (const auto& [state, bits] :
         detail::require(m, "state_map", mm.id).items())
      mm.state_map[state] = bits.get<std::string>();
    model.markov_models.push_back(std::move(mm));
  }

  for (const auto& n : j.value("petri_nets", json::array())) {
    StochasticPetriNet pn;
    pn.id = detail::get_string(n, "id", "petri_nets");
    for (const auto& p : detail::require(n, "places", pn.id))
      pn.places.push_back({detail::get_string(p, "id", pn.id),
                           p.contains("tokens") ? p["tokens"].get<long>() : 0});
    for (const auto& t : detail::require(n, "transitions", pn.id)) {
      PetriTransition tr;
      tr.id = detail::get_string(t, "id", pn.id);
      const std::string where = pn.id + ".transition '" + tr.id + "'";
      tr.delay = detail::parse_delay(detail::require(t, "delay", where), where);
      tr.inputs = detail::parse_arcs(t, "inputs", where);
      tr.outputs = detail::parse_arcs(t, "outputs", where);
      tr.inhibitors = detail::parse_arcs(t, "inhibitors", where);
      for (const auto& r : t.value("resets", detail::json::array()))
        tr.resets.push_back({detail::get_string(r, "place", where),
                             detail::get_string(r, "to_place", where)});
      pn.transitions.push_back(std::move(tr));
    }
    if (n.contains("marking_map"))
      for (const auto& [event, place] : n["marking_map"].items())
        pn.marking_map[event] = place.get<std::string>();
    model.petri_nets.push_back(std::move(pn));
  }

  model.validate();
  return model;
}

/// Serializes a model back to the JSON format; parse_model(serialize_model(m))
/// yields a structurally equal model.
inline std::string serialize_model(const SystemModel& model, int indent = 2) {
  using detail::json;
  json j = json::object();
  if (model.mission_time) j["mission_time"] = *model.mission_time;
  if (!model.time_grid.empty()) j["time_grid"] = model.time_grid;

  json bes = json::array();
  for (const auto& be : model.basic_events) {
    json b{{"id", be.id}};
    if (const auto* f = std::get_if<FixedProbability>(&be.model)) {
      b["q"] = f->q;
    } else if (const auto* r = std::get_if<ConstantRates>(&be.model)) {
      b["lambda"] = r->lambda;
      if (r->nu != 0.0) b["nu"] = r->nu;
    } else if (const auto* d = std::get_if<DistributionRef>(&be.model)) {
      b["distribution"] = d->id;
    } else {
      const auto& u = std::get<UnavailabilitySeries>(be.model);
      b["unavailability"] = {{"times", u.times}, {"values", u.values}};
    }
    bes.push_back(std::move(b));
  }
  if (!bes.empty()) j["basic_events"] = std::move(bes);

  json dists = json::array();
  for (const auto& d : model.distributions)
    dists.push_back({{"id", d.id}, {"times", d.times}, {"cdf", d.cdf}});
  if (!dists.empty()) j["distributions"] = std::move(dists);

  json fts = json::array();
  for (const auto& ft : model.fault_trees) {
    json gates = json::array();
    for (const auto& g : ft.gates)
      gates.push_back({{"id", g.id},
                       {"kind", g.kind == GateKind::kAnd ? "and" : "or"},
                       {"children", g.children}});
    fts.push_back({{"root", ft.root}, {"gates", std::move(gates)}});
  }
  if (!fts.empty()) j["fault_trees"] = std::move(fts);

  json ets = json::array();
  for (const auto& et : model.event_trees) {
    json bps = json::array();
    for (const auto& bp : et.branch_points) bps.push_back({{"top", bp.top}});
    json cons = json::array();
    for (const auto& c : et.consequences)
      cons.push_back({{"path", c.path}, {"loss", c.loss}});
    json e{{"id", et.id},
           {"initiating_event",
            {{"id", et.initiating_event.id},
             {"frequency", et.initiating_event.frequency}}},
           {"branch_points", std::move(bps)},
           {"consequences", std::move(cons)}};
    if (!et.shared_sources.empty()) e["shared_sources"] = et.shared_sources;
    ets.push_back(std::move(e));
  }
  if (!ets.empty()) j["event_trees"] = std::move(ets);

  json groups = json::array();
  for (const auto& g : model.dependency_groups) {
    json e{{"id", g.id}, {"members", g.members}};
    if (const auto* t = std::get_if<InlineTableSource>(&g.source)) {
      e["table"] = {{"probs", t->probs}};
      if (t->freqs) e["table"]["freqs"] = *t->freqs;
    } else if (const auto* m = std::get_if<MarkovSource>(&g.source)) {
      e["markov_model"] = m->model;
    } else {
      e["petri_net"] = std::get<PetriSource>(g.source).net;
    }
    groups.push_back(std::move(e));
  }
  if (!groups.empty()) j["dependency_groups"] = std::move(groups);

  json mms = json::array();
  for (const auto& mm : model.markov_models) {
    json trs = json::array();
    for (const auto& t : mm.transitions)
      trs.push_back({{"from", t.from}, {"to", t.to}, {"rate", t.rate}});
    json sm = json::object();
    for (const auto& [state, bits] : mm.state_map) sm[state] = bits;
    mms.push_back({{"id", mm.id},
                   {"states", mm.states},
                   {"transitions", std::move(trs)},
                   {"state_map", std::move(sm)}});
  }
  if (!mms.empty()) j["markov_models"] = std::move(mms);

  json pns = json::array();
  for (const auto& pn : model.petri_nets) {
    json places = json::array();
    for (const auto& p : pn.places)
      places.push_back({{"id", p.id}, {"tokens", p.tokens}});
    json trs = json::array();
    for (const auto& t : pn.transitions) {
      json tr{{"id", t.id}, {"delay", detail::delay_to_json(t.delay)}};
      auto arcs_to_json = [](const std::vector<Arc>& arcs) {
        json out = json::array();
        for (const auto& a : arcs)
          out.push_back({{"place", a.place}, {"weight", a.weight}});
        return out;
      };
      if (!t.inputs.empty()) tr["inputs"] = arcs_to_json(t.inputs);
      if (!t.outputs.empty()) tr["outputs"] = arcs_to_json(t.outputs);
      if (!t.inhibitors.empty()) tr["inhibitors"] = arcs_to_json(t.inhibitors);
      if (!t.resets.empty()) {
        json rs = json::array();
        for (const auto& r : t.resets)
          rs.push_back({{"place", r.place}, {"to_place", r.to_place}});
        tr["resets"] = std::move(rs);
      }
      trs.push_back(std::move(tr));
    }
    json e{{"id", pn.id},
           {"places", std::move(places)},
           {"transitions", std::move(trs)}};
    if (!pn.marking_map.empty()) {
      json mm = json::object();
      for (const auto& [event, place] : pn.marking_map) mm[event] = place;
      e["marking_map"] = std::move(mm);
    }
    pns.push_back(std::move(e));
  }
  if (!pns.empty()) j["petri_nets"] = std::move(pns);

  return j.dump(indent);
}

}  // namespace deptree
