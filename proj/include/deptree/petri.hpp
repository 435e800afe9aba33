#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "deptree/distributions.hpp"
#include "deptree/errors.hpp"
#include "deptree/joint_table.hpp"
#include "deptree/model.hpp"
#include "deptree/rng.hpp"

namespace deptree {

struct SpnOptions {
  std::vector<double> snapshot_times;   // point-in-time statistics, sorted
  std::size_t workers = 0;              // 0 = hardware concurrency
  std::size_t immediate_cap = 10000;    // firings per instant before livelock
};

/// Replication statistics over the dependency-group state vectors.
/// Probabilities are time averages over [0, mission]; entry frequencies count
/// state-vector changes per unit time. Standard errors are across
/// replications.
struct SpnStatistics {
  std::string net;
  std::vector<std::string> members;
  double mission_time = 0.0;
  std::size_t replications = 0;

  std::vector<double> avg_prob, avg_prob_se;
  std::vector<double> entry_freq, entry_freq_se;
  std::vector<double> snapshot_times;
  std::vector<std::vector<double>> snapshot_prob;  // [time][state]
  std::vector<std::vector<double>> snapshot_se;

  /// Time-average joint table (probabilities + state-entry frequencies).
  JointTable to_table(const std::string& group_id) const {
    return JointTable(group_id, members, avg_prob, entry_freq);
  }

  /// Point-in-time joint table at snapshot index i. Entry frequencies are the
  /// long-run (time-average) rates; snapshots carry probabilities only.
  JointTable snapshot_table(const std::string& group_id, std::size_t i) const {
    return JointTable(group_id, members, snapshot_prob.at(i), entry_freq);
  }
};

namespace detail {

struct CompiledTransition {
  TransitionDelay delay;
  bool immediate = false;
  std::vector<std::pair<std::size_t, long>> inputs;
  std::vector<std::pair<std::size_t, long>> outputs;
  std::vector<std::pair<std::size_t, long>> inhibitors;
  std::vector<std::pair<std::size_t, std::size_t>> resets;
};

struct CompiledSpn {
  std::string id;
  std::vector<long> initial;
  std::vector<CompiledTransition> transitions;
  std::vector<std::size_t> member_places;  // aligned with tracked members
};

inline CompiledSpn compile_spn(const StochasticPetriNet& net,
                               const std::vector<std::string>& members,
                               const SystemModel* distributions) {
  CompiledSpn c;
  c.id = net.id;
  std::unordered_map<std::string, std::size_t> place_index;
  for (const auto& p : net.places) {
    place_index[p.id] = c.initial.size();
    c.initial.push_back(p.tokens);
  }
  for (const auto& t : net.transitions) {
    CompiledTransition ct;
    ct.delay = t.delay;
    if (const auto* ref = std::get_if<DistributionRef>(&t.delay)) {
      const EmpiricalDistribution* d =
          distributions ? distributions->find_distribution(ref->id) : nullptr;
      if (!d)
        throw ValidationError("Petri net '" + net.id + "': transition '" +
                              t.id + "' references unknown distribution '" +
                              ref->id + "'");
      ct.delay = *d;
    }
    ct.immediate = std::holds_alternative<ImmediateDelay>(ct.delay);
    for (const auto& a : t.inputs)
      ct.inputs.emplace_back(place_index.at(a.place), a.weight);
    for (const auto& a : t.outputs)
      ct.outputs.emplace_back(place_index.at(a.place), a.weight);
    for (const auto& a : t.inhibitors)
      ct.inhibitors.emplace_back(place_index.at(a.place), a.weight);
    for (const auto& r : t.resets)
      ct.resets.emplace_back(place_index.at(r.place),
                             place_index.at(r.to_place));
    c.transitions.push_back(std::move(ct));
  }
  for (const auto& m : members) {
    auto it = net.marking_map.find(m);
    if (it == net.marking_map.end())
      throw ValidationError("Petri net '" + net.id +
                            "': marking_map does not cover event '" + m + "'");
    c.member_places.push_back(place_index.at(it->second));
  }
  return c;
}

inline bool transition_enabled(const CompiledTransition& t,
                               const std::vector<long>& tokens) {
  for (const auto& [p, w] : t.inputs)
    if (tokens[p] < w) return false;
  for (const auto& [p, w] : t.inhibitors)
    if (tokens[p] >= w) return false;
  return true;
}

inline std::size_t read_state_vector(const CompiledSpn& net,
                                     const std::vector<long>& tokens) {
  std::size_t v = 0;
  const std::size_t k = net.member_places.size();
  for (std::size_t m = 0; m < k; ++m)
    if (tokens[net.member_places[m]] > 0) v |= std::size_t{1} << (k - 1 - m);
  return v;
}

/// Per-replication accumulator for one chunk of replications.
struct ChunkSums {
  std::vector<double> prob_sum, prob_sq;
  std::vector<double> freq_sum, freq_sq;
  std::vector<std::vector<double>> snap_sum, snap_sq;
  void init(std::size_t states, std::size_t snapshots) {
    prob_sum.assign(states, 0.0);
    prob_sq.assign(states, 0.0);
    freq_sum.assign(states, 0.0);
    freq_sq.assign(states, 0.0);
    snap_sum.assign(snapshots, std::vector<double>(states, 0.0));
    snap_sq.assign(snapshots, std::vector<double>(states, 0.0));
  }
};

inline void simulate_replication(const CompiledSpn& net, double mission,
                                 const SpnOptions& opts, RandomStream& rng,
                                 std::vector<double>& time_in,
                                 std::vector<double>& entries,
                                 std::vector<std::size_t>& snapshot_states) {
  const std::size_t nt = net.transitions.size();
  std::vector<long> tokens = net.initial;
  std::vector<double> clock(nt, std::numeric_limits<double>::infinity());
  std::vector<bool> armed(nt, false);

  std::fill(time_in.begin(), time_in.end(), 0.0);
  std::fill(entries.begin(), entries.end(), 0.0);

  auto fire = [&](std::size_t idx) {
    const CompiledTransition& t = net.transitions[idx];
    for (const auto& [p, w] : t.inputs) tokens[p] -= w;
    for (const auto& [p, w] : t.outputs) tokens[p] += w;
    for (const auto& [from, to] : t.resets) {
      tokens[to] += tokens[from];
      tokens[from] = 0;
    }
  };

  std::size_t state = read_state_vector(net, tokens);
  auto settle_immediates = [&]() {
    std::size_t fired = 0;
    for (;;) {
      bool any = false;
      for (std::size_t i = 0; i < nt; ++i) {
        if (!net.transitions[i].immediate) continue;
        if (!transition_enabled(net.transitions[i], tokens)) continue;
        fire(i);
        std::size_t next_state = read_state_vector(net, tokens);
        if (next_state != state) {
          entries[next_state] += 1.0;
          state = next_state;
        }
        any = true;
        if (++fired > opts.immediate_cap)
          throw AnalysisError("Petri net '" + net.id +
                              "': immediate-transition livelock (more than " +
                              std::to_string(opts.immediate_cap) +
                              " firings at one instant)");
        break;  // re-scan from the first transition for a deterministic order
      }
      if (!any) break;
    }
  };

  auto rearm = [&](double now) {
    for (std::size_t i = 0; i < nt; ++i) {
      if (net.transitions[i].immediate) continue;
      bool enabled = transition_enabled(net.transitions[i], tokens);
      if (enabled && !armed[i]) {
        clock[i] = now + sample_delay(net.transitions[i].delay, rng);
        armed[i] = true;
      } else if (!enabled && armed[i]) {
        clock[i] = std::numeric_limits<double>::infinity();
        armed[i] = false;
      }
    }
  };

  settle_immediates();
  // Initial state-vector entry is the initial condition, not a transition.
  double now = 0.0;
  rearm(now);
  std::size_t snap_idx = 0;

  for (;;) {
    double tmin = std::numeric_limits<double>::infinity();
    std::size_t next = nt;
    for (std::size_t i = 0; i < nt; ++i)
      if (armed[i] && clock[i] < tmin) {
        tmin = clock[i];
        next = i;
      }
    double horizon = std::min(tmin, mission);
    while (snap_idx < opts.snapshot_times.size() &&
           opts.snapshot_times[snap_idx] <= horizon) {
      snapshot_states[snap_idx] = state;
      ++snap_idx;
    }
    time_in[state] += horizon - now;
    now = horizon;
    if (next == nt || tmin > mission) break;

    fire(next);
    armed[next] = false;
    clock[next] = std::numeric_limits<double>::infinity();
    std::size_t next_state = read_state_vector(net, tokens);
    if (next_state != state) {
      entries[next_state] += 1.0;
      state = next_state;
    }
    settle_immediates();
    rearm(now);
  }
  // Any snapshots past the last event (exactly at mission) were handled by
  // the horizon clamp above.
}

}  // namespace detail

/// Discrete-event simulation of the net over [0, mission_time]. Tracked
/// members (the dependency group's events, in declaration order) map to
/// places via the net's marking_map. All enabled timed transitions race;
/// firing times are resampled on (re-)enabling. Deterministic for a fixed
/// seed with one independent substream per replication, for any worker count.
inline SpnStatistics spn_simulate(const StochasticPetriNet& net,
                                  const std::vector<std::string>& members,
                                  double mission_time,
                                  std::size_t replications, std::uint64_t seed,
                                  const SpnOptions& opts = {},
                                  const SystemModel* distributions = nullptr) {
  if (replications < 1)
    throw ValidationError("spn_simulate: replications must be >= 1");
  if (!(mission_time > 0.0))
    throw ValidationError("spn_simulate: mission time must be positive");
  if (members.empty())
    throw ValidationError("spn_simulate: no tracked events");
  detail::CompiledSpn compiled =
      detail::compile_spn(net, members, distributions);
  const std::size_t states = std::size_t{1} << members.size();
  const std::size_t snapshots = opts.snapshot_times.size();
  for (std::size_t i = 1; i < snapshots; ++i)
    if (opts.snapshot_times[i] <= opts.snapshot_times[i - 1])
      throw ValidationError("spn_simulate: snapshot times must increase");

  // Fixed-size chunks make the aggregation order independent of the worker
  // count, so fixed seeds give bit-identical statistics.
  constexpr std::size_t kChunk = 256;
  const std::size_t chunk_count = (replications + kChunk - 1) / kChunk;
  std::vector<detail::ChunkSums> chunks(chunk_count);

  std::size_t workers = opts.workers ? opts.workers
                                     : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, chunk_count);

  std::atomic<std::size_t> next_chunk{0};
  std::atomic<bool> failed{false};
  std::string failure_message;
  std::mutex failure_mutex;

  auto worker = [&]() {
    std::vector<double> time_in(states), entries(states);
    std::vector<std::size_t> snapshot_states(snapshots);
    for (;;) {
      std::size_t c = next_chunk.fetch_add(1);
      if (c >= chunk_count || failed.load()) return;
      detail::ChunkSums& sums = chunks[c];
      sums.init(states, snapshots);
      std::size_t begin = c * kChunk;
      std::size_t end = std::min(begin + kChunk, replications);
      for (std::size_t rep = begin; rep < end; ++rep) {
        RandomStream rng(seed, rep);
        try {
          detail::simulate_replication(compiled, mission_time, opts, rng,
                                       time_in, entries, snapshot_states);
        } catch (const Error& err) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          failure_message = err.what();
          failed.store(true);
          return;
        }
        for (std::size_t v = 0; v < states; ++v) {
          double p = time_in[v] / mission_time;
          double w = entries[v] / mission_time;
          sums.prob_sum[v] += p;
          sums.prob_sq[v] += p * p;
          sums.freq_sum[v] += w;
          sums.freq_sq[v] += w * w;
        }
        for (std::size_t s = 0; s < snapshots; ++s) {
          sums.snap_sum[s][snapshot_states[s]] += 1.0;
          sums.snap_sq[s][snapshot_states[s]] += 1.0;
        }
      }
    }
  };

  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw AnalysisError(failure_message);

  SpnStatistics stats;
  stats.net = net.id;
  stats.members = members;
  stats.mission_time = mission_time;
  stats.replications = replications;
  stats.snapshot_times = opts.snapshot_times;
  stats.avg_prob.assign(states, 0.0);
  stats.avg_prob_se.assign(states, 0.0);
  stats.entry_freq.assign(states, 0.0);
  stats.entry_freq_se.assign(states, 0.0);
  stats.snapshot_prob.assign(snapshots, std::vector<double>(states, 0.0));
  stats.snapshot_se.assign(snapshots, std::vector<double>(states, 0.0));

  auto finalize = [&](double sum, double sq, double& mean, double& se) {
    const double r = static_cast<double>(replications);
    mean = sum / r;
    double var = r > 1 ? std::max(0.0, (sq - sum * sum / r) / (r - 1.0)) : 0.0;
    se = std::sqrt(var / r);
  };

  for (std::size_t v = 0; v < states; ++v) {
    double ps = 0, pq = 0, fs = 0, fq = 0;
    for (const auto& c : chunks) {
      ps += c.prob_sum[v];
      pq += c.prob_sq[v];
      fs += c.freq_sum[v];
      fq += c.freq_sq[v];
    }
    finalize(ps, pq, stats.avg_prob[v], stats.avg_prob_se[v]);
    finalize(fs, fq, stats.entry_freq[v], stats.entry_freq_se[v]);
  }
  for (std::size_t s = 0; s < snapshots; ++s)
    for (std::size_t v = 0; v < states; ++v) {
      double ss = 0, sq = 0;
      for (const auto& c : chunks) {
        ss += c.snap_sum[s][v];
        sq += c.snap_sq[s][v];
      }
      finalize(ss, sq, stats.snapshot_prob[s][v], stats.snapshot_se[s][v]);
    }
  return stats;
}

/// Builds the two-place template net for one event: `<id>_up` (marked) and
/// `<id>_dn`, a failure transition `<id>_F` moving the token down, and, when
/// the event is reversible, a repair transition `<id>_R` moving it back.
/// The marking map flags the event as occurred while `<id>_dn` is marked.
inline StochasticPetriNet build_template_net(
    const std::string& event_id, TransitionDelay failure,
    std::optional<TransitionDelay> repair = std::nullopt) {
  StochasticPetriNet net;
  net.id = event_id + "_net";
  net.places.push_back({event_id + "_up", 1});
  net.places.push_back({event_id + "_dn", 0});
  PetriTransition fail;
  fail.id = event_id + "_F";
  fail.delay = std::move(failure);
  fail.inputs.push_back({event_id + "_up", 1});
  fail.outputs.push_back({event_id + "_dn", 1});
  net.transitions.push_back(std::move(fail));
  if (repair) {
    PetriTransition rep;
    rep.id = event_id + "_R";
    rep.delay = std::move(*repair);
    rep.inputs.push_back({event_id + "_dn", 1});
    rep.outputs.push_back({event_id + "_up", 1});
    net.transitions.push_back(std::move(rep));
  }
  net.marking_map[event_id] = event_id + "_dn";
  return net;
}

}  // namespace deptree
