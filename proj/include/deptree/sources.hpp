#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deptree/errors.hpp"
#include "deptree/joint_table.hpp"
#include "deptree/markov.hpp"
#include "deptree/model.hpp"
#include "deptree/petri.hpp"

namespace deptree {

struct SimulationSettings {
  std::uint64_t seed = 0;
  std::size_t replications = 10000;
  std::size_t workers = 0;  // 0 = hardware concurrency
};

/// A dependency group's table resolved from its declared source. Petri-backed
/// groups keep the full simulation statistics so callers can use
/// point-in-time tables; Markov and inline sources are time-invariant.
struct ResolvedGroup {
  JointTable table;
  std::optional<SpnStatistics> simulation;
};

/// Resolves a group's joint table from its source: inline data, the steady
/// state of its Markov model, or simulation of its Petri net (which requires
/// simulation settings for reproducibility; snapshot times are taken at the
/// model's time grid).
inline ResolvedGroup resolve_group(
    const SystemModel& model, const DependencyGroupDecl& group,
    const std::optional<SimulationSettings>& sim = std::nullopt) {
  if (const auto* inl = std::get_if<InlineTableSource>(&group.source))
    return {JointTable(group.id, group.members, inl->probs, inl->freqs),
            std::nullopt};
  if (const auto* ms = std::get_if<MarkovSource>(&group.source)) {
    const MarkovModel* mm = model.find_markov_model(ms->model);
    if (!mm)
      throw ValidationError("dependency group '" + group.id +
                            "': unknown Markov model '" + ms->model + "'");
    SteadyState steady = mm_steady_state(*mm);
    return {mm_to_joint(*mm, steady.pi, group), std::nullopt};
  }
  const auto& ps = std::get<PetriSource>(group.source);
  const StochasticPetriNet* pn = model.find_petri_net(ps.net);
  if (!pn)
    throw ValidationError("dependency group '" + group.id +
                          "': unknown Petri net '" + ps.net + "'");
  if (!sim)
    throw AnalysisError("dependency group '" + group.id +
                        "' is Petri-sourced: simulation settings (seed, "
                        "replications) are required");
  if (!model.mission_time)
    throw AnalysisError("dependency group '" + group.id +
                        "': mission_time required to simulate its Petri net");
  SpnOptions opts;
  opts.snapshot_times = model.time_grid;
  opts.workers = sim->workers;
  SpnStatistics stats = spn_simulate(*pn, group.members, *model.mission_time,
                                     sim->replications, sim->seed, opts, &model);
  JointTable table = stats.to_table(group.id);
  return {std::move(table), std::move(stats)};
}

/// The table to price the group with at mission time t: the snapshot table at
/// the matching grid point for simulated sources, the time-invariant table
/// otherwise.
inline JointTable group_table_at(const ResolvedGroup& resolved, double t) {
  if (!resolved.simulation) return resolved.table;
  const auto& times = resolved.simulation->snapshot_times;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t)))
      return resolved.simulation->snapshot_table(resolved.table.group(), i);
  throw AnalysisError("no simulated snapshot at t = " + std::to_string(t) +
                      " for group '" + resolved.table.group() +
                      "'; evaluation times must lie on the model time grid");
}

}  // namespace deptree
