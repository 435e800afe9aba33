#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "deptree/errors.hpp"
#include "deptree/joint_table.hpp"
#include "deptree/model.hpp"

namespace deptree {

namespace detail {

/// Strongly connected components (iterative Tarjan) over the rate graph.
/// Returns the component index per state.
inline std::vector<int> scc_components(std::size_t n,
                                       const std::vector<std::vector<int>>& adj,
                                       int& component_count) {
  std::vector<int> index(n, -1), lowlink(n, 0), component(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  int next_index = 0;
  component_count = 0;
  struct Frame {
    int v;
    std::size_t child;
  };
  for (std::size_t start = 0; start < n; ++start) {
    if (index[start] != -1) continue;
    std::vector<Frame> frames{{static_cast<int>(start), 0}};
    index[start] = lowlink[start] = next_index++;
    stack.push_back(static_cast<int>(start));
    on_stack[start] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.child < adj[f.v].size()) {
        int w = adj[f.v][f.child++];
        if (index[w] == -1) {
          index[w] = lowlink[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          lowlink[f.v] = std::min(lowlink[f.v], index[w]);
        }
      } else {
        if (lowlink[f.v] == index[f.v]) {
          for (;;) {
            int w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            component[w] = component_count;
            if (w == f.v) break;
          }
          ++component_count;
        }
        int v = f.v;
        frames.pop_back();
        if (!frames.empty())
          lowlink[frames.back().v] =
              std::min(lowlink[frames.back().v], lowlink[v]);
      }
    }
  }
  return component;
}

}  // namespace detail

struct SteadyState {
  std::vector<double> pi;
  double residual;  // max |pi^T Q| component
};

/// Steady-state distribution of the continuous-time chain: pi Q = 0 with
/// sum(pi) = 1, by direct dense solve. The chain must be irreducible; a
/// reducible chain is rejected with the closed (absorbing) classes named.
inline SteadyState mm_steady_state(const MarkovModel& mm) {
  const std::size_t n = mm.states.size();
  if (n == 0) throw ValidationError("Markov model '" + mm.id + "' is empty");
  if (n > 10000)
    throw AnalysisError("Markov model '" + mm.id +
                        "' exceeds the 10^4-state cap for the dense solver");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[mm.states[i]] = i;

  std::vector<std::vector<int>> adj(n);
  Eigen::MatrixXd generator = Eigen::MatrixXd::Zero(n, n);
  for (const auto& t : mm.transitions) {
    std::size_t from = index.at(t.from), to = index.at(t.to);
    if (t.rate <= 0.0) continue;
    generator(from, to) += t.rate;
    generator(from, from) -= t.rate;
    adj[from].push_back(static_cast<int>(to));
  }

  int component_count = 0;
  std::vector<int> component = detail::scc_components(n, adj, component_count);
  if (component_count > 1) {
    // Closed components have no edge leaving them; report them as the
    // absorbing part of the chain.
    std::vector<bool> open(component_count, false);
    for (std::size_t v = 0; v < n; ++v)
      for (int w : adj[v])
        if (component[v] != component[w]) open[component[v]] = true;
    std::string closed;
    for (std::size_t v = 0; v < n; ++v)
      if (!open[component[v]]) closed += (closed.empty() ? "" : ", ") + mm.states[v];
    throw AnalysisError("Markov model '" + mm.id +
                        "' is not irreducible; absorbing states: {" + closed +
                        "}");
  }

  // Solve Q^T pi = 0 with the first balance equation replaced by sum(pi) = 1.
  Eigen::MatrixXd a = generator.transpose();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  a.row(0).setOnes();
  b(0) = 1.0;
  Eigen::VectorXd pi = a.partialPivLu().solve(b);

  SteadyState out;
  out.pi.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.pi[i] = std::max(0.0, pi(i));
  Eigen::VectorXd residual = generator.transpose() * pi;
  out.residual = residual.cwiseAbs().maxCoeff();
  if (!(out.residual <= 1e-10))
    throw AnalysisError("Markov model '" + mm.id +
                        "': steady-state solve residual " +
                        std::to_string(out.residual) + " exceeds 1e-10");
  return out;
}

/// Folds the steady state onto the dependency group's state vectors:
/// probabilities are summed per state vector; a state vector's entry
/// frequency sums pi(from) * rate over every transition arriving into its
/// state set from outside.
inline JointTable mm_to_joint(const MarkovModel& mm,
                              const std::vector<double>& pi,
                              const DependencyGroupDecl& group) {
  const std::size_t n = mm.states.size();
  const std::size_t k = group.members.size();
  if (pi.size() != n)
    throw ValidationError("mm_to_joint: steady-state vector size mismatch");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[mm.states[i]] = i;

  std::vector<std::size_t> vector_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = mm.state_map.find(mm.states[i]);
    if (it == mm.state_map.end())
      throw ValidationError("Markov model '" + mm.id + "': state '" +
                            mm.states[i] + "' unmapped in state_map");
    const std::string& bits = it->second;
    if (bits.size() != k)
      throw ValidationError("Markov model '" + mm.id + "': state '" +
                            mm.states[i] + "' mapping has " +
                            std::to_string(bits.size()) + " bits, expected " +
                            std::to_string(k));
    std::size_t v = 0;
    for (std::size_t b = 0; b < k; ++b) {
      if (bits[b] != '0' && bits[b] != '1')
        throw ValidationError("Markov model '" + mm.id +
                              "': state map must use only 0/1 bits");
      if (bits[b] == '1') v |= std::size_t{1} << (k - 1 - b);
    }
    vector_of[i] = v;
  }

  std::vector<double> probs(std::size_t{1} << k, 0.0);
  std::vector<double> freqs(probs.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) probs[vector_of[i]] += pi[i];
  for (const auto& t : mm.transitions) {
    std::size_t from = index.at(t.from), to = index.at(t.to);
    if (vector_of[from] != vector_of[to])
      freqs[vector_of[to]] += pi[from] * t.rate;
  }
  return JointTable(group.id, group.members, std::move(probs),
                    std::move(freqs));
}

}  // namespace deptree
