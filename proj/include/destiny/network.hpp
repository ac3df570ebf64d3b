#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "destiny/types.hpp"

namespace destiny {

/// Undirected communication graph over d agents. Edges are stored as
/// ordered pairs (i, j) with i < j, sorted and duplicate-free.
struct Graph {
  Graph(int num_agents, std::vector<std::pair<int, int>> edge_list);

  int num_agents = 0;
  std::vector<std::pair<int, int>> edges;
};

bool is_connected(const Graph& g);

/// Samples an Erdos-Renyi graph: each pair independently with probability
/// prob. Disconnected samples are rejected and regenerated with the seed
/// incremented, up to 1000 attempts. Deterministic in (d, prob, seed).
Graph erdos_renyi(int d, double prob, std::uint64_t seed);

/// Symmetric doubly stochastic weights conforming to the graph, plus the
/// cached spectral gap parameter lambda = ||W - 11^T/d||_2 < 1.
struct MixingMatrix {
  RealMatrix W;
  double lambda = 0.0;

  int num_agents() const { return static_cast<int>(W.rows()); }
};

/// Metropolis weights: W(i,j) = 1 / (1 + max(deg_i, deg_j)) on edges, zero
/// off the graph, and the diagonal absorbs the remainder of each row.
/// Satisfies symmetry, double stochasticity, nonnegativity and the
/// sparsity pattern on any connected graph.
MixingMatrix metropolis_weights(const Graph& g);

/// lambda = ||W - 11^T/d||_2 via symmetric eigendecomposition. Requires a
/// symmetric W.
double spectral_gap(const RealMatrix& W);

struct ConditionCheck {
  bool pass = false;
  double worst = 0.0;  // magnitude of the worst violation
};

/// Report-only verification of the mixing-matrix conditions: symmetry,
/// double stochasticity (tolerance 1e-12), nonnegativity, and conformance
/// to the graph's sparsity pattern.
struct MixingReport {
  ConditionCheck symmetry;
  ConditionCheck stochasticity;
  ConditionCheck nonnegativity;
  ConditionCheck pattern;

  bool all_pass() const {
    return symmetry.pass && stochasticity.pass && nonnegativity.pass &&
           pattern.pass;
  }
  double worst_violation() const;
};

MixingReport verify_mixing_matrix(const RealMatrix& W, const Graph& g);

/// Applies the mixing operator blockwise: out_i = sum_j W(i,j) * blocks_j,
/// accumulated in ascending j, so the result is reproducible and equals
/// the Kronecker form (W (x) I_n) applied to the stacked blocks without
/// ever forming it.
std::vector<RealMatrix> mix_stack(const RealMatrix& W,
                                  const std::vector<RealMatrix>& blocks);

/// Edge-list text format: one "i j" pair per line, 0-based indices.
void save_edge_list(const Graph& g, const std::string& path);
Graph load_edge_list(const std::string& path);

}  // namespace destiny
