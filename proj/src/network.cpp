#include "destiny/network.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace destiny {

Graph::Graph(int agents, std::vector<std::pair<int, int>> edge_list)
    : num_agents(agents), edges(std::move(edge_list)) {
  if (num_agents < 1) {
    throw std::invalid_argument("Graph: need at least one agent");
  }
  for (auto& [i, j] : edges) {
    if (i == j) {
      throw std::invalid_argument("Graph: self-loop at node " +
                                  std::to_string(i));
    }
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= num_agents) {
      throw std::invalid_argument("Graph: edge (" + std::to_string(i) + ", " +
                                  std::to_string(j) + ") out of range");
    }
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw std::invalid_argument("Graph: duplicate edge");
  }
}

bool is_connected(const Graph& g) {
  std::vector<std::vector<int>> adj(g.num_agents);
  for (const auto& [i, j] : g.edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  std::vector<char> seen(g.num_agents, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  return reached == g.num_agents;
}

Graph erdos_renyi(int d, double prob, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("erdos_renyi: need d >= 1");
  if (!(prob > 0.0 && prob <= 1.0)) {
    throw std::invalid_argument("erdos_renyi: need prob in (0, 1]");
  }
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        if (unit(rng) < prob) edges.emplace_back(i, j);
      }
    }
    Graph g(d, std::move(edges));
    if (is_connected(g)) return g;
  }
  throw std::runtime_error(
      "erdos_renyi: no connected sample in 1000 attempts; prob = " +
      std::to_string(prob) + " is too small for d = " + std::to_string(d));
}

MixingMatrix metropolis_weights(const Graph& g) {
  if (!is_connected(g)) {
    throw std::invalid_argument("metropolis_weights: graph is disconnected");
  }
  const int d = g.num_agents;
  std::vector<int> deg(d, 0);
  for (const auto& [i, j] : g.edges) {
    ++deg[i];
    ++deg[j];
  }
  RealMatrix W = RealMatrix::Zero(d, d);
  for (const auto& [i, j] : g.edges) {
    const double w = 1.0 / (1.0 + std::max(deg[i], deg[j]));
    W(i, j) = w;
    W(j, i) = w;
  }
  for (int i = 0; i < d; ++i) {
    W(i, i) = 1.0 - W.row(i).sum();
  }
  MixingMatrix mix{std::move(W), 0.0};
  mix.lambda = spectral_gap(mix.W);
  if (!(mix.lambda < 1.0)) {
    throw std::runtime_error("metropolis_weights: spectral gap >= 1");
  }
  return mix;
}

double spectral_gap(const RealMatrix& W) {
  if (W.rows() != W.cols()) {
    throw std::invalid_argument("spectral_gap: matrix must be square");
  }
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("spectral_gap: matrix must be symmetric");
  }
  const int d = static_cast<int>(W.rows());
  RealMatrix M = W.array() - 1.0 / static_cast<double>(d);
  Eigen::SelfAdjointEigenSolver<RealMatrix> eig(M, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

double MixingReport::worst_violation() const {
  return std::max({symmetry.worst, stochasticity.worst, nonnegativity.worst,
                   pattern.worst});
}

MixingReport verify_mixing_matrix(const RealMatrix& W, const Graph& g) {
  MixingReport report;
  const int d = g.num_agents;
  if (W.rows() != d || W.cols() != d) {
    throw std::invalid_argument("verify_mixing_matrix: W size mismatch");
  }
  constexpr double tol = 1e-12;

  report.symmetry.worst = (W - W.transpose()).cwiseAbs().maxCoeff();
  report.symmetry.pass = report.symmetry.worst <= tol;

  const double row_dev =
      (W.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double col_dev =
      (W.colwise().sum().array() - 1.0).abs().maxCoeff();
  report.stochasticity.worst = std::max(row_dev, col_dev);
  report.stochasticity.pass = report.stochasticity.worst <= tol;

  report.nonnegativity.worst = std::max(0.0, -W.minCoeff());
  report.nonnegativity.pass = report.nonnegativity.worst <= 0.0;

  RealMatrix off_pattern = W.cwiseAbs();
  off_pattern.diagonal().setZero();
  for (const auto& [i, j] : g.edges) {
    off_pattern(i, j) = 0.0;
    off_pattern(j, i) = 0.0;
  }
  report.pattern.worst = off_pattern.maxCoeff();
  report.pattern.pass = report.pattern.worst <= 0.0;

  return report;
}

std::vector<RealMatrix> mix_stack(const RealMatrix& W,
                                  const std::vector<RealMatrix>& blocks) {
  const std::size_t d = blocks.size();
  if (W.rows() != W.cols() ||
      static_cast<std::size_t>(W.rows()) != d) {
    throw std::invalid_argument("mix_stack: W size does not match block count");
  }
  if (d == 0) return {};
  const Eigen::Index n = blocks[0].rows();
  const Eigen::Index p = blocks[0].cols();
  for (const auto& b : blocks) {
    if (b.rows() != n || b.cols() != p) {
      throw std::invalid_argument("mix_stack: blocks must share one shape");
    }
  }
  std::vector<RealMatrix> out;
  out.reserve(d);
  for (std::size_t i = 0; i < d; ++i) {
    RealMatrix acc = RealMatrix::Zero(n, p);
    for (std::size_t j = 0; j < d; ++j) {
      const double w = W(static_cast<Eigen::Index>(i),
                         static_cast<Eigen::Index>(j));
      if (w != 0.0) acc += w * blocks[j];
    }
    out.push_back(std::move(acc));
  }
  return out;
}

void save_edge_list(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_edge_list: cannot open " + path);
  }
  for (const auto& [i, j] : g.edges) {
    out << i << ' ' << j << '\n';
  }
  if (!out) {
    throw std::runtime_error("save_edge_list: write failed for " + path);
  }
}

Graph load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_edge_list: cannot open " + path);
  }
  std::vector<std::pair<int, int>> edges;
  int max_node = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int i = 0;
    int j = 0;
    if (!(ss >> i >> j)) {
      throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                               ": expected 'i j'");
    }
    edges.emplace_back(i, j);
    max_node = std::max({max_node, i, j});
  }
  return Graph(max_node + 1, std::move(edges));
}

}  // namespace destiny
