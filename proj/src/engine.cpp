#include "destiny/engine.hpp"

#include <Eigen/SVD>

#include <chrono>
#include <cmath>
#include <limits>

namespace destiny {

RealMatrix local_direction(const LocalObjective& objective,
                           const RealMatrix& X, double beta) {
  return direction_h(X, objective.euclidean_grad(cube(X)), beta);
}

std::vector<AgentState> initialize_agents(const StiefelPoint& X_initial,
                                          const ObjectiveList& objectives,
                                          double beta) {
  if (objectives.empty()) {
    throw std::invalid_argument("initialize_agents: no objectives");
  }
  const RealMatrix& X0 = X_initial.matrix();
  std::vector<AgentState> states;
  states.reserve(objectives.size());
  for (const auto& obj : objectives) {
    if (obj->dim_n() != X0.rows() || obj->dim_p() != X0.cols()) {
      throw std::invalid_argument(
          "initialize_agents: objective dims do not match X_initial");
    }
    AgentState s;
    s.X = X0;
    s.D = local_direction(*obj, X0, beta);
    s.H_prev = s.D;
    states.push_back(std::move(s));
  }
  return states;
}

double bb_stepsize(const RealMatrix& S, const RealMatrix& J, double eta_min,
                   double eta_max) {
  if (S.rows() != J.rows() || S.cols() != J.cols()) {
    throw std::invalid_argument("bb_stepsize: shape mismatch");
  }
  const double jj = J.squaredNorm();
  if (jj < 1e-30) return eta_max;
  const double eta = std::abs(S.cwiseProduct(J).sum() / jj);
  return std::clamp(eta, eta_min, eta_max);
}

RoundInfo destiny_round(std::vector<AgentState>& states,
                        const MixingMatrix& mix, const StepsizeRule& rule,
                        const ObjectiveList& objectives, double beta,
                        int round_index) {
  const std::size_t d = states.size();
  if (objectives.size() != d) {
    throw std::invalid_argument("destiny_round: objective count mismatch");
  }
  if (static_cast<std::size_t>(mix.W.rows()) != d) {
    throw std::invalid_argument("destiny_round: mixing matrix size mismatch");
  }

  RoundInfo info;
  info.stepsizes.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (const auto* fixed = std::get_if<FixedStep>(&rule)) {
      info.stepsizes[j] = fixed->eta;
    } else {
      const auto& bb = std::get<BBStep>(rule);
      info.stepsizes[j] =
          states[j].has_memory
              ? bb_stepsize(states[j].X - states[j].X_prev,
                            states[j].D - states[j].D_prev, bb.eta_min,
                            bb.eta_max)
              : bb.eta0;
    }
  }

  // One communication round: every agent ships (X_j - eta_j D_j, D_j).
  std::vector<RealMatrix> messages;
  std::vector<RealMatrix> trackers;
  messages.reserve(d);
  trackers.reserve(d);
  for (std::size_t j = 0; j < d; ++j) {
    messages.push_back(states[j].X - info.stepsizes[j] * states[j].D);
    trackers.push_back(states[j].D);
  }
  std::vector<RealMatrix> x_new = mix_stack(mix.W, messages);
  std::vector<RealMatrix> d_mixed = mix_stack(mix.W, trackers);

  for (std::size_t i = 0; i < d; ++i) {
    RealMatrix h_new = local_direction(*objectives[i], x_new[i], beta);
    // (mix - H_old) + H_new keeps the d = 1 reduction exact: the
    // parenthesized difference cancels bit for bit when D == H.
    RealMatrix d_new = (d_mixed[i] - states[i].H_prev) + h_new;
    if (!x_new[i].allFinite() || !d_new.allFinite()) {
      throw divergence_error(round_index,
                             "non-finite update at agent " +
                                 std::to_string(i));
    }
    states[i].X_prev = std::move(states[i].X);
    states[i].D_prev = std::move(states[i].D);
    states[i].X = std::move(x_new[i]);
    states[i].D = std::move(d_new);
    states[i].H_prev = std::move(h_new);
    states[i].has_memory = true;
  }
  return info;
}

RealMatrix average_iterate(const std::vector<AgentState>& states) {
  if (states.empty()) {
    throw std::invalid_argument("average_iterate: no agents");
  }
  RealMatrix acc = states[0].X;
  for (std::size_t i = 1; i < states.size(); ++i) acc += states[i].X;
  return acc / static_cast<double>(states.size());
}

double pooled_value(const ObjectiveList& objectives, const RealMatrix& X) {
  double acc = 0.0;
  for (const auto& obj : objectives) acc += obj->value(X);
  return acc / static_cast<double>(objectives.size());
}

RealMatrix pooled_grad(const ObjectiveList& objectives, const RealMatrix& X) {
  RealMatrix acc = objectives[0]->euclidean_grad(X);
  for (std::size_t i = 1; i < objectives.size(); ++i) {
    acc += objectives[i]->euclidean_grad(X);
  }
  return acc / static_cast<double>(objectives.size());
}

Substationarity substationarity_violation(
    const RealMatrix& x_bar, const RealMatrix& x_bar0,
    const std::function<RealMatrix(const RealMatrix&)>& grad_f) {
  const double denom = tangent_component(x_bar0, grad_f(x_bar0)).norm();
  const double num = tangent_component(x_bar, grad_f(x_bar)).norm();
  if (denom > 0.0) return {num / denom, false};
  return {num, true};
}

double consensus_error(const std::vector<AgentState>& states) {
  const RealMatrix x_bar = average_iterate(states);
  double acc = 0.0;
  for (const auto& s : states) acc += (s.X - x_bar).squaredNorm();
  return std::sqrt(acc / static_cast<double>(states.size()));
}

double feasibility_violation(const std::vector<AgentState>& states) {
  if (states.empty()) {
    throw std::invalid_argument("feasibility_violation: no agents");
  }
  double acc = 0.0;
  for (const auto& s : states) acc += orth_residual(s.X).squaredNorm();
  return std::sqrt(acc / static_cast<double>(states.size()));
}

double merit_value(const std::vector<AgentState>& states, double rho,
                   const ObjectiveFn& f, double beta) {
  if (!(rho > 0.0)) {
    throw std::invalid_argument("merit_value: rho must be positive");
  }
  const RealMatrix x_bar = average_iterate(states);
  RealMatrix d_bar = states[0].D;
  for (std::size_t i = 1; i < states.size(); ++i) d_bar += states[i].D;
  d_bar /= static_cast<double>(states.size());
  double consensus_dev = 0.0;
  double tracking_dev = 0.0;
  for (const auto& s : states) {
    consensus_dev += (x_bar - s.X).squaredNorm();
    tracking_dev += (d_bar - s.D).squaredNorm();
  }
  return h_value(x_bar, f, beta) + consensus_dev + rho * tracking_dev;
}

double tracking_residual(const std::vector<AgentState>& states,
                         const ObjectiveList& objectives, double beta) {
  if (states.size() != objectives.size()) {
    throw std::invalid_argument("tracking_residual: size mismatch");
  }
  RealMatrix d_bar = states[0].D;
  RealMatrix h_bar = local_direction(*objectives[0], states[0].X, beta);
  for (std::size_t i = 1; i < states.size(); ++i) {
    d_bar += states[i].D;
    h_bar += local_direction(*objectives[i], states[i].X, beta);
  }
  const double d = static_cast<double>(states.size());
  return (d_bar / d - h_bar / d).norm();
}

RunResult run(const RunConfig& config, const MixingMatrix& mix,
              const ObjectiveList& objectives, const StiefelPoint& X_initial) {
  RunResult out;
  out.states = initialize_agents(X_initial, objectives, config.beta.value());

  const auto grad_f = [&objectives](const RealMatrix& X) {
    return pooled_grad(objectives, X);
  };
  const auto f = [&objectives](const RealMatrix& X) {
    return pooled_value(objectives, X);
  };
  const RealMatrix x_bar0 = X_initial.matrix();
  const double denom = tangent_component(x_bar0, grad_f(x_bar0)).norm();
  out.absolute_substationarity = !(denom > 0.0);

  const auto t0 = std::chrono::steady_clock::now();
  out.status = RunStatus::MaxRounds;
  out.trace.reserve(static_cast<std::size_t>(std::max(config.max_rounds, 0)));
  for (int k = 0; k < config.max_rounds; ++k) {
    RoundInfo info;
    try {
      info = destiny_round(out.states, mix, config.rule, objectives,
                           config.beta.value(), k);
    } catch (const divergence_error& e) {
      out.status = RunStatus::Diverged;
      out.message = e.what();
      break;
    }

    const RealMatrix x_bar = average_iterate(out.states);
    double sub = tangent_component(x_bar, grad_f(x_bar)).norm();
    if (!out.absolute_substationarity) sub /= denom;

    TraceRow row;
    row.round = k;
    row.substationarity = sub;
    row.consensus = consensus_error(out.states);
    row.feasibility = feasibility_violation(out.states);
    row.h_value = h_value(x_bar, f, config.beta.value());
    row.eta_min =
        *std::min_element(info.stepsizes.begin(), info.stepsizes.end());
    row.eta_max =
        *std::max_element(info.stepsizes.begin(), info.stepsizes.end());
    row.elapsed_s = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    out.trace.push_back(row);

    if (row.substationarity <= config.tol_substationarity &&
        row.consensus <= config.tol_consensus &&
        row.feasibility <= config.tol_feasibility) {
      out.status = RunStatus::Converged;
      break;
    }
  }
  return out;
}

StiefelPoint pca_oracle(const RealMatrix& A, Eigen::Index p) {
  if (p < 1 || p > A.rows()) {
    throw std::invalid_argument("pca_oracle: need 1 <= p <= n");
  }
  Eigen::BDCSVD<RealMatrix> svd(A, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double rank_tol = std::numeric_limits<double>::epsilon() *
                          static_cast<double>(std::max(A.rows(), A.cols())) *
                          sv(0);
  if (sv(p - 1) <= rank_tol) {
    throw std::invalid_argument("pca_oracle: numerical rank below p");
  }
  RealMatrix U = svd.matrixU().leftCols(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::Index argmax = 0;
    U.col(j).cwiseAbs().maxCoeff(&argmax);
    if (U(argmax, j) < 0.0) U.col(j) = -U.col(j);
  }
  return StiefelPoint(std::move(U));
}

std::vector<double> principal_angles(const StiefelPoint& X,
                                     const StiefelPoint& Y) {
  if (X.rows() != Y.rows() || X.cols() != Y.cols()) {
    throw std::invalid_argument("principal_angles: shape mismatch");
  }
  const RealMatrix cross = X.matrix().transpose() * Y.matrix();
  Eigen::JacobiSVD<RealMatrix> svd(cross);
  std::vector<double> angles;
  angles.reserve(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    const double s = std::clamp(svd.singularValues()(i), 0.0, 1.0);
    angles.push_back(std::acos(s));
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

RealMatrix polar_factor(const RealMatrix& M) {
  Eigen::JacobiSVD<RealMatrix> svd(M,
                                   Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace destiny
