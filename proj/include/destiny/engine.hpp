#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "destiny/network.hpp"
#include "destiny/penalty.hpp"
#include "destiny/problems.hpp"
#include "destiny/types.hpp"

namespace destiny {

/// One agent's iterate X, tracker D, the cached local direction
/// H_i(X_i) from the current round, and previous-round copies feeding the
/// Barzilai-Borwein stepsize.
struct AgentState {
  RealMatrix X;
  RealMatrix D;
  RealMatrix H_prev;
  RealMatrix X_prev;
  RealMatrix D_prev;
  bool has_memory = false;
};

struct FixedStep {
  double eta = 1e-2;
};

/// Barzilai-Borwein stepsizes |<S,J>/<J,J>| per agent, clamped to
/// [eta_min, eta_max]; eta0 is used on the first round when no memory
/// exists.
struct BBStep {
  double eta0 = 1e-3;
  double eta_min = 1e-10;
  double eta_max = 1.0;
};

using StepsizeRule = std::variant<FixedStep, BBStep>;

struct RunConfig {
  PenaltyParam beta{1.0};
  StepsizeRule rule = BBStep{};
  int max_rounds = 5000;
  double tol_substationarity = 1e-5;
  double tol_consensus = 1e-7;
  double tol_feasibility = 1e-7;
  std::uint64_t seed = 0;  // bookkeeping only; the loop itself is
                           // deterministic in its inputs
};

/// Raised when an update produces a non-finite entry; names the round.
class divergence_error : public std::runtime_error {
 public:
  divergence_error(int round, const std::string& what)
      : std::runtime_error("round " + std::to_string(round) + ": " + what),
        round_(round) {}
  int round() const { return round_; }

 private:
  int round_;
};

/// Local direction H_i evaluated with the single gradient call at the
/// cube point.
RealMatrix local_direction(const LocalObjective& objective,
                           const RealMatrix& X, double beta);

/// Every agent starts at X_initial with its tracker seeded by its own
/// local direction: D_i = H_i(X_initial).
std::vector<AgentState> initialize_agents(const StiefelPoint& X_initial,
                                          const ObjectiveList& objectives,
                                          double beta);

/// |<S, J> / <J, J>| clamped to [eta_min, eta_max]; returns eta_max when
/// ||J||_F^2 < 1e-30 (stagnation fallback).
double bb_stepsize(const RealMatrix& S, const RealMatrix& J, double eta_min,
                   double eta_max);

struct RoundInfo {
  std::vector<double> stepsizes;  // per agent, in agent order
};

/// One synchronous round. Each agent j sends the pair
/// (X_j - eta_j D_j, D_j) in a single communication, then
///   X_i <- sum_j W(i,j) (X_j - eta_j D_j)
///   D_i <- sum_j W(i,j) D_j + H_i(X_i^new) - H_i(X_i^old),
/// evaluated as (mix - H_old) + H_new so that the d = 1 case reproduces
/// the single-process iteration bit for bit. BB memory rotates afterward.
/// Throws divergence_error if any update goes non-finite.
RoundInfo destiny_round(std::vector<AgentState>& states,
                        const MixingMatrix& mix, const StepsizeRule& rule,
                        const ObjectiveList& objectives, double beta,
                        int round_index);

/// Average iterate (1/d) sum_i X_i.
RealMatrix average_iterate(const std::vector<AgentState>& states);

/// Network objective (1/d) sum_i f_i and its gradient.
double pooled_value(const ObjectiveList& objectives, const RealMatrix& X);
RealMatrix pooled_grad(const ObjectiveList& objectives, const RealMatrix& X);

struct Substationarity {
  double value = 0.0;
  bool absolute = false;  // set when ||grad f(Xbar_0)|| vanishes and the
                          // value is the unnormalized norm
};

/// ||grad f(Xbar_k)||_F / ||grad f(Xbar_0)||_F, with the tangent-component
/// formula applied verbatim to the (possibly infeasible) averages.
Substationarity substationarity_violation(
    const RealMatrix& x_bar, const RealMatrix& x_bar0,
    const std::function<RealMatrix(const RealMatrix&)>& grad_f);

/// sqrt((1/d) sum_i ||X_i - Xbar||_F^2).
double consensus_error(const std::vector<AgentState>& states);

/// sqrt((1/d) sum_i ||X_i^T X_i - I_p||_F^2).
double feasibility_violation(const std::vector<AgentState>& states);

/// Diagnostic merit value h(Xbar) + sum_i ||Xbar - X_i||_F^2
/// + rho * sum_i ||Dbar - D_i||_F^2. rho must be positive.
double merit_value(const std::vector<AgentState>& states, double rho,
                   const ObjectiveFn& f, double beta);

/// ||Dbar - Hbar||_F with H_i(X_i) recomputed from the objectives, so the
/// gradient-tracking identity Dbar = Hbar is checked independently of the
/// cached directions.
double tracking_residual(const std::vector<AgentState>& states,
                         const ObjectiveList& objectives, double beta);

enum class RunStatus { Converged, MaxRounds, Diverged };

struct TraceRow {
  int round = 0;
  double substationarity = 0.0;
  double consensus = 0.0;
  double feasibility = 0.0;
  double h_value = 0.0;
  double eta_min = 0.0;
  double eta_max = 0.0;
  double elapsed_s = 0.0;
};

struct RunResult {
  std::vector<AgentState> states;
  std::vector<TraceRow> trace;
  RunStatus status = RunStatus::MaxRounds;
  std::string message;
  bool absolute_substationarity = false;
};

/// Runs rounds until substationarity, consensus and feasibility all fall
/// under their tolerances, max_rounds is reached, or an update diverges
/// (partial trace returned). Row k records the iterates at the end of
/// round k. Apart from the wall-clock column the trace is a deterministic
/// function of the inputs.
RunResult run(const RunConfig& config, const MixingMatrix& mix,
              const ObjectiveList& objectives, const StiefelPoint& X_initial);

/// Top-p left singular vectors, columns ordered by descending singular
/// value, each column's largest-magnitude entry made positive.
StiefelPoint pca_oracle(const RealMatrix& A, Eigen::Index p);

/// arccos of the singular values of X^T Y (clamped to [0, 1]), ascending.
std::vector<double> principal_angles(const StiefelPoint& X,
                                     const StiefelPoint& Y);

/// Nearest matrix with orthonormal columns, U V^T from the thin SVD.
RealMatrix polar_factor(const RealMatrix& M);

}  // namespace destiny
