#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "destiny/engine.hpp"

using destiny::AgentState;
using destiny::Graph;
using destiny::MixingMatrix;
using destiny::ObjectiveList;
using destiny::RealMatrix;
using destiny::StiefelPoint;

namespace {

RealMatrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                    double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  RealMatrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = g(rng);
  }
  return M;
}

ObjectiveList pca_agents_for(const RealMatrix& A, int d, Eigen::Index p) {
  return destiny::make_pca_agents(A, d, p);
}

MixingMatrix trivial_mix() {
  return destiny::metropolis_weights(destiny::erdos_renyi(1, 1.0, 0));
}

bool bitwise_equal(const RealMatrix& a, const RealMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != b(i, j)) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("initialize_agents: tracker seeding") {
  const RealMatrix A = destiny::generate_synthetic_pca({8, 16, 2, 0.5, 1});
  const StiefelPoint x0 = destiny::orthonormalize(gaussian(8, 2, 2));

  auto solo = pca_agents_for(A, 1, 2);
  auto states = destiny::initialize_agents(x0, solo, 1.0);
  CHECK(states.size() == 1);
  CHECK(bitwise_equal(states[0].D,
                      destiny::local_direction(*solo[0], x0.matrix(), 1.0)));
  CHECK_FALSE(states[0].has_memory);

  auto agents = pca_agents_for(A, 4, 2);
  auto many = destiny::initialize_agents(x0, agents, 1.0);
  CHECK(destiny::consensus_error(many) == 0.0);

  // (1/d) sum_i D_{i,0} equals the direction built from the pooled
  // gradient, evaluated on the unpartitioned data
  RealMatrix d_bar = RealMatrix::Zero(8, 2);
  for (const auto& s : many) d_bar += s.D;
  d_bar /= 4.0;
  destiny::PcaObjective pooled(A, 2);
  const RealMatrix expected = destiny::direction_h(
      x0.matrix(),
      pooled.euclidean_grad(destiny::cube(x0.matrix())) / 4.0, 1.0);
  CHECK((d_bar - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("bb_stepsize: ratios, clamps, stagnation") {
  const RealMatrix J = gaussian(5, 2, 3);
  CHECK(destiny::bb_stepsize(J, J, 1e-10, 10.0) == doctest::Approx(1.0));
  CHECK(destiny::bb_stepsize(2.0 * J, J, 1e-10, 10.0) == doctest::Approx(2.0));
  CHECK(destiny::bb_stepsize(2.0 * J, J, 1e-10, 1.5) == 1.5);

  RealMatrix S(2, 1), T(2, 1);
  S << 1, 0;
  T << 0, 1;  // orthogonal to S
  CHECK(destiny::bb_stepsize(S, T, 1e-4, 1.0) == 1e-4);

  CHECK(destiny::bb_stepsize(S, RealMatrix::Zero(2, 1), 1e-4, 1.0) == 1.0);
}

TEST_CASE("single agent reduces to the plain penalty-gradient iteration") {
  const RealMatrix A = destiny::generate_synthetic_pca({12, 24, 2, 0.5, 4});
  auto agents = pca_agents_for(A, 1, 2);
  const StiefelPoint x0 = destiny::orthonormalize(gaussian(12, 2, 5));
  const double beta = 1.0;
  const double eta = 1e-2;

  auto states = destiny::initialize_agents(x0, agents, beta);
  RealMatrix X = x0.matrix();
  const MixingMatrix mix = trivial_mix();
  for (int k = 0; k < 100; ++k) {
    destiny::destiny_round(states, mix, destiny::FixedStep{eta}, agents, beta,
                           k);
    const RealMatrix H = destiny::local_direction(*agents[0], X, beta);
    X = X - eta * H;
    REQUIRE(bitwise_equal(states[0].X, X));
    REQUIRE(bitwise_equal(states[0].D,
                          destiny::local_direction(*agents[0], X, beta)));
  }
}

TEST_CASE("identical agents stay identical through a round") {
  const RealMatrix A = destiny::generate_synthetic_pca({6, 12, 2, 0.5, 6});
  destiny::ObjectiveList agents;
  for (int i = 0; i < 4; ++i) {
    agents.push_back(std::make_unique<destiny::PcaObjective>(A, 2));
  }
  const StiefelPoint x0 = destiny::orthonormalize(gaussian(6, 2, 7));
  auto states = destiny::initialize_agents(x0, agents, 1.0);
  // complete graph: every weight is 1/d, so the mixed sums are identical
  // term by term across agents
  const auto mix = destiny::metropolis_weights(destiny::erdos_renyi(4, 1.0, 0));
  for (int k = 0; k < 5; ++k) {
    destiny::destiny_round(states, mix, destiny::BBStep{}, agents, 1.0, k);
    for (int i = 1; i < 4; ++i) {
      REQUIRE(bitwise_equal(states[0].X, states[i].X));
      REQUIRE(bitwise_equal(states[0].D, states[i].D));
    }
  }
}

TEST_CASE("averaged-iterate and tracking identities over rounds") {
  const RealMatrix A = destiny::generate_synthetic_pca({10, 21, 3, 0.6, 8});
  auto agents = pca_agents_for(A, 3, 3);
  const StiefelPoint x0 = destiny::orthonormalize(gaussian(10, 3, 9));
  const double beta = 1.0;
  const double eta = 1e-2;
  const auto mix =
      destiny::metropolis_weights(destiny::erdos_renyi(3, 0.9, 10));

  auto states = destiny::initialize_agents(x0, agents, beta);
  CHECK(destiny::tracking_residual(states, agents, beta) == 0.0);

  for (int k = 0; k < 5; ++k) {
    const RealMatrix x_bar = destiny::average_iterate(states);
    RealMatrix d_bar = RealMatrix::Zero(10, 3);
    for (const auto& s : states) d_bar += s.D;
    d_bar /= 3.0;

    destiny::destiny_round(states, mix, destiny::FixedStep{eta}, agents, beta,
                           k);

    const RealMatrix x_bar_next = destiny::average_iterate(states);
    const RealMatrix predicted = x_bar - eta * d_bar;
    CHECK((x_bar_next - predicted).norm() <=
          1e-12 * (1.0 + x_bar_next.norm()));

    RealMatrix h_bar = RealMatrix::Zero(10, 3);
    for (int i = 0; i < 3; ++i) {
      h_bar += destiny::local_direction(*agents[i], states[i].X, beta);
    }
    h_bar /= 3.0;
    CHECK(destiny::tracking_residual(states, agents, beta) <=
          1e-10 * (1.0 + h_bar.norm()));
  }
}

TEST_CASE("tracking identity holds over a long run, any stepsize rule") {
  const RealMatrix A = destiny::generate_synthetic_pca({10, 30, 2, 0.7, 11});
  auto agents = pca_agents_for(A, 5, 2);
  const StiefelPoint x0 = destiny::orthonormalize(gaussian(10, 2, 12));
  const auto mix =
      destiny::metropolis_weights(destiny::erdos_renyi(5, 0.6, 13));
  auto states = destiny::initialize_agents(x0, agents, 1.0);
  for (int k = 0; k < 200; ++k) {
    destiny::destiny_round(states, mix, destiny::BBStep{}, agents, 1.0, k);
    RealMatrix h_bar = RealMatrix::Zero(10, 2);
    for (int i = 0; i < 5; ++i) {
      h_bar += destiny::local_direction(*agents[i], states[i].X, 1.0);
    }
    h_bar /= 5.0;
    REQUIRE(destiny::tracking_residual(states, agents, 1.0) <=
            1e-10 * (1.0 + h_bar.norm()));
  }

  // negative control: a weight matrix with broken row sums loses tracking
  auto broken = mix;
  broken.W(0, 0) += 0.05;
  auto bad_states = destiny::initialize_agents(x0, agents, 1.0);
  double residual = 0.0;
  for (int k = 0; k < 50; ++k) {
    destiny::destiny_round(bad_states, broken, destiny::FixedStep{1e-2},
                           agents, 1.0, k);
    residual = destiny::tracking_residual(bad_states, agents, 1.0);
  }
  CHECK(residual > 1e-6);
}

TEST_CASE("permutation equivariance") {
  const RealMatrix A = destiny::generate_synthetic_pca({8, 20, 2, 0.6, 14});
  const StiefelPoint x0 = destiny::orthonormalize(gaussian(8, 2, 15));

  // d = 2 swap: two-term sums commute exactly, so the relabeled system
  // reproduces the original states bit for bit
  {
    auto agents = pca_agents_for(A, 2, 2);
    auto swapped = pca_agents_for(A, 2, 2);
    std::swap(swapped[0], swapped[1]);
    const auto mix = destiny::metropolis_weights(Graph(2, {{0, 1}}));
    auto s1 = destiny::initialize_agents(x0, agents, 1.0);
    auto s2 = destiny::initialize_agents(x0, swapped, 1.0);
    for (int k = 0; k < 20; ++k) {
      destiny::destiny_round(s1, mix, destiny::BBStep{}, agents, 1.0, k);
      destiny::destiny_round(s2, mix, destiny::BBStep{}, swapped, 1.0, k);
    }
    REQUIRE(bitwise_equal(s1[0].X, s2[1].X));
    REQUIRE(bitwise_equal(s1[1].X, s2[0].X));
    REQUIRE(bitwise_equal(s1[0].D, s2[1].D));
  }

  // general permutation: same up to reordering of floating-point sums
  {
    const int d = 5;
    std::vector<int> perm{3, 0, 4, 1, 2};
    auto agents = pca_agents_for(A, d, 2);
    const auto mix =
        destiny::metropolis_weights(destiny::erdos_renyi(d, 0.7, 16));

    destiny::ObjectiveList relabeled(d);
    auto fresh = pca_agents_for(A, d, 2);
    RealMatrix Wp(d, d);
    for (int i = 0; i < d; ++i) {
      relabeled[perm[i]] = std::move(fresh[i]);
      for (int j = 0; j < d; ++j) Wp(perm[i], perm[j]) = mix.W(i, j);
    }
    MixingMatrix mixp{Wp, mix.lambda};

    auto s1 = destiny::initialize_agents(x0, agents, 1.0);
    auto s2 = destiny::initialize_agents(x0, relabeled, 1.0);
    for (int k = 0; k < 20; ++k) {
      destiny::destiny_round(s1, mix, destiny::BBStep{}, agents, 1.0, k);
      destiny::destiny_round(s2, mixp, destiny::BBStep{}, relabeled, 1.0, k);
    }
    for (int i = 0; i < d; ++i) {
      CHECK((s1[i].X - s2[perm[i]].X).cwiseAbs().maxCoeff() <=
            1e-12 * (1.0 + s1[i].X.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("substationarity: self ratio, stationary point, scale invariance") {
  const RealMatrix A = destiny::generate_synthetic_pca({10, 20, 3, 0.5, 17});
  auto agents = pca_agents_for(A, 4, 3);
  const auto grad_f = [&agents](const RealMatrix& X) {
    return destiny::pooled_grad(agents, X);
  };

  const RealMatrix x0 = destiny::orthonormalize(gaussian(10, 3, 18)).matrix();
  const auto self = destiny::substationarity_violation(x0, x0, grad_f);
  CHECK(self.value == 1.0);
  CHECK_FALSE(self.absolute);

  const StiefelPoint star = destiny::pca_oracle(A, 3);
  const auto at_star =
      destiny::substationarity_violation(star.matrix(), x0, grad_f);
  CHECK(at_star.value <= 1e-10);

  const auto grad_2f = [&grad_f](const RealMatrix& X) {
    return RealMatrix(2.0 * grad_f(X));
  };
  const RealMatrix probe = gaussian(10, 3, 19);
  const auto base = destiny::substationarity_violation(probe, x0, grad_f);
  const auto doubled = destiny::substationarity_violation(probe, x0, grad_2f);
  CHECK(doubled.value == doctest::Approx(base.value).epsilon(1e-15));

  // vanishing initial gradient switches to the flagged absolute mode
  const auto grad_zero = [](const RealMatrix& X) {
    return RealMatrix(RealMatrix::Zero(X.rows(), X.cols()));
  };
  const auto flat = destiny::substationarity_violation(probe, x0, grad_zero);
  CHECK(flat.absolute);
  CHECK(flat.value == 0.0);
}

TEST_CASE("consensus error") {
  const RealMatrix M = gaussian(6, 2, 20);
  std::vector<AgentState> states(2);
  states[0].X = M;
  states[1].X = M;
  CHECK(destiny::consensus_error(states) == 0.0);

  states[1].X = -M;
  CHECK(destiny::consensus_error(states) ==
        doctest::Approx(M.norm()).epsilon(1e-14));

  std::vector<AgentState> three(3);
  for (int i = 0; i < 3; ++i) three[i].X = gaussian(6, 2, 21 + i);
  RealMatrix mean = (three[0].X + three[1].X + three[2].X) / 3.0;
  double acc = 0.0;
  for (const auto& s : three) acc += (s.X - mean).squaredNorm();
  CHECK(destiny::consensus_error(three) ==
        doctest::Approx(std::sqrt(acc / 3.0)).epsilon(1e-14));
}

TEST_CASE("feasibility violation") {
  std::vector<AgentState> states(3);
  for (int i = 0; i < 3; ++i) {
    states[i].X = destiny::orthonormalize(gaussian(7, 3, 30 + i)).matrix();
  }
  CHECK(destiny::feasibility_violation(states) <= 1e-12);

  std::vector<AgentState> one(1);
  one[0].X = RealMatrix::Constant(1, 1, std::sqrt(2.0));
  CHECK(destiny::feasibility_violation(one) ==
        doctest::Approx(1.0).epsilon(1e-14));

  std::vector<AgentState> rnd(3);
  for (int i = 0; i < 3; ++i) rnd[i].X = gaussian(5, 2, 40 + i);
  double acc = 0.0;
  for (const auto& s : rnd) acc += destiny::orth_residual(s.X).squaredNorm();
  CHECK(destiny::feasibility_violation(rnd) ==
        doctest::Approx(std::sqrt(acc / 3.0)).epsilon(1e-14));
}

TEST_CASE("merit value") {
  const RealMatrix A = destiny::generate_synthetic_pca({6, 12, 2, 0.5, 50});
  auto agents = pca_agents_for(A, 2, 2);
  const auto f = [&agents](const RealMatrix& X) {
    return destiny::pooled_value(agents, X);
  };

  // perfect consensus and tracking: the deviation terms vanish
  const StiefelPoint x0 = destiny::orthonormalize(gaussian(6, 2, 51));
  std::vector<AgentState> states(2);
  states[0].X = x0.matrix();
  states[1].X = x0.matrix();
  states[0].D = gaussian(6, 2, 52);
  states[1].D = states[0].D;
  CHECK(destiny::merit_value(states, 1.0, f, 1.0) ==
        destiny::h_value(x0.matrix(), f, 1.0));

  CHECK_THROWS_AS(destiny::merit_value(states, 0.0, f, 1.0),
                  std::invalid_argument);

  std::vector<AgentState> rnd(3);
  for (int i = 0; i < 3; ++i) {
    rnd[i].X = gaussian(6, 2, 53 + i);
    rnd[i].D = gaussian(6, 2, 56 + i);
  }
  RealMatrix x_bar = (rnd[0].X + rnd[1].X + rnd[2].X) / 3.0;
  RealMatrix d_bar = (rnd[0].D + rnd[1].D + rnd[2].D) / 3.0;
  double dev_x = 0.0, dev_d = 0.0;
  for (const auto& s : rnd) {
    dev_x += (x_bar - s.X).squaredNorm();
    dev_d += (d_bar - s.D).squaredNorm();
  }
  const double expected = destiny::h_value(x_bar, f, 1.0) + dev_x + 1.0 * dev_d;
  CHECK(destiny::merit_value(rnd, 1.0, f, 1.0) ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("run: empty budget, single-agent convergence, determinism") {
  const RealMatrix A = destiny::generate_synthetic_pca({20, 40, 2, 0.5, 60});
  auto agents = pca_agents_for(A, 1, 2);
  const StiefelPoint x0 = destiny::orthonormalize(gaussian(20, 2, 61));
  const MixingMatrix mix = trivial_mix();

  destiny::RunConfig zero;
  zero.max_rounds = 0;
  const auto none = destiny::run(zero, mix, agents, x0);
  CHECK(none.trace.empty());
  CHECK(none.status == destiny::RunStatus::MaxRounds);

  destiny::RunConfig cfg;
  cfg.rule = destiny::BBStep{};
  cfg.max_rounds = 3000;
  cfg.tol_substationarity = 1e-6;
  cfg.tol_consensus = 1e-9;
  cfg.tol_feasibility = 1e-9;
  const auto res = destiny::run(cfg, mix, agents, x0);
  CHECK(res.status == destiny::RunStatus::Converged);
  CHECK(res.trace.back().substationarity <= 1e-6);

  const auto projected =
      StiefelPoint(destiny::polar_factor(destiny::average_iterate(res.states)));
  const auto angles =
      destiny::principal_angles(projected, destiny::pca_oracle(A, 2));
  CHECK(angles.back() <= 1e-4);

  const auto res2 = destiny::run(cfg, mix, agents, x0);
  REQUIRE(res.trace.size() == res2.trace.size());
  for (std::size_t k = 0; k < res.trace.size(); ++k) {
    CHECK(res.trace[k].substationarity == res2.trace[k].substationarity);
    CHECK(res.trace[k].consensus == res2.trace[k].consensus);
    CHECK(res.trace[k].feasibility == res2.trace[k].feasibility);
    CHECK(res.trace[k].h_value == res2.trace[k].h_value);
    CHECK(res.trace[k].eta_min == res2.trace[k].eta_min);
    CHECK(res.trace[k].eta_max == res2.trace[k].eta_max);
  }
  for (std::size_t i = 0; i < res.states.size(); ++i) {
    CHECK(bitwise_equal(res.states[i].X, res2.states[i].X));
  }
}

TEST_CASE("run: divergence is reported with a partial trace") {
  const RealMatrix A = destiny::generate_synthetic_pca({10, 20, 2, 0.9, 70});
  auto agents = pca_agents_for(A, 2, 2);
  const StiefelPoint x0 = destiny::orthonormalize(gaussian(10, 2, 71));
  const auto mix = destiny::metropolis_weights(Graph(2, {{0, 1}}));

  destiny::RunConfig cfg;
  cfg.rule = destiny::FixedStep{1e3};  // absurd step; the cubic terms blow up
  cfg.max_rounds = 500;
  const auto res = destiny::run(cfg, mix, agents, x0);
  CHECK(res.status == destiny::RunStatus::Diverged);
  CHECK(res.message.find("round") != std::string::npos);
  CHECK(res.trace.size() < 500);
}

TEST_CASE("pca oracle and principal angles") {
  RealMatrix A = RealMatrix::Zero(3, 3);
  A(0, 0) = 3;
  A(1, 1) = 2;
  A(2, 2) = 1;
  const StiefelPoint top2 = destiny::pca_oracle(A, 2);
  RealMatrix expected(3, 2);
  expected << 1, 0, 0, 1, 0, 0;
  CHECK((top2.matrix() - expected).cwiseAbs().maxCoeff() <= 1e-14);

  const auto full = destiny::generate_synthetic_pca_full({9, 18, 3, 0.4, 80});
  const StiefelPoint oracle = destiny::pca_oracle(full.A, 3);
  // sine-based span distance resolves angles down to machine precision
  const RealMatrix U3 = full.U.leftCols(3);
  const RealMatrix residual = oracle.matrix() - U3 * (U3.transpose() * oracle.matrix());
  CHECK(residual.norm() <= 1e-10);

  // right-multiplying the data by an orthogonal matrix keeps the span
  const RealMatrix Q = destiny::orthonormalize(gaussian(18, 18, 81)).matrix();
  const StiefelPoint rotated = destiny::pca_oracle(full.A * Q, 3);
  const auto angles = destiny::principal_angles(oracle, rotated);
  CHECK(angles.back() <= 1e-6);

  const RealMatrix rank1 = gaussian(5, 1, 82) * gaussian(1, 6, 83);
  CHECK_THROWS_AS(destiny::pca_oracle(rank1, 2), std::invalid_argument);

  const StiefelPoint X = destiny::orthonormalize(gaussian(8, 2, 84));
  const auto zero_angles = destiny::principal_angles(X, X);
  CHECK(zero_angles.back() <= 1e-6);

  const RealMatrix rot = destiny::orthonormalize(gaussian(2, 2, 85)).matrix();
  const StiefelPoint Xq = StiefelPoint(X.matrix() * rot);
  CHECK(destiny::principal_angles(X, Xq).back() <= 1e-6);

  RealMatrix first(4, 2), second(4, 2);
  first << 1, 0, 0, 1, 0, 0, 0, 0;
  second << 0, 0, 0, 0, 1, 0, 0, 1;
  const auto right_angles = destiny::principal_angles(StiefelPoint(first),
                                                      StiefelPoint(second));
  CHECK(right_angles.front() == doctest::Approx(std::acos(0.0)));
  CHECK(right_angles.back() == doctest::Approx(std::acos(0.0)));
}

TEST_CASE("polar factor") {
  const RealMatrix M = gaussian(7, 3, 90);
  const RealMatrix P = destiny::polar_factor(M);
  CHECK(destiny::orth_residual(P).norm() <= 1e-13);
  const StiefelPoint Q = destiny::orthonormalize(gaussian(7, 3, 91));
  CHECK((destiny::polar_factor(Q.matrix()) - Q.matrix()).cwiseAbs().maxCoeff() <=
        1e-12);
}
