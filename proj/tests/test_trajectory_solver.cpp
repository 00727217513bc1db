#include <doctest.h>

#include <random>

#include "mhe/trajectory_solver.hpp"
#include "oracle_qp.hpp"

using namespace mhe;

namespace {

ProblemSpec motivating_spec(int T, std::uint64_t seed = 0) {
  const Scenario sc = motivating_scenario(T);
  const SimulationResult sim = simulate(sc, seed);
  return ProblemSpec{sim.data, sc.model, sc.sets, identity_weights(sc.model),
                     std::nullopt, std::nullopt, 0};
}

double uniform_in(std::mt19937_64& eng, double lo, double hi) {
  return lo + (static_cast<double>(eng() >> 11) * 0x1.0p-53) * (hi - lo);
}

}  // namespace

TEST_CASE("zero-noise instance attains zero cost") {
  Scenario sc = batch_reactor_scenario(30, 4);
  sc.w_law = NoiseLaw::constant(Eigen::VectorXd::Zero(2));
  sc.v_law = NoiseLaw::constant(Eigen::VectorXd::Zero(1));
  const SimulationResult sim = simulate(sc, 4);
  const ProblemSpec spec{sim.data, sc.model, sc.sets, identity_weights(sc.model),
                         std::nullopt, std::nullopt, 0};
  const SolveReport rep = solve(spec);
  CHECK(rep.status == SolveStatus::converged);
  CHECK(rep.objective <= 1e-10);
  CHECK(rep.trajectory.w.cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(dynamics_defect(rep.trajectory, sim.data, sc.model) <= 1e-8);
  CHECK((rep.trajectory.x - sim.states).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("FIE solve matches the dense least-squares oracle") {
  for (const int T : {10, 70}) {
    const ProblemSpec spec = motivating_spec(T);
    const SolveReport rep = solve(spec);
    CHECK(rep.status == SolveStatus::converged);
    const auto oracle =
        testing::solve_linear_lsq(testing::integrator_linear_model(), spec.data, spec.weights);
    CHECK((rep.trajectory.x - oracle.x).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((rep.trajectory.w - oracle.w).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(rep.objective == doctest::Approx(oracle.cost).epsilon(1e-8));
    CHECK(rep.kkt_residual <= 1e-8);
  }
}

TEST_CASE("prediction form drops the terminal cost") {
  const Scenario sc = motivating_scenario(15);
  const SimulationResult sim = simulate(sc, 0);
  const CostWeights weights = identity_weights(sc.model, TerminalMode::prediction);
  const ProblemSpec spec{sim.data, sc.model, sc.sets, weights, std::nullopt, std::nullopt, 0};
  const SolveReport rep = solve(spec);
  CHECK(rep.status == SolveStatus::converged);
  const auto oracle =
      testing::solve_linear_lsq(testing::integrator_linear_model(), sim.data, weights);
  CHECK((rep.trajectory.x - oracle.x).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(rep.objective == doctest::Approx(oracle.cost).epsilon(1e-8));
  // The filtering optimum differs: the terminal residual is now free.
  const auto filtering = testing::solve_linear_lsq(testing::integrator_linear_model(), sim.data,
                                                   identity_weights(sc.model));
  CHECK((oracle.x - filtering.x).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("pinned solve reproduces the optimal segment") {
  const ProblemSpec spec = motivating_spec(10);
  const auto oracle =
      testing::solve_linear_lsq(testing::integrator_linear_model(), spec.data, spec.weights);

  ProblemSpec pinned = spec;
  pinned.data = spec.data.slice(2, 5);
  pinned.tau = 2;
  pinned.pin_initial = Eigen::VectorXd(oracle.x.col(2));
  pinned.pin_terminal = Eigen::VectorXd(oracle.x.col(7));
  const SolveReport rep = solve(pinned);
  CHECK(rep.status == SolveStatus::converged);
  CHECK((rep.trajectory.x.col(0) - oracle.x.col(2)).norm() == 0.0);  // pins exact
  CHECK((rep.trajectory.x.col(5) - oracle.x.col(7)).norm() == 0.0);
  for (int j = 0; j <= 5; ++j)
    CHECK((rep.trajectory.x.col(j) - oracle.x.col(2 + j)).norm() <= 1e-6);
  // Same segment from the oracle with pins, as an independent route.
  const auto pinned_oracle = testing::solve_linear_lsq(
      testing::integrator_linear_model(), pinned.data, spec.weights,
      Eigen::VectorXd(oracle.x.col(2)), Eigen::VectorXd(oracle.x.col(7)));
  CHECK((rep.trajectory.x - pinned_oracle.x).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("kkt residual certifies the oracle solution and flags perturbations") {
  const ProblemSpec spec = motivating_spec(10);
  const auto oracle =
      testing::solve_linear_lsq(testing::integrator_linear_model(), spec.data, spec.weights);
  EstimateTrajectory traj;
  traj.x = oracle.x;
  traj.w = oracle.w;
  CHECK(kkt_residual(spec, traj) <= 1e-8);

  EstimateTrajectory perturbed = traj;
  perturbed.x(0, 5) += 0.1;
  perturbed.w(0, 4) = perturbed.x(0, 5) - perturbed.x(0, 4);  // keep dynamics feasible
  perturbed.w(0, 5) = perturbed.x(0, 6) - perturbed.x(0, 5);
  CHECK(kkt_residual(spec, perturbed) > 1e-3);
}

TEST_CASE("kkt residual of the true trajectory on a zero-noise instance") {
  Scenario sc = motivating_scenario(15);
  sc.w_law = NoiseLaw::constant(Eigen::VectorXd::Zero(1));
  sc.v_law = NoiseLaw::constant(Eigen::VectorXd::Zero(1));
  const SimulationResult sim = simulate(sc, 0);
  const ProblemSpec spec{sim.data, sc.model, sc.sets, identity_weights(sc.model),
                         std::nullopt, std::nullopt, 0};
  EstimateTrajectory truth;
  truth.x = sim.states;
  truth.w = sim.disturbances;
  CHECK(kkt_residual(spec, truth) <= 1e-8);
}

TEST_CASE("warm start copies the overlap and extends the tail") {
  const ProblemSpec spec = motivating_spec(10);
  const SolveReport rep = solve(spec);

  SUBCASE("full overlap") {
    const EstimateTrajectory init = warm_start_from(rep.trajectory, 0, spec);
    CHECK((init.x.array() == rep.trajectory.x.array()).all());
    CHECK((init.w.array() == rep.trajectory.w.array()).all());
  }
  SUBCASE("no overlap equals the default initializer") {
    const EstimateTrajectory init = warm_start_from(rep.trajectory, 500, spec);
    const EstimateTrajectory def = default_initializer(spec);
    CHECK((init.x.array() == def.x.array()).all());
  }
  SUBCASE("one-step extension") {
    ProblemSpec wider = spec;
    wider.data = motivating_spec(11).data;
    const EstimateTrajectory init = warm_start_from(rep.trajectory, 0, wider);
    CHECK(init.w(0, 10) == 0.0);
    const Eigen::VectorXd expect =
        spec.model.f(init.x.col(10), wider.data.u.col(10), Eigen::VectorXd::Zero(1));
    CHECK((init.x.col(11) - expect).norm() == 0.0);
  }
}

TEST_CASE("optimality dominance over random feasible candidates") {
  const ProblemSpec spec = motivating_spec(12);
  const SolveReport rep = solve(spec);
  CHECK(rep.status == SolveStatus::converged);
  std::mt19937_64 eng(17);
  for (int trial = 0; trial < 100; ++trial) {
    EstimateTrajectory cand;
    cand.x.resize(1, 13);
    cand.w.resize(1, 12);
    cand.x(0, 0) = uniform_in(eng, -2.0, 4.0);
    for (int j = 0; j < 12; ++j) {
      cand.w(0, j) = uniform_in(eng, -1.0, 2.0);
      cand.x.col(j + 1) = spec.model.f(cand.x.col(j), spec.data.u.col(j), cand.w.col(j));
    }
    const double J = total_cost(spec.weights, cand, spec.data, spec.model);
    CHECK(J >= rep.objective - 1e-6 * (1.0 + rep.objective));
  }
}

TEST_CASE("box-constrained solve activates bounds and stays feasible") {
  // The rising measurements pull toward w = 1; a tight estimation-side
  // w-box forces the bound active.
  const Scenario sc = motivating_scenario(8);
  const SimulationResult sim = simulate(sc, 0);
  ConstraintSets sets = sc.sets;
  sets.W = Box::symmetric(1, 0.2);
  const ProblemSpec spec{sim.data, sc.model, sets, identity_weights(sc.model),
                         std::nullopt, std::nullopt, 0};
  const SolveReport rep = solve(spec);
  CHECK(rep.status == SolveStatus::converged);
  CHECK(rep.trajectory.w.maxCoeff() <= 0.2 + 1e-8);
  CHECK(rep.trajectory.w.maxCoeff() > 0.19);  // bound is genuinely active
  CHECK(rep.kkt_residual <= 1e-8);
  // The constrained optimum costs more than the unconstrained one.
  const auto oracle =
      testing::solve_linear_lsq(testing::integrator_linear_model(), sim.data, spec.weights);
  CHECK(rep.objective > oracle.cost + 1e-3);
}

TEST_CASE("merit descent is monotone across accepted iterations") {
  Scenario sc = batch_reactor_scenario(25, 8);
  const SimulationResult sim = simulate(sc, 8);
  const ProblemSpec spec{sim.data, sc.model, sc.sets,
                         make_cost_weights(Eigen::MatrixXd::Identity(2, 2),
                                           Eigen::MatrixXd::Identity(1, 1),
                                           Eigen::MatrixXd::Identity(1, 1)),
                         std::nullopt, std::nullopt, 0};
  const SolveReport rep = solve(spec);
  CHECK(rep.status == SolveStatus::converged);
  CHECK(!rep.diagnostics.empty());
  for (const auto& d : rep.diagnostics)
    CHECK(d.merit_after <= d.merit_before + 1e-12 * (1.0 + std::abs(d.merit_before)));
}

TEST_CASE("jointly scaling the weights leaves the minimizer unchanged") {
  Scenario sc = batch_reactor_scenario(30, 6);
  const SimulationResult sim = simulate(sc, 6);
  const CostWeights base = make_cost_weights(Eigen::MatrixXd::Identity(2, 2),
                                             Eigen::MatrixXd::Identity(1, 1),
                                             Eigen::MatrixXd::Identity(1, 1));
  const CostWeights scaled =
      make_cost_weights(10.0 * base.Q, 10.0 * base.R, 10.0 * base.G, base.terminal_mode);
  const ProblemSpec spec1{sim.data, sc.model, sc.sets, base, std::nullopt, std::nullopt, 0};
  const ProblemSpec spec2{sim.data, sc.model, sc.sets, scaled, std::nullopt, std::nullopt, 0};
  const SolveReport rep1 = solve(spec1);
  const SolveReport rep2 = solve(spec2);
  CHECK(rep1.status == SolveStatus::converged);
  CHECK(rep2.status == SolveStatus::converged);
  CHECK((rep1.trajectory.x - rep2.trajectory.x).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((rep1.trajectory.w - rep2.trajectory.w).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(rep2.objective == doctest::Approx(10.0 * rep1.objective).epsilon(1e-6));
}

TEST_CASE("incompatible pins are reported infeasible") {
  const Scenario sc = motivating_scenario(2);
  const SimulationResult sim = simulate(sc, 0);
  ConstraintSets sets = sc.sets;
  sets.W = Box::symmetric(1, 0.1);
  ProblemSpec spec{sim.data, sc.model, sets, identity_weights(sc.model),
                   Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 100.0), 0};
  const SolveReport rep = solve(spec);
  CHECK(rep.status == SolveStatus::infeasible);
}

TEST_CASE("degenerate horizon solves the single-state problem") {
  const Scenario sc = motivating_scenario(0);
  const SimulationResult sim = simulate(sc, 0);
  const ProblemSpec spec{sim.data, sc.model, sc.sets, identity_weights(sc.model),
                         std::nullopt, std::nullopt, 0};
  const SolveReport rep = solve(spec);
  CHECK(rep.status == SolveStatus::converged);
  // Filtering mode: min |y_0 - x|^2 -> x = y_0 = 2.
  CHECK(rep.trajectory.x(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(rep.objective <= 1e-12);
}

TEST_CASE("iteration budget is honored") {
  Scenario sc = batch_reactor_scenario(40, 3);
  const SimulationResult sim = simulate(sc, 3);
  const ProblemSpec spec{sim.data, sc.model, sc.sets,
                         make_cost_weights(Eigen::MatrixXd::Identity(2, 2),
                                           Eigen::MatrixXd::Identity(1, 1),
                                           Eigen::MatrixXd::Identity(1, 1)),
                         std::nullopt, std::nullopt, 0};
  ToleranceConfig tight;
  tight.max_iter = 1;
  const SolveReport rep = solve(spec, tight);
  CHECK(rep.iterations <= 1);
  CHECK(rep.status != SolveStatus::converged);
}

TEST_CASE("solver rejects malformed specs") {
  ProblemSpec spec = motivating_spec(5);
  spec.pin_initial = Eigen::VectorXd::Zero(2);  // wrong dimension
  CHECK_THROWS_AS(solve(spec), std::invalid_argument);

  ProblemSpec outside = motivating_spec(5);
  outside.sets.X = Box::symmetric(1, 1.0);
  outside.pin_initial = Eigen::VectorXd::Constant(1, 5.0);  // pin outside X
  CHECK_THROWS_AS(solve(outside), std::invalid_argument);
}
