#include <doctest.h>

#include <set>

#include "mhe/estimators.hpp"

using namespace mhe;

namespace {

struct Instance {
  SimulationResult sim;
  ProblemSetup setup;
};

Instance motivating_instance(int T, std::uint64_t seed = 0) {
  const Scenario sc = motivating_scenario(T);
  return {simulate(sc, seed), {sc.model, sc.sets, identity_weights(sc.model)}};
}

Instance reactor_instance(int T, std::uint64_t seed) {
  const Scenario sc = batch_reactor_scenario(T, seed);
  return {simulate(sc, seed),
          {sc.model, sc.sets,
           make_cost_weights(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(1, 1),
                             Eigen::MatrixXd::Identity(1, 1))}};
}

}  // namespace

TEST_CASE("piecewise window assignment for T = 10, N = 4") {
  const Instance inst = motivating_instance(10);
  const ApproxEstimate ae =
      approximate_estimator(inst.sim.data, 4, inst.setup, ToleranceConfig{});
  // Leading piece: offsets 0..2 of the window at tau = 0.
  for (int j = 0; j <= 2; ++j) {
    CHECK(ae.windows_used[j].first == 0);
    CHECK(ae.windows_used[j].second == j);
  }
  // Centered pieces: windows [1,5]..[5,9] at offset 2.
  for (int j = 3; j <= 7; ++j) {
    CHECK(ae.windows_used[j].first == j - 2);
    CHECK(ae.windows_used[j].second == 2);
  }
  // Trailing piece: window [6,10] at offsets 2..4.
  for (int j = 8; j <= 10; ++j) {
    CHECK(ae.windows_used[j].first == 6);
    CHECK(ae.windows_used[j].second == j - 6);
  }
}

TEST_CASE("index coverage assigns every j exactly once with literal boundaries") {
  for (const auto& [T, N] : std::vector<std::pair<int, int>>{{10, 4}, {20, 10}, {12, 12}}) {
    const Instance inst = motivating_instance(T);
    const ApproxEstimate ae =
        approximate_estimator(inst.sim.data, N, inst.setup, ToleranceConfig{});
    CHECK(static_cast<int>(ae.windows_used.size()) == T + 1);
    CHECK(ae.windows_used[N / 2].first == 0);           // j = N/2 in the first branch
    CHECK(ae.windows_used[T - N / 2].first == T - N);   // j = T-N/2 in the third branch
    // Distinct windows: T - N + 1.
    std::set<int> taus;
    for (const auto& [tau, off] : ae.windows_used) taus.insert(tau);
    CHECK(static_cast<int>(taus.size()) == T - N + 1);
  }
}

TEST_CASE("N = T reduces to the full-information solution") {
  const Instance inst = motivating_instance(12);
  const SolveReport fie = fie_reference(inst.sim.data, inst.setup, ToleranceConfig{});
  const ApproxEstimate ae =
      approximate_estimator(inst.sim.data, 12, inst.setup, ToleranceConfig{});
  CHECK((ae.x_ae.array() == fie.trajectory.x.array()).all());
  CHECK((ae.w_ae - fie.trajectory.w).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("argument validation") {
  const Instance inst = motivating_instance(10);
  CHECK_THROWS_AS(approximate_estimator(inst.sim.data, 5, inst.setup, ToleranceConfig{}),
                  std::invalid_argument);  // odd N
  CHECK_THROWS_AS(approximate_estimator(inst.sim.data, 12, inst.setup, ToleranceConfig{}),
                  std::invalid_argument);  // N > T
  ProblemSetup nonadd = inst.setup;
  nonadd.model.additive = false;
  CHECK_THROWS_AS(approximate_estimator(inst.sim.data, 4, nonadd, ToleranceConfig{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(mhe_sequence(inst.sim.data, 0, inst.setup, ToleranceConfig{}),
                  std::invalid_argument);
}

TEST_CASE("stitched disturbances are dynamically feasible by construction") {
  const Instance inst = reactor_instance(40, 5);
  const ApproxEstimate ae =
      approximate_estimator(inst.sim.data, 10, inst.setup, ToleranceConfig{});
  for (int j = 0; j < 40; ++j) {
    const Eigen::VectorXd defect =
        ae.x_ae.col(j + 1) - inst.setup.model.f_a(ae.x_ae.col(j), inst.sim.data.u.col(j)) -
        ae.w_ae.col(j);
    CHECK(defect.norm() == 0.0);
  }
}

TEST_CASE("parallel and serial approximate estimators are bit-identical") {
  const Instance inst = reactor_instance(36, 9);
  const ApproxEstimate serial =
      approximate_estimator(inst.sim.data, 10, inst.setup, ToleranceConfig{}, false);
  const ApproxEstimate parallel =
      approximate_estimator(inst.sim.data, 10, inst.setup, ToleranceConfig{}, true, 3);
  CHECK((serial.x_ae.array() == parallel.x_ae.array()).all());
  CHECK((serial.w_ae.array() == parallel.w_ae.array()).all());
}

TEST_CASE("MHE coincides with the growing-horizon FIE before the window fills") {
  const Instance inst = motivating_instance(14, 0);
  const int N = 6;
  const MheResult mhe = mhe_sequence(inst.sim.data, N, inst.setup, ToleranceConfig{});
  for (int t = 0; t < N; ++t) {
    const SolveReport fie_t =
        fie_reference(inst.sim.data.slice(0, t), inst.setup, ToleranceConfig{});
    CHECK((mhe.x_mhe.col(t).array() == fie_t.trajectory.x.col(t).array()).all());
  }
}

TEST_CASE("zero-noise MHE recovers the true trajectory") {
  SUBCASE("scalar integrator: exact from the first step") {
    Scenario sc = motivating_scenario(18);
    sc.w_law = NoiseLaw::constant(Eigen::VectorXd::Zero(1));
    sc.v_law = NoiseLaw::constant(Eigen::VectorXd::Zero(1));
    const SimulationResult sim = simulate(sc, 0);
    const ProblemSetup setup{sc.model, sc.sets, identity_weights(sc.model)};
    const MheResult mhe = mhe_sequence(sim.data, 6, setup, ToleranceConfig{});
    CHECK((mhe.x_mhe - sim.states).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("reactor: exact once the window spans an observable pair") {
    // A single output sample does not determine (x1, x2); from t = 1 the
    // window holds two measurements and the zero-cost optimum is the truth.
    Scenario sc = batch_reactor_scenario(25, 2);
    sc.w_law = NoiseLaw::constant(Eigen::VectorXd::Zero(2));
    sc.v_law = NoiseLaw::constant(Eigen::VectorXd::Zero(1));
    const SimulationResult sim = simulate(sc, 2);
    const ProblemSetup setup{sc.model, sc.sets,
                             make_cost_weights(Eigen::MatrixXd::Identity(2, 2),
                                               Eigen::MatrixXd::Identity(1, 1),
                                               Eigen::MatrixXd::Identity(1, 1))};
    const MheResult mhe = mhe_sequence(sim.data, 8, setup, ToleranceConfig{});
    CHECK((mhe.x_mhe.rightCols(25) - sim.states.rightCols(25)).cwiseAbs().maxCoeff() <= 1e-4);
  }
}

TEST_CASE("MHE terminal accuracy improves with the window length") {
  const Instance inst = motivating_instance(70, 0);
  WindowCache cache;
  const SolveReport fie = fie_reference(inst.sim.data, inst.setup, ToleranceConfig{}, &cache);
  std::vector<double> err;
  for (int N : {5, 10, 15, 20}) {
    const MheResult mhe = mhe_sequence(inst.sim.data, N, inst.setup, ToleranceConfig{}, &cache);
    err.push_back((mhe.x_mhe.col(70) - fie.trajectory.x.col(70)).norm());
  }
  for (std::size_t i = 1; i < err.size(); ++i) CHECK(err[i] <= err[i - 1] + 1e-9);
  CHECK(err.back() < 0.01 * err.front());
}

TEST_CASE("AE and MHE share the terminal estimate") {
  const Instance inst = motivating_instance(20, 0);
  WindowCache cache;
  const ApproxEstimate ae =
      approximate_estimator(inst.sim.data, 8, inst.setup, ToleranceConfig{}, false, 1, &cache);
  const MheResult mhe = mhe_sequence(inst.sim.data, 8, inst.setup, ToleranceConfig{}, &cache);
  CHECK((ae.x_ae.col(20).array() == mhe.x_mhe.col(20).array()).all());
}

TEST_CASE("window cache does not change results") {
  const Instance inst = reactor_instance(30, 13);
  WindowCache cache;
  const ApproxEstimate with_cache =
      approximate_estimator(inst.sim.data, 10, inst.setup, ToleranceConfig{}, false, 1, &cache);
  const ApproxEstimate without =
      approximate_estimator(inst.sim.data, 10, inst.setup, ToleranceConfig{});
  CHECK((with_cache.x_ae.array() == without.x_ae.array()).all());
  CHECK((with_cache.w_ae.array() == without.w_ae.array()).all());
  CHECK(cache.size() == 21);  // T - N + 1 distinct windows
  // Second pass is served from the cache and stays identical.
  const ApproxEstimate again =
      approximate_estimator(inst.sim.data, 10, inst.setup, ToleranceConfig{}, false, 1, &cache);
  CHECK(cache.size() == 21);
  CHECK((again.x_ae.array() == with_cache.x_ae.array()).all());
}

TEST_CASE("degenerate full-information horizon") {
  const Instance inst = motivating_instance(0);
  const SolveReport rep = fie_reference(inst.sim.data, inst.setup, ToleranceConfig{});
  CHECK(rep.status == SolveStatus::converged);
  CHECK(rep.trajectory.horizon() == 0);
}
