#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mhe/box.hpp"

namespace mhe {

/// Nonlinear discrete-time system
///   x_{t+1} = f(x_t, u_t, w_t),   y_t = h(x_t, u_t) + v_t.
///
/// When `additive` is set the dynamics decompose as f(x,u,w) = f_a(x,u) + w
/// with q = n. Built-in models ship analytic Jacobians; L_f and L_h are
/// Lipschitz constants of f_a and h in x over the audit box.
struct SystemModel {
  int n = 0;  // state dimension
  int m = 0;  // input dimension
  int q = 0;  // disturbance dimension
  int p = 0;  // output dimension
  bool additive = false;
  double L_f = 0.0;
  double L_h = 0.0;

  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                const Eigen::VectorXd&)>
      f;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> f_a;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> h;

  // Jacobians of f w.r.t. x and w, and of h w.r.t. x.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                const Eigen::VectorXd&)>
      f_x;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                const Eigen::VectorXd&)>
      f_w;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> h_x;

  /// Set when h(x,u) = H x; used by the solver's default initializer.
  std::optional<Eigen::MatrixXd> h_output_matrix;

  /// Compact box over which L_f, L_h were estimated (and are audited).
  Box audit_box;

  std::string name;
  std::vector<double> params;  // model-specific constants, serialized with the scenario
};

/// Time-indexed input-output record d_j = (u_j, y_j), j in [0, T].
/// Columns are time steps.
struct DataBatch {
  Eigen::MatrixXd u;  // m x (T+1)
  Eigen::MatrixXd y;  // p x (T+1)

  int length() const { return static_cast<int>(y.cols()); }
  int horizon() const { return static_cast<int>(y.cols()) - 1; }

  DataBatch slice(int tau, int N) const;

  /// FNV-1a over the raw bytes of u and y; used as a window-cache key.
  std::uint64_t hash() const;
};

enum class LawKind { uniform_box, constant };

/// Per-step sampling spec for w or v: uniform on the corresponding
/// constraint box (seeded), or a fixed constant value.
struct NoiseLaw {
  LawKind kind = LawKind::constant;
  Eigen::VectorXd value;  // used when kind == constant

  static NoiseLaw uniform() { return {LawKind::uniform_box, {}}; }
  static NoiseLaw constant(Eigen::VectorXd v) { return {LawKind::constant, std::move(v)}; }
};

/// Event-driven input schedule: u_j = 0 except at multiples of `period`,
/// where u_j is chosen so that f_a(x_j, u_j) = target (the post-reset state
/// is then target + w_j). period 0 disables resets.
struct ResetSchedule {
  int period = 0;
  Eigen::VectorXd target;
};

struct Scenario {
  SystemModel model;
  ConstraintSets sets;
  Eigen::VectorXd x0;
  int T = 0;
  std::uint64_t seed = 0;
  NoiseLaw w_law;
  NoiseLaw v_law;
  ResetSchedule resets;
  std::string name;
};

struct SimulationResult {
  Eigen::MatrixXd states;        // n x (T+1)
  DataBatch data;                // u, y over [0, T]
  Eigen::MatrixXd disturbances;  // q x T
  Eigen::MatrixXd noises;        // p x (T+1)
};

/// Forward rollout of the scenario. Deterministic given (scenario, seed):
/// per step the draw order is v_t then w_t. Throws on constraint violations
/// (inconsistent scenario) and non-finite states (divergent dynamics).
SimulationResult simulate(const Scenario& scenario, std::uint64_t seed);
inline SimulationResult simulate(const Scenario& scenario) { return simulate(scenario, scenario.seed); }

/// Scalar integrator of the motivating example: x+ = x + w, y = x + v,
/// x0 = 1 with constant disturbance law w = v = 1 and unconstrained sets.
SystemModel scalar_integrator_model();
Scenario motivating_scenario(int T = 70, std::uint64_t seed = 0);

/// Euler-discretized batch reactor (k1 = 0.16, k2 = 0.0064, dt = 0.1) with
/// output y = x1 + x2 + v, x0 = [3, 0], |w_i| <= 0.05, |v| <= 0.5, and
/// emptying/refilling resets every 50 steps.
SystemModel batch_reactor_model();
Scenario batch_reactor_scenario(int T, std::uint64_t seed);

/// Reset times {50 i : i in [1, floor((T-1)/50)]} of the reactor scenario.
std::vector<int> reactor_reset_times(int T);

/// Largest ratio |g(x1) - g(x2)| / |x1 - x2| over `samples` seeded pairs in
/// the box; used to validate the declared Lipschitz constants.
double sampled_lipschitz_ratio(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
                               const Box& box, int samples, std::uint64_t seed);

}  // namespace mhe
